"""Instruction templates sent to the decision and report backends.

The templates are frozen text; rendering only substitutes the declared
placeholders and must not touch anything else, because the acceptance suite
checks the rendered output byte for byte against golden files.
"""

QUESTION_PLACEHOLDER = "{self.question}"
LANGUAGE_PLACEHOLDER = "{language}"
NODES_REPR_PLACEHOLDER = "{nodes_repr}"

DECISION_PROMPT_TEMPLATE = """You're tasked with relating the dialogue above with a specific question. The answer to the question
should be very complex and require a lot of information. If necessary, you can ask follow up questions.
You can make any of the following decisions:
- Prune: The dialogue is sufficient to answer the question, and the question is no longer relevant - should only happen if the question is answered in its fullest extent.
- Expand: The dialogue is not enough to answer the question, and follow up questions must be derived.
The decision should be made very thoughtfully, think step by step, and be as specific as possible.
**Very Important**: Make sure to ask very informative follow up questions, but Avoid making follow up questions that have already been answered in the dialogue.
When you do make follow up questions, make sure to include a few questions, which all should be very closely related to the question at hand and the dialogue at hand. These questions are meant to be used for self-anamnesis, thus should align to retrieve the most information possible about the chief complaint, in the most efficient way possible - but without asking too many questions.
The question to be considered is the following:
{self.question}"""

SUMMARY_PROMPT_TEMPLATE = """You're a master algorithm at summarizing key findings about a patient's health.
You're given a list of interactions between a nurse and a patient, which are composed by
a question and an answer, and you're asked to generate a the symptomatic summary of the patient's health.
The resulting summary should use medical terminology and be as concise as possible and should contain the most important information about the patient's health in a single small paragraph. The paragraph should be VERY short, no more than a two sentences.
The output language should be '{language}'.
The interactions are the following:
{nodes_repr}"""


def render_decision_prompt(question: str) -> str:
    """Substitute the question placeholder; everything else stays verbatim."""
    return DECISION_PROMPT_TEMPLATE.replace(QUESTION_PLACEHOLDER, question)


def render_summary_prompt(language: str, nodes_repr: str) -> str:
    """Substitute the language and interaction placeholders."""
    return SUMMARY_PROMPT_TEMPLATE.replace(
        LANGUAGE_PLACEHOLDER, language
    ).replace(NODES_REPR_PLACEHOLDER, nodes_repr)
