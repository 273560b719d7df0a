"""Command-line surface, exercised with scripted backends only."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from anamnesis.cli import main
from anamnesis.simulate import builtin_script_path


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def test_corpus_seeds_builtin(runner):
    result = runner.invoke(main, ["corpus", "seeds", "--builtin"])
    assert result.exit_code == 0, result.output
    seeds = json.loads(result.output)
    assert len(seeds) == 11
    assert seeds[5]["priority"] == "urgent"


def test_corpus_seeds_to_file(runner, tmp_path):
    out = tmp_path / "seeds.json"
    result = runner.invoke(main, ["corpus", "seeds", "--builtin", "--output", str(out)])
    assert result.exit_code == 0, result.output
    assert len(json.loads(out.read_text())["seeds"]) == 11


def test_corpus_build_offline(runner, tmp_path):
    docs = tmp_path / "docs.jsonl"
    records = []
    for i, (specialty, topic) in enumerate(
        [("cardiology", "chest pain"), ("cardiology", "palpitations"),
         ("neurology", "headache"), ("neurology", "dizziness")]
    ):
        records.append({"id": f"d{i}", "specialty": specialty, "body": f"algorithm about {topic}"})
    docs.write_text("\n".join(json.dumps(r) for r in records) + "\n")

    script = tmp_path / "script.json"
    entries = []
    for i, record in enumerate(records):
        entries.append(
            {
                "kind": "question_gen",
                "pattern": record["body"],
                "response": {
                    "questions": [
                        {
                            "question": f"Do you experience {record['body'].split('about ')[1]}?",
                            "justification": "screens the lead symptom",
                            "label": "review_of_systems",
                        },
                        {
                            "question": f"How long have you had {record['body'].split('about ')[1]}?",
                            "justification": "duration matters",
                            "label": "history_of_present_illness",
                        },
                    ]
                },
            }
        )
    script.write_text(json.dumps(entries))

    out = tmp_path / "corpus.json"
    result = runner.invoke(
        main,
        [
            "corpus", "build",
            "--input", str(docs),
            "--k1", "2", "--k2", "2",
            "--min-fraction", "0.01",
            "--seed", "7",
            "--output", str(out),
            "--backend-script", str(script),
        ],
    )
    assert result.exit_code == 0, result.output
    corpus = json.loads(out.read_text())
    assert corpus["seeds"]
    assert corpus["provenance"]["k1"] == 2
    assert corpus["clusters"]["corpus_size"] == 8


def test_simulate_and_report_render(runner, tmp_path):
    from importlib import resources

    persona_path = str(
        resources.files("anamnesis.fixtures").joinpath("personas/cooperative.json")
    )
    out_dir = tmp_path / "runs"
    result = runner.invoke(
        main,
        [
            "simulate",
            "--persona", persona_path,
            "--backend-script", str(builtin_script_path("prune_all")),
            "--out", str(out_dir),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "11 turn(s)" in result.output

    rendered = runner.invoke(
        main,
        ["report", "render", "--session", "sim-cooperative", "--logs", str(out_dir)],
    )
    assert rendered.exit_code == 0, rendered.output
    assert "MEDICAL REPORT" in rendered.output

    rendered_json = runner.invoke(
        main,
        [
            "report", "render",
            "--session", "sim-cooperative",
            "--logs", str(out_dir),
            "--format", "json",
        ],
    )
    assert rendered_json.exit_code == 0
    assert json.loads(rendered_json.output)["session_id"] == "sim-cooperative"


def test_interview_run_alias(runner, tmp_path):
    from importlib import resources

    persona_path = str(
        resources.files("anamnesis.fixtures").joinpath("personas/terse.json")
    )
    result = runner.invoke(
        main,
        [
            "interview", "run",
            "--scripted", persona_path,
            "--backend-script", str(builtin_script_path("expand_chief_complaint")),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "13 turn(s)" in result.output


def test_report_render_unknown_session(runner, tmp_path):
    result = runner.invoke(
        main, ["report", "render", "--session", "nope", "--logs", str(tmp_path)]
    )
    assert result.exit_code == 1
