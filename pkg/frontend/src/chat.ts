// Patient chat: one question on screen at a time, answers posted with the
// turn token the server issued for that question. Progress is the server's
// termination score shown verbatim.

import { ApiError } from "./api.js";
import type { InterviewApi, QuestionWire } from "./api.js";

export interface ChatViewState {
  sessionId: string | null;
  transcript: { question: string; answer: string }[];
  currentQuestion: QuestionWire | null;
  turnToken: string | null;
  progress: number;
  terminated: boolean;
  reason: string | null;
  error: string | null;
}

export class ChatView {
  state: ChatViewState = {
    sessionId: null,
    transcript: [],
    currentQuestion: null,
    turnToken: null,
    progress: 0,
    terminated: false,
    reason: null,
    error: null,
  };

  private busy = false;

  constructor(
    private root: HTMLElement,
    private api: InterviewApi,
  ) {}

  async start(): Promise<void> {
    try {
      const created = await this.api.createSession();
      this.state.sessionId = created.session_id;
      this.state.currentQuestion = created.first_question;
      this.state.turnToken = created.turn_token;
      this.state.error = null;
    } catch (err) {
      this.state.error = describe(err);
    }
    this.render();
  }

  async submit(): Promise<void> {
    const input = this.root.querySelector<HTMLInputElement>("[data-testid=answer-input]");
    if (!input) return;
    const answer = input.value.trim();
    const { sessionId, currentQuestion, turnToken } = this.state;
    if (this.busy || !answer || !sessionId || !currentQuestion || !turnToken) return;
    this.busy = true;
    try {
      const result = await this.api.submitAnswer(sessionId, answer, turnToken);
      this.state.transcript.push({ question: currentQuestion.question, answer });
      this.state.progress = result.score;
      this.state.terminated = result.terminated;
      this.state.reason = result.reason;
      this.state.currentQuestion = result.next_question;
      this.state.turnToken = result.turn_token;
      this.state.error = null;
      input.value = "";
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Stale turn token (for example after a retried request): re-sync
        // the pending question and token from the server snapshot.
        await this.resync();
      } else {
        this.state.error = describe(err);
      }
    } finally {
      this.busy = false;
    }
    this.render();
  }

  async resync(): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const snapshot = await this.api.getSnapshot(this.state.sessionId);
      this.state.currentQuestion = snapshot.current_question;
      this.state.turnToken = snapshot.turn_token;
      this.state.progress = snapshot.score;
      this.state.terminated = snapshot.status !== "active";
      this.state.reason = snapshot.termination_reason;
      this.state.error = null;
    } catch (err) {
      this.state.error = describe(err);
    }
  }

  render(): void {
    const { transcript, currentQuestion, progress, terminated, reason, error } = this.state;
    this.root.replaceChildren();

    const log = el("div", "transcript");
    log.dataset.testid = "transcript";
    for (const turn of transcript) {
      const q = el("p", "turn-question");
      q.textContent = turn.question;
      const a = el("p", "turn-answer");
      a.textContent = turn.answer;
      log.append(q, a);
    }
    this.root.appendChild(log);

    const progressWrap = el("div", "progress");
    const bar = document.createElement("progress");
    bar.max = 1;
    bar.value = progress;
    bar.dataset.testid = "progress";
    const pct = el("span", "progress-value");
    pct.dataset.testid = "progress-value";
    pct.textContent = String(progress);
    progressWrap.append(bar, pct);
    this.root.appendChild(progressWrap);

    if (error) {
      const banner = el("div", "error-banner");
      banner.dataset.testid = "error-banner";
      banner.setAttribute("role", "alert");
      banner.textContent = `Connection problem: ${error}`;
      const retry = document.createElement("button");
      retry.textContent = "Retry";
      retry.dataset.testid = "retry-button";
      retry.addEventListener("click", () => void this.retry());
      banner.appendChild(retry);
      this.root.appendChild(banner);
    }

    if (terminated) {
      const done = el("div", "completion-notice");
      done.dataset.testid = "completion-notice";
      done.setAttribute("role", "status");
      done.textContent =
        reason === "exchange_limit"
          ? "The interview has ended: the exchange limit was reached. Thank you."
          : "The interview is complete. Thank you for your answers.";
      this.root.appendChild(done);
    }

    const question = el("h2", "current-question");
    question.dataset.testid = "current-question";
    question.textContent = terminated ? "" : (currentQuestion?.question ?? "");
    this.root.appendChild(question);

    const form = el("div", "answer-row");
    const input = document.createElement("input");
    input.type = "text";
    input.dataset.testid = "answer-input";
    input.setAttribute("aria-label", "your answer");
    input.placeholder = "Type your answer and press Enter";
    input.disabled = terminated;
    input.addEventListener("keydown", (event: KeyboardEvent) => {
      if (event.key === "Enter") {
        event.preventDefault();
        void this.submit();
      }
    });
    const send = document.createElement("button");
    send.dataset.testid = "send-button";
    send.textContent = "Send";
    send.disabled = terminated;
    send.addEventListener("click", () => void this.submit());
    form.append(input, send);
    this.root.appendChild(form);

    if (!terminated) input.focus();
  }

  private async retry(): Promise<void> {
    if (this.state.sessionId === null) {
      await this.start();
      return;
    }
    await this.resync();
    this.render();
  }
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
