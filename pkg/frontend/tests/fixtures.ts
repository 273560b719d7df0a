// Scripted stand-in for the interview service, mirroring its wire formats.
// The fixtures play a fixed question sequence so tests are deterministic.

import type {
  AnswerResponse,
  CreateSessionResponse,
  GraphWire,
  InterviewApi,
  QuestionWire,
  ReportWire,
  SnapshotResponse,
} from "../src/api.js";
import { ApiError } from "../src/api.js";

export interface ScriptedTurn {
  question: QuestionWire;
  scoreAfter: number;
}

export const FIXTURE_GRAPH: GraphWire = {
  nodes: [
    {
      id: "q0",
      question: "What is the primary health issue today?",
      priority: "urgent",
      state: "explore",
      label: "chief_complaint",
      answer: "a headache",
      insertion_index: 0,
    },
    {
      id: "q1",
      question: "Are you currently taking any medications?",
      priority: "high",
      state: "closed",
      label: "medications",
      answer: "lisinopril",
      insertion_index: 1,
    },
    {
      id: "q2",
      question: "How long has the headache lasted?",
      priority: "high",
      state: "open",
      label: "chief_complaint",
      insertion_index: 2,
    },
  ],
  edges: [{ parent: "q0", child: "q2" }],
};

export const FIXTURE_REPORT: ReportWire = {
  session_id: "fixture-session",
  generated_at: "2026-01-01T00:00:00+00:00",
  language: "en",
  summary: "The patient reports controlled hypertension with no recent health changes or allergies.",
  sections: [
    {
      label: "chief_complaint",
      avg_priority: 2.5,
      node_count: 2,
      facts: [
        "Headache began yesterday morning",
        "Detail gathering ongoing (follow-up pending)",
      ],
    },
    {
      label: "medications",
      avg_priority: 2.0,
      node_count: 1,
      facts: ["Patient takes lisinopril for hypertension"],
    },
    {
      label: "social_history",
      avg_priority: 0.0,
      node_count: 1,
      facts: ["No alcohol or recreational drug use"],
    },
  ],
};

function question(id: string, text: string): QuestionWire {
  return { node_id: id, question: text, priority: "high", label: "chief_complaint" };
}

export class ScriptedApi implements InterviewApi {
  answers: string[] = [];
  tokensSeen: string[] = [];
  private turnIndex = 0;
  private token = "t0";

  constructor(
    private turns: ScriptedTurn[] = [
      { question: question("q0", "What is the primary health issue today?"), scoreAfter: 0.25 },
      { question: question("q1", "Are you currently taking any medications?"), scoreAfter: 0.5 },
      { question: question("q2", "Any known allergies?"), scoreAfter: 0.75 },
      { question: question("q3", "Do you consume alcohol?"), scoreAfter: 1.0 },
    ],
  ) {}

  async createSession(): Promise<CreateSessionResponse> {
    return {
      session_id: "fixture-session",
      first_question: this.turns[0].question,
      turn_token: this.token,
    };
  }

  async submitAnswer(
    _sessionId: string,
    answer: string,
    turnToken: string,
  ): Promise<AnswerResponse> {
    if (turnToken !== this.token) {
      throw new ApiError(409, "StaleTurnToken", "token does not match the pending question");
    }
    this.tokensSeen.push(turnToken);
    this.answers.push(answer);
    const finished = this.turnIndex + 1 >= this.turns.length;
    const score = this.turns[this.turnIndex].scoreAfter;
    this.turnIndex += 1;
    this.token = `t${this.turnIndex}`;
    return {
      next_question: finished ? null : this.turns[this.turnIndex].question,
      turn_token: finished ? null : this.token,
      terminated: finished,
      score,
      reason: finished ? "score_met" : null,
    };
  }

  async getSnapshot(_sessionId: string): Promise<SnapshotResponse> {
    const finished = this.turnIndex >= this.turns.length;
    return {
      session_id: "fixture-session",
      status: finished ? "terminated" : "active",
      score: this.turnIndex ? this.turns[this.turnIndex - 1].scoreAfter : 0,
      exchanges_used: this.turnIndex,
      termination_reason: finished ? "score_met" : null,
      current_question: finished ? null : this.turns[this.turnIndex].question,
      turn_token: finished ? null : this.token,
      graph: FIXTURE_GRAPH,
    };
  }

  async getReport(_sessionId: string): Promise<ReportWire> {
    return structuredClone(FIXTURE_REPORT);
  }
}

export function pressEnter(input: HTMLInputElement): void {
  input.dispatchEvent(
    new KeyboardEvent("keydown", { key: "Enter", bubbles: true, cancelable: true }),
  );
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
