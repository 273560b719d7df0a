// Typed client for the interview service HTTP API. The UI consumes these
// payloads verbatim: no score, ordering or state is ever recomputed here.

export interface QuestionWire {
  node_id: string;
  question: string;
  priority: string;
  label: string;
}

export interface CreateSessionResponse {
  session_id: string;
  first_question: QuestionWire;
  turn_token: string;
}

export interface AnswerResponse {
  next_question: QuestionWire | null;
  turn_token: string | null;
  terminated: boolean;
  score: number;
  reason: string | null;
}

export interface NodeWire {
  id: string;
  question: string;
  priority: string;
  state: string;
  label: string;
  answer?: string;
  insertion_index: number;
}

export interface EdgeWire {
  parent: string;
  child: string;
}

export interface GraphWire {
  nodes: NodeWire[];
  edges: EdgeWire[];
}

export interface SnapshotResponse {
  session_id: string;
  status: string;
  score: number;
  exchanges_used: number;
  termination_reason: string | null;
  current_question: QuestionWire | null;
  turn_token: string | null;
  graph: GraphWire;
}

export interface SectionWire {
  label: string;
  avg_priority: number;
  node_count: number;
  facts: string[];
}

export interface ReportWire {
  session_id: string;
  generated_at: string;
  language: string;
  patient_gender?: string;
  summary: string;
  sections: SectionWire[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface InterviewApi {
  createSession(language?: string, gender?: string): Promise<CreateSessionResponse>;
  submitAnswer(sessionId: string, answer: string, turnToken: string): Promise<AnswerResponse>;
  getSnapshot(sessionId: string): Promise<SnapshotResponse>;
  getReport(sessionId: string): Promise<ReportWire>;
}

export class ApiClient implements InterviewApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, {
        headers: { "content-type": "application/json" },
        ...init,
      });
    } catch (err) {
      throw new ApiError(0, "NetworkError", String(err));
    }
    if (!response.ok) {
      let code = "HttpError";
      let detail = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { error?: string; detail?: string };
        code = body.error ?? code;
        detail = body.detail ?? detail;
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }

  createSession(language = "en", gender?: string): Promise<CreateSessionResponse> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ language, gender: gender ?? null }),
    });
  }

  submitAnswer(sessionId: string, answer: string, turnToken: string): Promise<AnswerResponse> {
    return this.request(`/sessions/${sessionId}/answers`, {
      method: "POST",
      body: JSON.stringify({ answer, turn_token: turnToken }),
    });
  }

  getSnapshot(sessionId: string): Promise<SnapshotResponse> {
    return this.request(`/sessions/${sessionId}/snapshot`);
  }

  getReport(sessionId: string): Promise<ReportWire> {
    return this.request(`/sessions/${sessionId}/report`);
  }
}
