// Typed client for the session service. The UI never transforms programs
// itself; every program state it shows came from these endpoints.

export interface ErrorMarker {
  kind: string;
  property: string;
  line: number;
  col: number;
}

export interface ProgramView {
  text: string;
  anchors: Record<string, number>;
  errors: ErrorMarker[];
}

export interface TacticInfo {
  name: string;
  arity: number;
  formals: string[];
  doc: string;
}

export interface ApplyResponse {
  ok: boolean;
  program?: string;
  anchors?: Record<string, number>;
  errors?: ErrorMarker[];
  guard?: string;
  diff?: string;
  failure?: string;
  status?: string;
}

export interface HistoryEntry {
  index: number;
  invocation: string | null;
  guard: string;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && body.detail) detail = String(body.detail);
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class Client {
  constructor(private base: string) {}

  createSession(program: string, fixture: string): Promise<{ id: string }> {
    return request(this.base, "/sessions", {
      method: "POST",
      body: JSON.stringify({ program, fixture }),
    });
  }

  getProgram(id: string): Promise<ProgramView> {
    return request(this.base, `/sessions/${id}/program`);
  }

  apply(id: string, invocation: string): Promise<ApplyResponse> {
    return request(this.base, `/sessions/${id}/apply`, {
      method: "POST",
      body: JSON.stringify({ invocation }),
    });
  }

  undo(id: string): Promise<ApplyResponse> {
    return request(this.base, `/sessions/${id}/undo`, { method: "POST" });
  }

  history(id: string): Promise<HistoryEntry[]> {
    return request(this.base, `/sessions/${id}/history`);
  }

  stdlib(): Promise<TacticInfo[]> {
    return request(this.base, "/stdlib");
  }
}
