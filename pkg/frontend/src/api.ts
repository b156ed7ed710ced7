// Typed client for the sketchpilot HTTP API. Every method is one request;
// there are no retries here, so one user action stays one API call.

export interface Manifest {
  board: string;
  chain: string[];
  onboard_used: string[];
  power: string | null;
  freeform_note: string | null;
}

export interface Message {
  role: string;
  content: string;
}

export interface Finding {
  severity: string;
  code: string;
  message: string;
}

export interface LoopInfo {
  status: string;
  iteration: number;
}

export interface Sketch {
  version: string;
  source: string;
  method: string;
  findings: Finding[];
}

export interface Diagnostic {
  file: string;
  line: number;
  column: number | null;
  severity: string;
  message: string;
}

export interface CompileInfo {
  success: boolean;
  diagnostics: Diagnostic[];
  raw_output: string;
  artifact_path: string | null;
}

export interface UploadInfo {
  success: boolean;
  port: string;
  raw_output: string;
}

export interface Knob {
  id: string;
  name: string;
  value: number;
  text: string;
  form: string;
  span: [number, number];
  suggested_min: number;
  suggested_max: number;
  suggested_step: number;
}

export interface KnobSet {
  sketch_version: string;
  knobs: Knob[];
}

export interface Session {
  id: string;
  manifest: Manifest;
  conversation: Message[];
  loop: LoopInfo;
  sketch: Sketch | null;
  knobs: KnobSet | null;
  versions: string[];
  selected_port: string | null;
  last_compile: CompileInfo | null;
  last_upload: UploadInfo | null;
}

export interface PortInfo {
  port: string;
  hint: string | null;
}

export interface CatalogModule {
  id: string;
  name: string;
  part: string;
  kind: string;
  attachment: string;
  summary: string;
  library_hint: string | null;
}

export interface Catalog {
  modules: CatalogModule[];
}

export interface ReplayReport {
  session: Session;
  matches_live: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
    public readonly findings: Finding[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

// Narrow view of fetch so tests can hand in a plain object instead of a
// Response; only ok/status/json are ever touched.
export interface FetchResult {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<FetchResult>;

interface ErrorBody {
  error?: { code?: string; message?: string; findings?: Finding[] };
  detail?: unknown;
}

export class Api {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { accept: "application/json" } };
    if (body !== undefined) {
      init.headers = { ...init.headers, "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let res: FetchResult;
    try {
      res = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError("unreachable", `cannot reach service: ${String(err)}`, 0);
    }
    let payload: unknown = null;
    try {
      payload = await res.json();
    } catch {
      payload = null;
    }
    if (!res.ok) {
      const parsed = (payload ?? {}) as ErrorBody;
      const code = parsed.error?.code ?? "http-error";
      const message = parsed.error?.message ?? (parsed.detail ? JSON.stringify(parsed.detail) : `HTTP ${res.status}`);
      throw new ApiError(code, message, res.status, parsed.error?.findings ?? []);
    }
    if (payload === null) {
      throw new ApiError("bad-payload", "service returned a non-JSON body", res.status);
    }
    return payload as T;
  }

  async createSession(manifest: Manifest): Promise<Session> {
    const body = await this.request<{ session: Session }>("POST", "/api/sessions", { manifest });
    return body.session;
  }

  async getSession(id: string): Promise<Session> {
    const body = await this.request<{ session: Session }>("GET", `/api/sessions/${id}`);
    return body.session;
  }

  async sendMessage(id: string, text: string): Promise<Session> {
    const body = await this.request<{ session: Session }>("POST", `/api/sessions/${id}/message`, { text });
    return body.session;
  }

  async compile(id: string): Promise<Session> {
    const body = await this.request<{ session: Session }>("POST", `/api/sessions/${id}/compile`);
    return body.session;
  }

  async upload(id: string, port: string): Promise<Session> {
    const body = await this.request<{ session: Session }>("POST", `/api/sessions/${id}/upload`, { port });
    return body.session;
  }

  async compileUpload(id: string, port: string): Promise<Session> {
    const body = await this.request<{ session: Session }>("POST", `/api/sessions/${id}/compile-upload`, { port });
    return body.session;
  }

  async getKnobs(id: string): Promise<KnobSet> {
    const body = await this.request<{ knobs: KnobSet }>("GET", `/api/sessions/${id}/knobs`);
    return body.knobs;
  }

  async patchKnob(id: string, knobId: string, value: number): Promise<Session> {
    const body = await this.request<{ session: Session }>(
      "PATCH",
      `/api/sessions/${id}/knobs/${encodeURIComponent(knobId)}`,
      { value },
    );
    return body.session;
  }

  async getPorts(): Promise<PortInfo[]> {
    const body = await this.request<{ ports: PortInfo[] }>("GET", "/api/ports");
    return body.ports;
  }

  async getCatalog(): Promise<Catalog> {
    const body = await this.request<{ catalog: Catalog }>("GET", "/api/catalog");
    return body.catalog;
  }

  async replay(id: string): Promise<ReplayReport> {
    return this.request<ReplayReport>("GET", `/api/sessions/${id}/replay`);
  }
}
