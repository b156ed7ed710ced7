// In-memory stand-in for the real service, faithful to the wire contract:
// key-wrapped envelopes, error envelopes with codes, knob ranges that
// re-derive (and so ratchet) after a patch.

import type { FetchLike, FetchResult, Knob, Session } from "../src/api.js";

const SKETCH_TEMPLATE = `void setup() {
  pinMode(LED_BUILTIN, OUTPUT);
}

const int BLINK_MS = 500;
const float GAIN = 2.5;

void loop() {
  digitalWrite(LED_BUILTIN, HIGH);
  delay(BLINK_MS);
  digitalWrite(LED_BUILTIN, LOW);
  delay(BLINK_MS);
}
`;

const CATALOG = {
  modules: [
    { id: "DeneyapG", name: "Deneyap G", part: "Deneyap G", kind: "main", attachment: "onboard", summary: "dev board", library_hint: null },
    { id: "S5", name: "Gesture sensor", part: "APDS-9960", kind: "sensor", attachment: "i2c-chain", summary: "gesture", library_hint: null },
    { id: "A1", name: "Buzzer", part: "MLT-8530", kind: "actuator", attachment: "onboard", summary: "buzzer", library_hint: null },
    { id: "P1", name: "Battery pack", part: "2xAA", kind: "power", attachment: "power-rail", summary: "power", library_hint: null },
  ],
};

interface LoggedCall {
  method: string;
  path: string;
  body: unknown;
}

function extractKnobs(source: string): Knob[] {
  const knobs: Knob[] = [];
  const re = /^const (int|float) ([A-Za-z_]\w*) = ([0-9][\w.]*);/gm;
  for (const m of source.matchAll(re)) {
    const kind = m[1]!;
    const name = m[2]!;
    const text = m[3]!;
    const value = Number(text);
    const hi = value > 0 ? 2 * value : value < 0 ? 0 : 1;
    const lo = value > 0 ? 0 : value < 0 ? 2 * value : -1;
    const step = kind === "int" ? 1 : Math.max(Math.abs(value) / 100, 0.01);
    const start = m.index! + m[0]!.indexOf(text, m[0]!.indexOf("="));
    knobs.push({
      id: name,
      name,
      value,
      text,
      form: "const",
      span: [start, start + text.length],
      suggested_min: lo,
      suggested_max: hi,
      suggested_step: step,
    });
  }
  return knobs;
}

export class MockService {
  log: LoggedCall[] = [];
  gate: Promise<void> | null = null;
  failNext: { status: number; code: string; message: string } | null = null;

  private session: Session | null = null;
  private versionCounter = 0;

  readonly sessionId = "mockses12345";

  compileRaw = "Mock compile of v1 finished.\nSketch uses 924 bytes (3%) of program storage space.";
  uploadRaw = "Upload to MOCK0 complete.\nVerified 924 bytes.";

  calls(method: string, pathFragment: string): number {
    return this.log.filter((c) => c.method === method && c.path.includes(pathFragment)).length;
  }

  fetch: FetchLike = async (url, init) => {
    const method = (init?.method ?? "GET").toUpperCase();
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.log.push({ method, path, body });
    if (this.gate) await this.gate;
    if (this.failNext) {
      const f = this.failNext;
      this.failNext = null;
      return reply(f.status, { error: { code: f.code, message: f.message } });
    }
    return this.route(method, path, body);
  };

  private route(method: string, path: string, body: any): FetchResult {
    if (method === "GET" && path === "/api/catalog") return reply(200, { catalog: CATALOG });
    if (method === "GET" && path === "/api/ports") {
      return reply(200, { ports: [{ port: "MOCK0", hint: "Mock Board" }] });
    }
    if (method === "POST" && path === "/api/sessions") {
      const manifest = body.manifest;
      if (manifest.board !== "DeneyapG") {
        return reply(400, {
          error: {
            code: "invalid-manifest",
            message: "manifest failed validation",
            findings: [{ severity: "error", code: "unknown-board", message: `unknown board ${manifest.board}` }],
          },
        });
      }
      this.session = {
        id: this.sessionId,
        manifest,
        conversation: [],
        loop: { status: "idle", iteration: 0 },
        sketch: null,
        knobs: null,
        versions: [],
        selected_port: null,
        last_compile: null,
        last_upload: null,
      };
      return reply(201, { session: this.session });
    }

    const m = /^\/api\/sessions\/([^/]+)(?:\/(.*))?$/.exec(path);
    if (!m) return reply(404, { error: { code: "not-found", message: `no route ${path}` } });
    const [, id, rest] = m;
    if (!this.session || id !== this.session.id) {
      return reply(404, { error: { code: "not-found", message: `no session ${id}` } });
    }
    const s = this.session;

    if (method === "GET" && !rest) return reply(200, { session: s });
    if (method === "GET" && rest === "replay") return reply(200, { session: s, matches_live: true });
    if (method === "GET" && rest === "knobs") {
      if (!s.knobs) return reply(409, { error: { code: "conflict", message: "no sketch yet" } });
      return reply(200, { knobs: s.knobs });
    }

    if (method === "POST" && rest === "message") {
      const text = String(body.text);
      this.versionCounter += 1;
      const version = `v${this.versionCounter}`;
      const grounding: { role: string; content: string }[] =
        s.conversation.length === 0
          ? [{ role: "system", content: "You are an expert Arduino programmer." }]
          : [];
      s.conversation = [
        ...s.conversation,
        ...grounding,
        { role: "user", content: text },
        { role: "assistant", content: "```cpp\n" + SKETCH_TEMPLATE + "```" },
      ];
      s.sketch = { version, source: SKETCH_TEMPLATE, method: "fenced", findings: [] };
      s.knobs = { sketch_version: version, knobs: extractKnobs(SKETCH_TEMPLATE) };
      s.versions = [...s.versions, version];
      s.loop = { status: "extracted", iteration: s.loop.iteration + 1 };
      return reply(200, { session: s });
    }

    if (method === "POST" && rest === "compile") {
      if (!s.sketch) return reply(409, { error: { code: "conflict", message: "nothing to compile" } });
      s.last_compile = { success: true, diagnostics: [], raw_output: this.compileRaw, artifact_path: "/tmp/out.bin" };
      s.loop = { ...s.loop, status: "succeeded" };
      return reply(200, { session: s });
    }

    if (method === "POST" && (rest === "upload" || rest === "compile-upload")) {
      if (!s.sketch) return reply(409, { error: { code: "conflict", message: "nothing to upload" } });
      if (rest === "compile-upload") {
        s.last_compile = { success: true, diagnostics: [], raw_output: this.compileRaw, artifact_path: "/tmp/out.bin" };
        s.loop = { ...s.loop, status: "succeeded" };
      }
      const port = String(body.port);
      const ok = port === "MOCK0";
      s.last_upload = { success: ok, port, raw_output: ok ? this.uploadRaw : `no device on ${port}` };
      if (ok) s.selected_port = port;
      return reply(200, { session: s });
    }

    const knobMatch = /^knobs\/(.+)$/.exec(rest ?? "");
    if (method === "PATCH" && knobMatch) {
      const knobId = decodeURIComponent(knobMatch[1]!);
      if (!s.sketch || !s.knobs) return reply(409, { error: { code: "conflict", message: "no sketch yet" } });
      const knob = s.knobs.knobs.find((k) => k.id === knobId);
      if (!knob) return reply(404, { error: { code: "unknown-knob", message: `no knob ${knobId}` } });
      const value = Number(body.value);
      const width = knob.suggested_max - knob.suggested_min;
      if (value < knob.suggested_min - width || value > knob.suggested_max + width) {
        return reply(400, { error: { code: "knob-value", message: `${value} outside widened range` } });
      }
      if (knob.form === "const" && Number.isInteger(knob.value) && !Number.isInteger(value)) {
        return reply(400, { error: { code: "knob-value", message: "integer knob needs an integral value" } });
      }
      const text = Number.isInteger(knob.value) ? String(value) : value.toFixed(3).replace(/0+$/, "").replace(/\.$/, ".0");
      const src = s.sketch.source;
      const patched = src.slice(0, knob.span[0]) + text + src.slice(knob.span[1]);
      this.versionCounter += 1;
      const version = `v${this.versionCounter}`;
      s.sketch = { version, source: patched, method: "patched", findings: [] };
      s.knobs = { sketch_version: version, knobs: extractKnobs(patched) };
      s.versions = [...s.versions, version];
      s.loop = { ...s.loop, status: "extracted" };
      return reply(200, { session: s });
    }

    return reply(404, { error: { code: "not-found", message: `no route ${method} ${path}` } });
  }
}

function reply(status: number, body: unknown): FetchResult {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => structuredClone(body),
  };
}
