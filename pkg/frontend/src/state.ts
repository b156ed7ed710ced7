// Pure view-state module. The page keeps exactly one ViewState and every
// render is a function of it, so a reload plus refetch reproduces the view.

import type { Knob, Message, PortInfo, Session } from "./api.js";

export interface ViewState {
  sessionId: string | null;
  messages: Message[];
  code: string | null;
  codeVersion: string | null;
  status: string;
  iteration: number;
  ports: PortInfo[];
  selectedPort: string | null;
  lastOutput: string;
  knobs: Knob[];
  busy: boolean;
  // true right after a knob patch: the change is source-only until the user
  // explicitly recompiles and uploads
  offerRecompile: boolean;
}

export function initialView(): ViewState {
  return {
    sessionId: null,
    messages: [],
    code: null,
    codeVersion: null,
    status: "idle",
    iteration: 0,
    ports: [],
    selectedPort: null,
    lastOutput: "",
    knobs: [],
    busy: false,
    offerRecompile: false,
  };
}

export function codePanelActive(view: ViewState): boolean {
  return view.code !== null;
}

/** Conversation turns worth showing; the system grounding stays internal. */
export function visibleMessages(session: Session): Message[] {
  return session.conversation.filter((m) => m.role !== "system");
}

/**
 * Console text derived from the session alone. Compile output first, then
 * upload output, each verbatim; derivation (rather than accumulation) keeps
 * the view reproducible from a refetch.
 */
export function consoleText(session: Session): string {
  const parts: string[] = [];
  if (session.last_compile) parts.push(session.last_compile.raw_output);
  if (session.last_upload) parts.push(session.last_upload.raw_output);
  return parts.join("\n");
}

function pickPort(view: ViewState, session: Session, ports: PortInfo[]): string | null {
  if (session.selected_port) return session.selected_port;
  if (view.selectedPort && ports.some((p) => p.port === view.selectedPort)) {
    return view.selectedPort;
  }
  return ports.length > 0 ? ports[0]!.port : null;
}

/** Fold a fresh session payload into the view. Pure; busy is left alone. */
export function applySession(view: ViewState, session: Session): ViewState {
  return {
    ...view,
    sessionId: session.id,
    messages: visibleMessages(session),
    code: session.sketch ? session.sketch.source : null,
    codeVersion: session.sketch ? session.sketch.version : null,
    status: session.loop.status,
    iteration: session.loop.iteration,
    selectedPort: pickPort(view, session, view.ports),
    lastOutput: consoleText(session),
    knobs: session.knobs ? session.knobs.knobs : [],
    offerRecompile: false,
  };
}

export function applyPorts(view: ViewState, ports: PortInfo[]): ViewState {
  const selected =
    view.selectedPort && ports.some((p) => p.port === view.selectedPort)
      ? view.selectedPort
      : ports.length > 0
        ? ports[0]!.port
        : null;
  return { ...view, ports, selectedPort: selected };
}

export function withBusy(view: ViewState, busy: boolean): ViewState {
  return { ...view, busy };
}

export function withPortChoice(view: ViewState, port: string): ViewState {
  return { ...view, selectedPort: port };
}

export function withRecompileOffer(view: ViewState): ViewState {
  return { ...view, offerRecompile: true };
}

/** Failures land in the console so nothing is dropped silently. */
export function withErrorLine(view: ViewState, code: string, message: string): ViewState {
  const line = `error: ${code}: ${message}`;
  const lastOutput = view.lastOutput ? `${view.lastOutput}\n${line}` : line;
  return { ...view, lastOutput };
}
