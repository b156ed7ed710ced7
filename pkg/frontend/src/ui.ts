// DOM wiring for the panel. One ViewState drives every render; handlers do
// one API call each and funnel through run() so mutations never overlap.

import { Api, ApiError } from "./api.js";
import type { Catalog, Manifest, Session } from "./api.js";
import {
  applyPorts,
  applySession,
  codePanelActive,
  initialView,
  withBusy,
  withErrorLine,
  withPortChoice,
  withRecompileOffer,
  type ViewState,
} from "./state.js";

export interface Controller {
  view(): ViewState;
  /** Resolves once the current action (if any) has settled. */
  idle(): Promise<void>;
  refresh(): Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function sessionIdFromHash(hash: string): string | null {
  const m = /^#s=([A-Za-z0-9]+)$/.exec(hash);
  return m ? m[1]! : null;
}

export async function renderAndBind(root: HTMLElement, api: Api): Promise<Controller> {
  const doc = root.ownerDocument;
  let current = initialView();
  let catalog: Catalog | null = null;
  let inflight: Promise<void> = Promise.resolve();

  // --- skeleton -----------------------------------------------------------
  root.textContent = "";

  const setupPanel = el(doc, "section", { id: "setup-panel" });
  setupPanel.append(el(doc, "h2", {}, "Hardware"));
  const boardSelect = el(doc, "select", { id: "setup-board" });
  const chainBox = el(doc, "div", { id: "setup-chain" });
  const onboardBox = el(doc, "div", { id: "setup-onboard" });
  const powerSelect = el(doc, "select", { id: "setup-power" });
  const noteInput = el(doc, "input", { id: "setup-note", placeholder: "optional wiring note" });
  const startBtn = el(doc, "button", { id: "setup-start" }, "Start session");
  setupPanel.append(
    labeled(doc, "Board", boardSelect),
    labeled(doc, "I2C chain", chainBox),
    labeled(doc, "Onboard peripherals", onboardBox),
    labeled(doc, "Power", powerSelect),
    labeled(doc, "Note", noteInput),
    startBtn,
  );

  const chatPanel = el(doc, "section", { id: "chat-panel" });
  chatPanel.append(el(doc, "h2", {}, "Chat"));
  const chatLog = el(doc, "div", { id: "chat-log" });
  const chatInput = el(doc, "input", { id: "chat-input", placeholder: "describe the behavior you want" });
  const chatSend = el(doc, "button", { id: "chat-send" }, "Send");
  const chatRow = el(doc, "div", { class: "row" });
  chatRow.append(chatInput, chatSend);
  chatPanel.append(chatLog, chatRow);

  const codePanel = el(doc, "section", { id: "code-panel", hidden: "" });
  codePanel.append(el(doc, "h2", {}, "Sketch"));
  const statusLine = el(doc, "div", { id: "status-line" });
  const codeView = el(doc, "pre", { id: "code-view" });
  const knobList = el(doc, "div", { id: "knob-list" });
  const portSelect = el(doc, "select", { id: "port-select" });
  const portsBtn = el(doc, "button", { id: "btn-ports" }, "Rescan ports");
  const compileBtn = el(doc, "button", { id: "btn-compile" }, "Compile");
  const uploadBtn = el(doc, "button", { id: "btn-upload" }, "Upload");
  const bothBtn = el(doc, "button", { id: "btn-both" }, "Compile & Upload");
  const offerBtn = el(doc, "button", { id: "recompile-offer", hidden: "" }, "Recompile & Upload");
  const buttonRow = el(doc, "div", { class: "row" });
  buttonRow.append(portSelect, portsBtn, compileBtn, uploadBtn, bothBtn, offerBtn);
  codePanel.append(statusLine, codeView, el(doc, "h3", {}, "Knobs"), knobList, buttonRow);

  const consolePanel = el(doc, "section", { id: "console-panel" });
  consolePanel.append(el(doc, "h2", {}, "Output"));
  const consoleView = el(doc, "pre", { id: "console" });
  consolePanel.append(consoleView);

  root.append(setupPanel, chatPanel, codePanel, consolePanel);

  function labeled(d: Document, caption: string, control: HTMLElement): HTMLElement {
    const wrap = el(d, "div", { class: "field" });
    wrap.append(el(d, "label", {}, caption), control);
    return wrap;
  }

  // --- rendering ----------------------------------------------------------
  function renderSetup(): void {
    if (!catalog) return;
    boardSelect.textContent = "";
    for (const m of catalog.modules.filter((m) => m.kind === "main")) {
      boardSelect.append(el(doc, "option", { value: m.id }, `${m.name} (${m.part})`));
    }
    chainBox.textContent = "";
    for (const m of catalog.modules.filter((m) => m.attachment === "i2c-chain")) {
      const row = el(doc, "label", { class: "check" });
      row.append(el(doc, "input", { type: "checkbox", value: m.id, "data-chain": m.id }), doc.createTextNode(` ${m.name} (${m.id})`));
      chainBox.append(row);
    }
    onboardBox.textContent = "";
    for (const m of catalog.modules.filter((m) => m.attachment === "onboard" && m.kind !== "main")) {
      const row = el(doc, "label", { class: "check" });
      row.append(el(doc, "input", { type: "checkbox", value: m.id, "data-onboard": m.id }), doc.createTextNode(` ${m.name} (${m.id})`));
      onboardBox.append(row);
    }
    powerSelect.textContent = "";
    powerSelect.append(el(doc, "option", { value: "" }, "none"));
    for (const m of catalog.modules.filter((m) => m.kind === "power")) {
      powerSelect.append(el(doc, "option", { value: m.id }, `${m.name} (${m.id})`));
    }
  }

  function render(): void {
    const active = codePanelActive(current);
    setupPanel.hidden = current.sessionId !== null;
    codePanel.hidden = !active;

    chatLog.textContent = "";
    for (const m of current.messages) {
      const row = el(doc, "div", { class: `msg msg-${m.role}` });
      row.append(el(doc, "span", { class: "who" }, `${m.role}: `), doc.createTextNode(m.content));
      chatLog.append(row);
    }

    statusLine.textContent = current.sessionId
      ? `session ${current.sessionId} · status: ${current.status} · iteration ${current.iteration}` +
        (current.codeVersion ? ` · ${current.codeVersion}` : "")
      : "";
    codeView.textContent = current.code ?? "";
    consoleView.textContent = current.lastOutput;

    portSelect.textContent = "";
    for (const p of current.ports) {
      const label = p.hint ? `${p.port} (${p.hint})` : p.port;
      portSelect.append(el(doc, "option", { value: p.port }, label));
    }
    if (current.selectedPort) portSelect.value = current.selectedPort;

    knobList.textContent = "";
    for (const k of current.knobs) {
      const row = el(doc, "div", { class: "knob", "data-knob-row": k.id });
      const slider = el(doc, "input", {
        type: "range",
        class: "knob-slider",
        "data-knob-id": k.id,
        min: String(k.suggested_min),
        max: String(k.suggested_max),
        step: String(k.suggested_step),
        value: String(k.value),
      });
      slider.disabled = current.busy;
      slider.addEventListener("change", () => {
        void run(async () => {
          const session = await api.patchKnob(current.sessionId!, k.id, Number(slider.value));
          current = withRecompileOffer(applySession(current, session));
        });
      });
      row.append(
        el(doc, "span", { class: "knob-name" }, k.name),
        slider,
        el(doc, "span", { class: "knob-value" }, String(k.value)),
      );
      knobList.append(row);
    }

    offerBtn.hidden = !current.offerRecompile;
    const lockable: (HTMLButtonElement | HTMLInputElement | HTMLSelectElement)[] = [
      startBtn, chatSend, chatInput, compileBtn, uploadBtn, bothBtn, offerBtn, portSelect, portsBtn,
    ];
    for (const node of lockable) node.disabled = current.busy;
    chatSend.disabled = current.busy || current.sessionId === null;
    chatInput.disabled = current.busy || current.sessionId === null;
    const needPort = current.selectedPort === null;
    uploadBtn.disabled = current.busy || needPort;
    bothBtn.disabled = current.busy || needPort;
    offerBtn.disabled = current.busy || needPort;
  }

  // --- actions ------------------------------------------------------------
  function run(action: () => Promise<void>): Promise<void> {
    if (current.busy) return inflight;
    current = withBusy(current, true);
    render();
    inflight = action()
      .catch((err) => {
        const e = err instanceof ApiError ? err : new ApiError("client-error", String(err), 0);
        current = withErrorLine(current, e.code, e.message);
      })
      .then(() => {
        current = withBusy(current, false);
        render();
      });
    return inflight;
  }

  function manifestFromForm(): Manifest {
    const chain = Array.from(chainBox.querySelectorAll<HTMLInputElement>("input[data-chain]"))
      .filter((c) => c.checked)
      .map((c) => c.value);
    const onboard = Array.from(onboardBox.querySelectorAll<HTMLInputElement>("input[data-onboard]"))
      .filter((c) => c.checked)
      .map((c) => c.value);
    return {
      board: boardSelect.value,
      chain,
      onboard_used: onboard,
      power: powerSelect.value || null,
      freeform_note: noteInput.value || null,
    };
  }

  function adopt(session: Session): void {
    current = applySession(current, session);
    const win = doc.defaultView;
    if (win) win.location.hash = `s=${session.id}`;
  }

  startBtn.addEventListener("click", () => {
    void run(async () => {
      adopt(await api.createSession(manifestFromForm()));
    });
  });

  chatSend.addEventListener("click", () => {
    const text = chatInput.value.trim();
    if (!text || current.sessionId === null) return;
    void run(async () => {
      const session = await api.sendMessage(current.sessionId!, text);
      current = applySession(current, session);
      chatInput.value = "";
    });
  });

  compileBtn.addEventListener("click", () => {
    void run(async () => {
      current = applySession(current, await api.compile(current.sessionId!));
    });
  });

  uploadBtn.addEventListener("click", () => {
    void run(async () => {
      current = applySession(current, await api.upload(current.sessionId!, current.selectedPort!));
    });
  });

  const compileUpload = () => {
    void run(async () => {
      current = applySession(current, await api.compileUpload(current.sessionId!, current.selectedPort!));
    });
  };
  bothBtn.addEventListener("click", compileUpload);
  offerBtn.addEventListener("click", compileUpload);

  portsBtn.addEventListener("click", () => {
    void run(async () => {
      current = applyPorts(current, await api.getPorts());
    });
  });

  portSelect.addEventListener("change", () => {
    current = withPortChoice(current, portSelect.value);
    render();
  });

  // --- boot ---------------------------------------------------------------
  async function refresh(): Promise<void> {
    if (current.sessionId === null) return;
    const session = await api.getSession(current.sessionId);
    current = applySession(current, session);
    render();
  }

  try {
    catalog = await api.getCatalog();
    renderSetup();
    current = applyPorts(current, await api.getPorts());
    const win = doc.defaultView;
    const fromHash = win ? sessionIdFromHash(win.location.hash) : null;
    if (fromHash) {
      current = applySession(current, await api.getSession(fromHash));
    }
  } catch (err) {
    const e = err instanceof ApiError ? err : new ApiError("client-error", String(err), 0);
    current = withErrorLine(current, e.code, e.message);
  }
  render();

  return {
    view: () => current,
    idle: () => inflight,
    refresh,
  };
}
