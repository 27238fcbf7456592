// Browser client: applies snapshot messages to the pure reducer and
// renders timeline, document, menu, and warnings. All state lives in the
// event log; the DOM is rebuilt from the reduced state on every update.

import { ConsoleEvent, ConsoleState, initialState, replay } from "./state.js";

let state: ConsoleState = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(): void {
  const timeline = el<HTMLDivElement>("timeline");
  timeline.replaceChildren(
    ...state.timeline.map((cell) => {
      const div = document.createElement("div");
      div.className = `cell ${cell.kind}`;
      div.title = `packet ${cell.index}: ${cell.kind} (${cell.confidence.toFixed(2)})`;
      return div;
    }),
  );

  el<HTMLPreElement>("document").textContent = state.document;

  const menu = el<HTMLDivElement>("menu");
  if (state.menu) {
    const list = document.createElement("ol");
    list.replaceChildren(
      ...state.menu.map((candidate) => {
        const item = document.createElement("li");
        item.textContent = candidate;
        return item;
      }),
    );
    menu.replaceChildren(list);
    menu.classList.remove("hidden");
  } else {
    menu.replaceChildren();
    menu.classList.add("hidden");
  }

  const warnings = el<HTMLUListElement>("warnings");
  warnings.replaceChildren(
    ...state.warnings.map((message) => {
      const item = document.createElement("li");
      item.textContent = message;
      return item;
    }),
  );

  const transcripts = el<HTMLUListElement>("transcripts");
  transcripts.replaceChildren(
    ...state.transcripts.map((line) => {
      const item = document.createElement("li");
      item.textContent = `[${line.channel}] ${line.text}`;
      return item;
    }),
  );
}

function connect(): void {
  const socket = new WebSocket(`ws://${location.host}/`);
  const status = el<HTMLSpanElement>("status");

  socket.onopen = () => {
    status.textContent = "connected";
  };
  socket.onmessage = (message) => {
    const parsed = JSON.parse(message.data as string) as {
      type: string;
      events?: ConsoleEvent[];
      message?: string;
    };
    if (parsed.type === "snapshot" && parsed.events) {
      state = replay(parsed.events);
      render();
    } else if (parsed.type === "error") {
      state = { ...state, warnings: [...state.warnings, `server: ${parsed.message}`] };
      render();
    }
  };
  socket.onclose = () => {
    status.textContent = "reconnecting...";
    setTimeout(connect, 1000); // resync arrives as a full snapshot
  };

  el<HTMLFormElement>("inject").onsubmit = (submit) => {
    submit.preventDefault();
    const text = el<HTMLInputElement>("text").value.trim();
    if (!text) return;
    const mode = el<HTMLSelectElement>("mode").value as "normal" | "whisper";
    const reported = el<HTMLInputElement>("reported").value.trim();
    const alternativesRaw = el<HTMLInputElement>("alternatives").value.trim();
    const step: Record<string, unknown> = { mode, text };
    if (reported) step.reported = reported;
    if (alternativesRaw) {
      step.alternatives = alternativesRaw.split("|").map((s) => s.trim());
    }
    socket.send(JSON.stringify({ type: "inject_step", step }));
    el<HTMLInputElement>("text").value = "";
  };

  el<HTMLButtonElement>("reset").onclick = () => {
    socket.send(JSON.stringify({ type: "reset" }));
  };
}

connect();
