// Pure console state: a fold over the engine's event log.
//
// Rendering is a function of this state only, so replaying a recorded log
// always reproduces the same document, timeline, and menu. Events carry a
// strictly increasing `seq`; applying them out of order is an error.

export interface ConsoleEvent {
  seq: number;
  kind: "label" | "transcript" | "editor_state" | "menu" | "warning";
  payload: Record<string, unknown>;
}

export interface TimelineCell {
  index: number;
  kind: string; // normal | whisper | silence
  confidence: number;
}

export interface TranscriptLine {
  channel: string;
  text: string;
  alternatives: string[];
}

export interface ConsoleState {
  document: string;
  timeline: TimelineCell[];
  transcripts: TranscriptLine[];
  menu: string[] | null; // candidate list while the menu is open
  warnings: string[];
  lastSeq: number;
}

export function initialState(): ConsoleState {
  return {
    document: "",
    timeline: [],
    transcripts: [],
    menu: null,
    warnings: [],
    lastSeq: 0,
  };
}

export function applyEvent(state: ConsoleState, event: ConsoleEvent): ConsoleState {
  if (event.seq <= state.lastSeq) {
    throw new Error(`event seq ${event.seq} not after ${state.lastSeq}`);
  }
  const next: ConsoleState = { ...state, lastSeq: event.seq };
  const p = event.payload;
  switch (event.kind) {
    case "label":
      next.timeline = [
        ...state.timeline,
        {
          index: p.index as number,
          kind: p.kind as string,
          confidence: p.confidence as number,
        },
      ];
      break;
    case "transcript":
      next.transcripts = [
        ...state.transcripts,
        {
          channel: p.channel as string,
          text: p.text as string,
          alternatives: (p.alternatives as string[]) ?? [],
        },
      ];
      break;
    case "editor_state": {
      // full snapshot, never a diff
      next.document = p.text as string;
      const menu = p.menu as { candidates: string[] } | null;
      next.menu = menu ? menu.candidates : null;
      break;
    }
    case "menu":
      next.menu = (p.open as boolean) ? (p.candidates as string[]) : null;
      break;
    case "warning":
      next.warnings = [...state.warnings, p.message as string];
      break;
    default:
      throw new Error(`unknown event kind ${(event as ConsoleEvent).kind}`);
  }
  return next;
}

/** Apply a whole log in seq order, starting from scratch. */
export function replay(events: ConsoleEvent[]): ConsoleState {
  const ordered = [...events].sort((a, b) => a.seq - b.seq);
  let state = initialState();
  for (const event of ordered) {
    state = applyEvent(state, event);
  }
  return state;
}

export function parseEventLog(jsonl: string): ConsoleEvent[] {
  return jsonl
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as ConsoleEvent);
}
