// Pure session/rendering logic, kept DOM-free so it is unit-testable.

import type { ChatMessage, ChatReply, DecodeTrace, KbPayload } from "./types.js";

export interface UiSession {
  sessionId: string | null;
  kb: KbPayload;
  kbLocked: boolean;
  messages: ChatMessage[];
  lastTrace: DecodeTrace | null;
  pending: boolean;
  error: string | null;
}

export function newSession(columns: string[], rows = 3): UiSession {
  return {
    sessionId: null,
    kb: {
      columns: [...columns],
      rows: Array.from({ length: rows }, () =>
        Object.fromEntries(columns.map((c) => [c, ""]))),
    },
    kbLocked: false,
    messages: [],
    lastTrace: null,
    pending: false,
    error: null,
  };
}

export function editKbCell(session: UiSession, row: number, column: string,
                           value: string): UiSession {
  if (session.kbLocked) {
    throw new Error("KB is locked once the conversation has started");
  }
  const rows = session.kb.rows.map((r, i) => (i === row ? { ...r, [column]: value } : r));
  return { ...session, kb: { ...session.kb, rows } };
}

export function addKbRow(session: UiSession): UiSession {
  if (session.kbLocked) {
    throw new Error("KB is locked once the conversation has started");
  }
  const empty = Object.fromEntries(session.kb.columns.map((c) => [c, ""]));
  return { ...session, kb: { ...session.kb, rows: [...session.kb.rows, empty] } };
}

export function nonEmptyRows(kb: KbPayload): Record<string, string>[] {
  return kb.rows.filter((r) => Object.values(r).some((v) => v.trim() !== ""));
}

/** Sending locks the KB and marks the exchange in flight. */
export function beginSend(session: UiSession, utterance: string): UiSession {
  return {
    ...session,
    kbLocked: true,
    pending: true,
    error: null,
    messages: [...session.messages, { role: "driver", text: utterance }],
  };
}

export function applyReply(session: UiSession, reply: ChatReply): UiSession {
  validateTrace(reply.trace);
  return {
    ...session,
    pending: false,
    lastTrace: reply.trace,
    messages: [...session.messages, { role: "car", text: reply.response }],
  };
}

/** Network failure: surface a retry banner, roll back the optimistic turn. */
export function applyFailure(session: UiSession, message: string): UiSession {
  // the KB stays locked once the server has seen it (session created) or a
  // turn has succeeded; otherwise editing may resume
  const locked = session.sessionId !== null || session.messages.length > 1;
  return {
    ...session,
    pending: false,
    error: message,
    messages: session.messages.slice(0, -1),
    kbLocked: locked,
  };
}

export function validateTrace(trace: DecodeTrace): void {
  const m = trace.slot_names.length;
  const n = trace.input_tokens.length;
  if (trace.state_attention.length !== m ||
      trace.state_attention.some((row) => row.length !== n)) {
    throw new Error(`state_attention must be ${m}x${n}`);
  }
  if (trace.entry_probs.length !== trace.entry_labels.length) {
    throw new Error("entry_probs and entry_labels disagree");
  }
}

export function heatmapCellCount(trace: DecodeTrace): number {
  return trace.state_attention.length * (trace.state_attention[0]?.length ?? 0);
}

/** Index of the attended KB row, or null when there is no trace. */
export function argmaxEntry(trace: DecodeTrace | null): number | null {
  if (!trace || trace.entry_probs.length === 0) return null;
  let best = 0;
  trace.entry_probs.forEach((p, i) => {
    if (p > trace.entry_probs[best]) best = i;
  });
  return best;
}

/**
 * Blue shading for an attention weight in [0, 1]; full weight is full
 * intensity. Returns a CSS rgba string.
 */
export function blueShade(weight: number): string {
  const w = Math.max(0, Math.min(1, weight));
  return `rgba(13, 84, 160, ${w.toFixed(3)})`;
}

/** Row shade driven by entry probability; 0 -> transparent, 1 -> strongest. */
export function rowShade(trace: DecodeTrace | null, row: number): string {
  if (!trace) return "rgba(13, 84, 160, 0.000)";
  return blueShade(trace.entry_probs[row] ?? 0);
}
