/**
 * The two user-facing operations: rendering the rolling timeline and turning
 * clicks into outbound protocol messages.
 */

import {
  encodeClientMessage,
  type ClientMessage,
  type FeedbackKind,
} from "./protocol.js";
import {
  NON_SPEECH_LABEL,
  STALENESS_WINDOW_S,
  markPending,
  queueOutbound,
  addNotice,
  type SessionView,
  type TimelineRow,
} from "./store.js";

export interface VisibleRow {
  segmentId: number;
  span: string;
  label: string;
  confidencePct: number;
  /** confirm/correct controls are live only inside the staleness window */
  canFeedback: boolean;
  pending: boolean;
  rewarded: boolean;
  rewardTotal: number | null;
}

export function rowActionable(row: TimelineRow, streamTime: number): boolean {
  return row.label !== NON_SPEECH_LABEL && streamTime - row.t1 <= STALENESS_WINDOW_S;
}

/** Rows newest-first, spans and confidence preformatted for the DOM layer. */
export function renderTimeline(view: SessionView): VisibleRow[] {
  return [...view.rows]
    .sort((a, b) => b.segmentId - a.segmentId)
    .map((row) => ({
      segmentId: row.segmentId,
      span: `${row.t0.toFixed(1)}s–${row.t1.toFixed(1)}s`,
      label: row.label,
      confidencePct: Math.round(row.confidence * 100),
      canFeedback: rowActionable(row, view.streamTime),
      pending: row.pending,
      rewarded: row.rewarded,
      rewardTotal: row.rewardTotal,
    }));
}

export interface SubmitResult {
  view: SessionView;
  /** encoded line to write now; null when queued or refused */
  send: string | null;
}

function dispatch(view: SessionView, message: ClientMessage): SubmitResult {
  const encoded = encodeClientMessage(message);
  if (view.connection === "connected") {
    return { view, send: encoded };
  }
  const queued = queueOutbound(view, encoded);
  if (queued === null) {
    return { view: addNotice(view, "offline queue full, message dropped"), send: null };
  }
  return { view: queued, send: null };
}

/** A confirm/correct/new-speaker/rating click on one timeline row. */
export function submitFeedback(
  view: SessionView,
  segmentId: number,
  kind: FeedbackKind,
  label?: string,
  rating?: number,
): SubmitResult {
  const row = view.rows.find((r) => r.segmentId === segmentId);
  if (!row || !rowActionable(row, view.streamTime)) {
    return { view: addNotice(view, `segment ${segmentId} is outside the feedback window`), send: null };
  }
  const message: ClientMessage = { type: "feedback", segment_id: segmentId, kind };
  if (label !== undefined) message.label = label;
  if (rating !== undefined) message.rating = rating;
  const result = dispatch(view, message);
  return { ...result, view: markPending(result.view, segmentId, kind) };
}

/** The "add participant" form; the button appears only after registry_update. */
export function registerSpeaker(view: SessionView, name: string): SubmitResult {
  return dispatch(view, { type: "register_speaker", name });
}

export function sayHello(view: SessionView): SubmitResult {
  return dispatch(view, { type: "hello" });
}
