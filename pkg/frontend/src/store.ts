/**
 * Console view state.
 *
 * The view derives solely from received server messages plus local clicks;
 * there is no diarization logic on this side. Reducers are pure, so
 * replaying the same message history reconstructs an identical view after a
 * reconnect.
 */

import type { Registry, ServerMessage } from "./protocol.js";
import type { FeedbackKind } from "./protocol.js";

export const ROLLING_WINDOW_S = 60;
export const STALENESS_WINDOW_S = 30;
export const OUTBOX_CAP = 50;
export const NON_SPEECH_LABEL = "NON_SPEECH";

export type ConnectionState = "disconnected" | "connecting" | "connected";

export interface TimelineRow {
  segmentId: number;
  t0: number;
  t1: number;
  label: string;
  confidence: number;
  /** feedback sent, waiting for reward_record or error */
  pending: boolean;
  pendingKind: FeedbackKind | null;
  rewarded: boolean;
  rewardTotal: number | null;
}

export interface SessionView {
  connection: ConnectionState;
  protocolVersion: string | null;
  registry: Registry;
  rows: TimelineRow[]; // ascending by segmentId
  streamTime: number;
  notices: string[];
  /** encoded lines queued while disconnected, capped at OUTBOX_CAP */
  outbox: string[];
  lastSnapshotPath: string | null;
}

export function initialView(): SessionView {
  return {
    connection: "disconnected",
    protocolVersion: null,
    registry: {},
    rows: [],
    streamTime: 0,
    notices: [],
    outbox: [],
    lastSnapshotPath: null,
  };
}

export function speakerButtons(view: SessionView): string[] {
  return Object.entries(view.registry)
    .sort(([a], [b]) => Number(a) - Number(b))
    .map(([, name]) => name);
}

function trimToWindow(rows: TimelineRow[], streamTime: number): TimelineRow[] {
  const horizon = streamTime - ROLLING_WINDOW_S;
  return rows.filter((row) => row.t1 >= horizon);
}

export function connectionChanged(view: SessionView, state: ConnectionState): SessionView {
  return { ...view, connection: state };
}

export function applyServerMessage(view: SessionView, message: ServerMessage): SessionView {
  switch (message.type) {
    case "hello":
      return {
        ...view,
        protocolVersion: message.version ?? view.protocolVersion,
        registry: message.registry ?? view.registry,
      };
    case "segment_label": {
      const row: TimelineRow = {
        segmentId: message.segment_id,
        t0: message.t0,
        t1: message.t1,
        label: message.label,
        confidence: message.confidence,
        pending: false,
        pendingKind: null,
        rewarded: false,
        rewardTotal: null,
      };
      const streamTime = Math.max(view.streamTime, message.t1);
      const rows = trimToWindow(
        [...view.rows.filter((r) => r.segmentId !== row.segmentId), row].sort(
          (a, b) => a.segmentId - b.segmentId,
        ),
        streamTime,
      );
      return { ...view, rows, streamTime };
    }
    case "registry_update":
      return { ...view, registry: { ...message.entries } };
    case "reward_record": {
      const rows = view.rows.map((row) =>
        row.segmentId === message.segment_id
          ? { ...row, pending: false, rewarded: true, rewardTotal: message.r_total }
          : row,
      );
      return { ...view, rows };
    }
    case "error": {
      // No correlation id on the wire: resolve the oldest pending row and
      // surface the code as a non-blocking notice.
      const pendingIndex = view.rows.findIndex((row) => row.pending);
      const rows =
        pendingIndex < 0
          ? view.rows
          : view.rows.map((row, i) =>
              i === pendingIndex ? { ...row, pending: false, pendingKind: null } : row,
            );
      const notices = [...view.notices, `${message.code}: ${message.message}`];
      return { ...view, rows, notices };
    }
    case "snapshot_ack":
      return { ...view, lastSnapshotPath: message.path };
    default:
      return view;
  }
}

export function markPending(
  view: SessionView,
  segmentId: number,
  kind: FeedbackKind,
): SessionView {
  return {
    ...view,
    rows: view.rows.map((row) =>
      row.segmentId === segmentId ? { ...row, pending: true, pendingKind: kind } : row,
    ),
  };
}

export function queueOutbound(view: SessionView, encoded: string): SessionView | null {
  if (view.outbox.length >= OUTBOX_CAP) return null;
  return { ...view, outbox: [...view.outbox, encoded] };
}

export function drainOutbox(view: SessionView): { view: SessionView; lines: string[] } {
  return { view: { ...view, outbox: [] }, lines: view.outbox };
}

export function addNotice(view: SessionView, notice: string): SessionView {
  return { ...view, notices: [...view.notices, notice] };
}
