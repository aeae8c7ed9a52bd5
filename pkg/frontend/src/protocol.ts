/**
 * Protocol v1: one JSON object per line, UTF-8, newline-terminated.
 *
 * These types and guards are the single source of truth for the console;
 * every outbound message passes through a validator before it reaches the
 * wire, and the guards are exercised against the fixture messages shared
 * with the engine's test suite.
 */

export const PROTOCOL_VERSION = "1";

export type Registry = Record<string, string>;

export interface HelloMessage {
  type: "hello";
  version?: string;
  registry?: Registry;
}

export interface SegmentLabelMessage {
  type: "segment_label";
  segment_id: number;
  t0: number;
  t1: number;
  label: string;
  confidence: number;
}

export type FeedbackKind = "confirm" | "correct" | "new_speaker" | "rating";

export interface FeedbackMessage {
  type: "feedback";
  segment_id: number;
  kind: FeedbackKind;
  label?: string;
  rating?: number;
}

export interface RegisterSpeakerMessage {
  type: "register_speaker";
  name: string;
}

export interface RegistryUpdateMessage {
  type: "registry_update";
  entries: Registry;
}

export interface RewardRecordMessage {
  type: "reward_record";
  segment_id: number;
  r_user: number | null;
  r_time: number;
  r_conf: number;
  r_total: number;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  message: string;
}

export interface SnapshotAckMessage {
  type: "snapshot_ack";
  path: string;
}

export type ServerMessage =
  | HelloMessage
  | SegmentLabelMessage
  | RegistryUpdateMessage
  | RewardRecordMessage
  | ErrorMessage
  | SnapshotAckMessage;

export type ClientMessage = HelloMessage | FeedbackMessage | RegisterSpeakerMessage;

export type WireMessage = ServerMessage | ClientMessage;

const FEEDBACK_KINDS: ReadonlySet<string> = new Set([
  "confirm",
  "correct",
  "new_speaker",
  "rating",
]);

function isObject(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function isFiniteNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

function isRegistry(value: unknown): value is Registry {
  return isObject(value) && Object.values(value).every((v) => typeof v === "string");
}

export function isSegmentLabel(value: unknown): value is SegmentLabelMessage {
  return (
    isObject(value) &&
    value.type === "segment_label" &&
    Number.isInteger(value.segment_id) &&
    isFiniteNumber(value.t0) &&
    isFiniteNumber(value.t1) &&
    typeof value.label === "string" &&
    isFiniteNumber(value.confidence)
  );
}

export function isFeedback(value: unknown): value is FeedbackMessage {
  if (!isObject(value) || value.type !== "feedback") return false;
  if (!Number.isInteger(value.segment_id)) return false;
  if (typeof value.kind !== "string" || !FEEDBACK_KINDS.has(value.kind)) return false;
  if (value.kind === "correct" || value.kind === "new_speaker") {
    if (typeof value.label !== "string" || value.label.length === 0) return false;
  }
  if (value.kind === "rating") {
    if (!isFiniteNumber(value.rating) || value.rating < -1 || value.rating > 1) return false;
  }
  return true;
}

export function isRegisterSpeaker(value: unknown): value is RegisterSpeakerMessage {
  return (
    isObject(value) &&
    value.type === "register_speaker" &&
    typeof value.name === "string" &&
    value.name.length > 0
  );
}

export function isServerMessage(value: unknown): value is ServerMessage {
  if (!isObject(value) || typeof value.type !== "string") return false;
  switch (value.type) {
    case "hello":
      return value.registry === undefined || isRegistry(value.registry);
    case "segment_label":
      return isSegmentLabel(value);
    case "registry_update":
      return isRegistry(value.entries);
    case "reward_record":
      return (
        Number.isInteger(value.segment_id) &&
        (value.r_user === null || isFiniteNumber(value.r_user)) &&
        isFiniteNumber(value.r_time) &&
        isFiniteNumber(value.r_conf) &&
        isFiniteNumber(value.r_total)
      );
    case "error":
      return typeof value.code === "string" && typeof value.message === "string";
    case "snapshot_ack":
      return typeof value.path === "string";
    default:
      return false;
  }
}

export function isClientMessage(value: unknown): value is ClientMessage {
  if (!isObject(value) || typeof value.type !== "string") return false;
  if (value.type === "hello") return true;
  if (value.type === "feedback") return isFeedback(value);
  if (value.type === "register_speaker") return isRegisterSpeaker(value);
  return false;
}

/** Serialize an outbound message, refusing anything schema-invalid. */
export function encodeClientMessage(message: ClientMessage): string {
  if (!isClientMessage(message)) {
    throw new Error(`message does not validate against protocol v1: ${JSON.stringify(message)}`);
  }
  return JSON.stringify(message) + "\n";
}

/** Parse one received line; returns null for anything unrecognizable. */
export function decodeServerLine(line: string): ServerMessage | null {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    return null;
  }
  return isServerMessage(parsed) ? parsed : null;
}

/** Incremental newline splitter for a byte/text stream. */
export class LineSplitter {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const lines = this.buffer.split("\n");
    this.buffer = lines.pop() ?? "";
    return lines.filter((line) => line.trim().length > 0);
  }
}
