/**
 * Wire types for the streaming session API, plus the run-length mask codec.
 *
 * Every message is a JSON object with a `type` tag; binary payloads travel
 * base64-encoded. `mask_rle` is a row-major run-length string: alternating
 * run lengths starting with a background run, decimal integers joined by
 * commas, summing to exactly width * height.
 */

export interface WireRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface RegistrationConfig {
  min_overlap_fraction?: number;
  peak_threshold?: number;
  mad_threshold?: number;
}

export interface SessionConfig {
  edge_width?: number;
  strategy?: "zero" | "mirror";
  backend?: "oracle" | "threshold" | "external";
  registration?: RegistrationConfig;
  slide_id?: string;
  viewport?: [number, number];
  threshold?: number;
  min_component_area?: number;
  model?: string;
}

export interface CreateSession {
  type: "create_session";
  config: SessionConfig;
}

export interface FrameMessage {
  type: "frame";
  session_id: string;
  index: number;
  png?: string;
  center?: [number, number];
}

export interface CloseSession {
  type: "close_session";
  session_id: string;
}

export type ClientMessage = CreateSession | FrameMessage | CloseSession;

export interface SessionCreated {
  type: "session_created";
  session_id: string;
  slide?: { id: string; width: number; height: number };
}

export interface FrameResult {
  type: "frame_result";
  index: number;
  status: "ok" | "degraded";
  placement: WireRect;
  overlay_png: string;
  mask_rle: string;
  mosaic_png: string;
  lesion_map_png: string;
  mosaic_view_rect: WireRect;
  timings_ms: Record<string, number>;
}

export interface SessionClosed {
  type: "session_closed";
  exports: { mosaic_path: string; lesion_map_path: string };
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = SessionCreated | FrameResult | SessionClosed | ErrorMessage;

const SERVER_TYPES = new Set([
  "session_created",
  "frame_result",
  "session_closed",
  "error",
]);

const CLIENT_TYPES = new Set(["create_session", "frame", "close_session"]);

export class ProtocolError extends Error {}

function requireField(obj: Record<string, unknown>, field: string, kind: string): void {
  if (!(field in obj)) {
    throw new ProtocolError(`${kind} message missing '${field}'`);
  }
}

/** Parse and structurally validate one server message. */
export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new ProtocolError("malformed JSON from server");
  }
  if (typeof data !== "object" || data === null) {
    throw new ProtocolError("server message is not an object");
  }
  const msg = data as Record<string, unknown>;
  const type = msg["type"];
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) {
    throw new ProtocolError(`unknown server message type ${String(type)}`);
  }
  if (type === "session_created") {
    requireField(msg, "session_id", type);
  } else if (type === "frame_result") {
    for (const f of ["index", "status", "placement", "overlay_png", "mask_rle",
      "mosaic_png", "lesion_map_png", "timings_ms"]) {
      requireField(msg, f, type);
    }
  } else if (type === "session_closed") {
    requireField(msg, "exports", type);
  } else {
    requireField(msg, "message", type);
  }
  return msg as unknown as ServerMessage;
}

/** Validate one client message (used for the golden-vector round trip). */
export function parseClientMessage(raw: string): ClientMessage {
  const msg = JSON.parse(raw) as Record<string, unknown>;
  const type = msg["type"];
  if (typeof type !== "string" || !CLIENT_TYPES.has(type)) {
    throw new ProtocolError(`unknown client message type ${String(type)}`);
  }
  if (type === "create_session") {
    requireField(msg, "config", type);
  } else if (type === "frame") {
    requireField(msg, "session_id", type);
    requireField(msg, "index", type);
    if (!("png" in msg) && !("center" in msg)) {
      throw new ProtocolError("frame message needs 'png' or 'center'");
    }
  } else {
    requireField(msg, "session_id", type);
  }
  return msg as unknown as ClientMessage;
}

export function serializeMessage(msg: ClientMessage | ServerMessage): string {
  return JSON.stringify(msg);
}

/** Decode a run-length mask string into a flat 0/1 array (row major). */
export function rleDecode(encoded: string, width: number, height: number): Uint8Array {
  const total = width * height;
  const out = new Uint8Array(total);
  const runs = encoded.length ? encoded.split(",").map((t) => Number.parseInt(t, 10)) : [];
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (!Number.isInteger(run) || run < 0) {
      throw new ProtocolError(`bad run length ${run}`);
    }
    if (value === 1) {
      out.fill(1, pos, pos + run);
    }
    pos += run;
    value ^= 1;
  }
  if (pos !== total) {
    throw new ProtocolError(`run lengths sum to ${pos}, expected ${total}`);
  }
  return out;
}

/** Encode a flat 0/1 mask as alternating run lengths starting with background. */
export function rleEncode(mask: Uint8Array | number[]): string {
  const n = mask.length;
  if (n === 0) {
    return "0";
  }
  const runs: number[] = [];
  let current = mask[0]! > 0 ? 1 : 0;
  if (current === 1) {
    runs.push(0);
  }
  let run = 0;
  for (let i = 0; i < n; i++) {
    const v = mask[i]! > 0 ? 1 : 0;
    if (v === current) {
      run += 1;
    } else {
      runs.push(run);
      current = v;
      run = 1;
    }
  }
  runs.push(run);
  return runs.join(",");
}
