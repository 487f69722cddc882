/**
 * Viewer session state machine.
 *
 * Drives one slide-backed session: the operator pans, the machine submits
 * viewport centers at most once per rate interval (coalescing intermediate
 * drags to the latest center) with never more than one frame in flight, and
 * panel updates fire for every frame_result. Frame indices are issued
 * strictly in order with no gaps.
 */

import {
  ClientMessage,
  FrameResult,
  ServerMessage,
  SessionConfig,
  serializeMessage,
} from "./protocol.js";

export interface Transport {
  send(data: string): void;
  close(): void;
}

export type ConnectionStatus = "connecting" | "live" | "closed" | "failed";

export interface ViewerEvents {
  onResult?(result: FrameResult): void;
  onStatus?(status: ConnectionStatus, detail?: string): void;
  onError?(message: string): void;
  onClosed?(exports: { mosaic_path: string; lesion_map_path: string }): void;
}

export interface ViewerOptions {
  slideId: string;
  config?: SessionConfig;
  startCenter?: [number, number];
  /** Client-side frame rate matching the camera; dev mode may lower it. */
  minIntervalMs?: number;
  now?(): number;
}

export class ViewerSession {
  readonly slideId: string;
  sessionId: string | null = null;
  status: ConnectionStatus = "connecting";
  center: [number, number];
  latestResult: FrameResult | null = null;
  slideDims: [number, number] | null = null;

  private readonly transport: Transport;
  private readonly events: ViewerEvents;
  private readonly config: SessionConfig;
  private readonly minIntervalMs: number;
  private readonly now: () => number;

  private nextIndex = 0;
  private inFlight = false;
  private pendingCenter: [number, number] | null = null;
  private lastSentAt = -Infinity;
  private closing = false;

  constructor(transport: Transport, options: ViewerOptions, events: ViewerEvents = {}) {
    this.transport = transport;
    this.events = events;
    this.slideId = options.slideId;
    this.config = options.config ?? {};
    this.center = options.startCenter ?? [0, 0];
    this.minIntervalMs = options.minIntervalMs ?? 500;
    this.now = options.now ?? (() => Date.now());
  }

  /** Send create_session; the first frame goes out once the session exists. */
  start(): void {
    const msg: ClientMessage = {
      type: "create_session",
      config: { ...this.config, slide_id: this.slideId },
    };
    this.transport.send(serializeMessage(msg));
  }

  /** Pan by a drag delta in slide pixels; actual submission is rate limited. */
  pan(dx: number, dy: number): void {
    if (this.status !== "live") {
      return; // panning pauses while the connection is down
    }
    this.center = this.clamp([this.center[0] + dx, this.center[1] + dy]);
    this.requestFrame();
  }

  /** True when a coalesced center is waiting for the rate window or a reply. */
  get hasPendingFrame(): boolean {
    return this.pendingCenter !== null;
  }

  /**
   * Ask for a frame at the current center. Submits immediately when allowed,
   * otherwise coalesces (latest center wins). Call `tick()` after time passes
   * to flush a coalesced frame.
   */
  requestFrame(): void {
    this.pendingCenter = [this.center[0], this.center[1]];
    this.tick();
  }

  /** Flush the pending center if the in-flight and rate rules allow it. */
  tick(): void {
    if (this.status !== "live" || this.sessionId === null || this.closing) {
      return;
    }
    if (this.pendingCenter === null || this.inFlight) {
      return;
    }
    if (this.now() - this.lastSentAt < this.minIntervalMs) {
      return;
    }
    const center = this.pendingCenter;
    this.pendingCenter = null;
    this.inFlight = true;
    this.lastSentAt = this.now();
    const msg: ClientMessage = {
      type: "frame",
      session_id: this.sessionId,
      index: this.nextIndex,
      center,
    };
    this.nextIndex += 1;
    this.transport.send(serializeMessage(msg));
  }

  close(): void {
    if (this.sessionId !== null && !this.closing) {
      this.closing = true;
      this.transport.send(serializeMessage({
        type: "close_session",
        session_id: this.sessionId,
      }));
    }
  }

  handleMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "session_created": {
        this.sessionId = msg.session_id;
        this.status = "live";
        if (msg.slide) {
          this.slideDims = [msg.slide.width, msg.slide.height];
          this.center = this.clamp(this.center);
        }
        this.events.onStatus?.("live");
        this.requestFrame(); // initial frame from the starting center
        break;
      }
      case "frame_result": {
        this.inFlight = false;
        this.latestResult = msg;
        this.events.onResult?.(msg);
        this.tick(); // a coalesced pan may be waiting
        break;
      }
      case "session_closed": {
        this.status = "closed";
        this.events.onStatus?.("closed");
        this.events.onClosed?.(msg.exports);
        this.transport.close();
        break;
      }
      case "error": {
        this.inFlight = false;
        if (this.sessionId === null) {
          this.status = "failed"; // e.g. unknown slide id: no session exists
          this.events.onStatus?.("failed", msg.message);
        }
        this.events.onError?.(msg.message);
        break;
      }
    }
  }

  /** The transport dropped; panning pauses until a new session is started. */
  handleDisconnect(): void {
    if (this.status !== "closed") {
      this.status = "failed";
      this.inFlight = false;
      this.events.onStatus?.("failed", "connection lost");
    }
  }

  private clamp(center: [number, number]): [number, number] {
    if (this.slideDims === null) {
      return center;
    }
    const [w, h] = this.slideDims;
    return [Math.min(Math.max(center[0], 0), w), Math.min(Math.max(center[1], 0), h)];
  }
}
