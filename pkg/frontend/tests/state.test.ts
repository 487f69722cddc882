import { describe, expect, it } from "vitest";

import { placementOnThumbnail, renderPanels, PanelSet } from "../src/panels.js";
import { FrameResult, ServerMessage } from "../src/protocol.js";
import { Transport, ViewerSession } from "../src/state.js";

class FakeTransport implements Transport {
  sent: Record<string, unknown>[] = [];
  closed = false;
  send(data: string): void {
    this.sent.push(JSON.parse(data));
  }
  close(): void {
    this.closed = true;
  }
  frames(): Record<string, unknown>[] {
    return this.sent.filter((m) => m["type"] === "frame");
  }
}

function makeResult(index: number, status: "ok" | "degraded" = "ok"): FrameResult {
  return {
    type: "frame_result",
    index,
    status,
    placement: { x: 10 * index, y: 0, w: 320, h: 240 },
    overlay_png: "b64overlay",
    mask_rle: String(320 * 240),
    mosaic_png: "b64mosaic",
    lesion_map_png: "b64lesion",
    mosaic_view_rect: { x: 0, y: 0, w: 320 + 10 * index, h: 240 },
    timings_ms: { register: 1, extend: 1, segment: 1, compose: 1 },
  };
}

function liveSession(minIntervalMs = 500) {
  let clock = 0;
  const transport = new FakeTransport();
  const session = new ViewerSession(transport, {
    slideId: "demo",
    startCenter: [400, 300],
    minIntervalMs,
    now: () => clock,
  });
  session.start();
  session.handleMessage({
    type: "session_created",
    session_id: "s1",
    slide: { id: "demo", width: 1000, height: 800 },
  });
  return { session, transport, tick: (ms: number) => { clock += ms; session.tick(); } };
}

describe("session lifecycle", () => {
  it("creates the session then submits the first frame", () => {
    const { transport } = liveSession();
    expect(transport.sent[0]).toMatchObject({
      type: "create_session",
      config: { slide_id: "demo" },
    });
    expect(transport.frames()).toHaveLength(1);
    expect(transport.frames()[0]).toMatchObject({ index: 0, center: [400, 300] });
  });

  it("unknown slide fails the session visibly", () => {
    const transport = new FakeTransport();
    const statuses: string[] = [];
    const session = new ViewerSession(transport, { slideId: "nope" }, {
      onStatus: (s, detail) => statuses.push(`${s}:${detail ?? ""}`),
    });
    session.start();
    session.handleMessage({ type: "error", message: "unknown slide id 'nope'" });
    expect(session.status).toBe("failed");
    expect(statuses.some((s) => s.includes("unknown slide"))).toBe(true);
    expect(transport.frames()).toHaveLength(0);
  });
});

describe("pan rate limiting and in-flight control", () => {
  it("coalesces drags inside the rate window to the latest center", () => {
    const { session, transport, tick } = liveSession();
    session.handleMessage(makeResult(0));

    tick(500);
    session.pan(80, 0);
    expect(transport.frames()).toHaveLength(2);
    session.handleMessage(makeResult(1));

    // two drags right after another frame: only one submission once the
    // window opens, carrying the latest center
    session.pan(10, 0);
    session.pan(15, 5);
    expect(transport.frames()).toHaveLength(2);
    tick(500);
    expect(transport.frames()).toHaveLength(3);
    expect(transport.frames()[2]).toMatchObject({ center: [505, 305] });
  });

  it("never has two frames in flight", () => {
    const { session, transport, tick } = liveSession(0);
    session.pan(5, 0);
    tick(1);
    session.pan(5, 0);
    tick(1);
    // first frame is unanswered: exactly one frame message may be out
    expect(transport.frames()).toHaveLength(1);
    session.handleMessage(makeResult(0));
    tick(1);
    expect(transport.frames()).toHaveLength(2);
  });

  it("issues strictly increasing indices with no gaps", () => {
    const { session, transport, tick } = liveSession(0);
    for (let i = 0; i < 10; i++) {
      session.pan(3, 1);
      tick(1);
      session.handleMessage(makeResult(i));
      tick(1);
    }
    const indices = transport.frames().map((f) => f["index"]);
    expect(indices).toEqual(indices.map((_, i) => i));
  });

  it("clamps the center to the slide", () => {
    const { session, transport, tick } = liveSession(0);
    session.handleMessage(makeResult(0));
    tick(1);
    session.pan(5000, -5000);
    tick(1);
    const last = transport.frames().at(-1)!;
    expect(last["center"]).toEqual([1000, 0]);
  });

  it("pauses panning while disconnected", () => {
    const { session, transport } = liveSession(0);
    session.handleDisconnect();
    const before = transport.frames().length;
    session.pan(10, 10);
    expect(transport.frames()).toHaveLength(before);
    expect(session.status).toBe("failed");
  });

  it("close sends close_session and accepts the reply", () => {
    const { session, transport } = liveSession();
    let exports: unknown = null;
    (session as unknown as { events: { onClosed?: (e: unknown) => void } });
    session.close();
    expect(transport.sent.at(-1)).toMatchObject({ type: "close_session" });
    session.handleMessage({
      type: "session_closed",
      exports: { mosaic_path: "a.png", lesion_map_path: "b.png" },
    } as ServerMessage);
    expect(session.status).toBe("closed");
    expect(transport.closed).toBe(true);
  });
});

describe("panels", () => {
  function recordingPanels() {
    const calls: Record<string, unknown[]> = { live: [], mosaic: [], lesion: [], outline: [], status: [], warn: [] };
    const panels: PanelSet = {
      live: { showPng: (p) => calls.live!.push(p) },
      mosaic: {
        showPng: (p) => calls.mosaic!.push(p),
        outline: (r) => calls.outline!.push(r),
      },
      lesionMap: { showPng: (p) => calls.lesion!.push(p) },
      statusBar: {
        showStatus: (s, t) => calls.status!.push([s, t]),
        showWarning: (a) => calls.warn!.push(a),
      },
    };
    return { panels, calls };
  }

  it("routes the three payloads and shows timings", () => {
    const { panels, calls } = recordingPanels();
    renderPanels(panels, makeResult(2), { mosaicThumbDims: [340, 240] });
    expect(calls.live).toEqual(["b64overlay"]);
    expect(calls.mosaic).toEqual(["b64mosaic"]);
    expect(calls.lesion).toEqual(["b64lesion"]);
    expect(calls.warn).toEqual([false]);
    expect(calls.outline).toHaveLength(1);
  });

  it("degraded results raise the warning badge", () => {
    const { panels, calls } = recordingPanels();
    renderPanels(panels, makeResult(3, "degraded"));
    expect(calls.warn).toEqual([true]);
  });

  it("scales the placement outline into thumbnail coordinates", () => {
    // thumbnail at half scale of a 640x480 view rect anchored at (-20, 0)
    const rect = placementOnThumbnail(
      { x: 300, y: 120, w: 320, h: 240 },
      { x: -20, y: 0, w: 640, h: 480 },
      320, 240);
    expect(rect).toEqual({ x: 160, y: 60, w: 160, h: 120 });
  });
});
