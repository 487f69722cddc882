/**
 * Browser entry: connect to a session server, pan a hosted slide with the
 * mouse, and watch the three live views.
 */

import { PanelSet, PanelSurface, renderPanels } from "./panels.js";
import { FrameResult, WireRect } from "./protocol.js";
import { bindSocket } from "./transport.js";
import { ViewerSession } from "./state.js";

function imagePanel(img: HTMLImageElement, overlayCanvas?: HTMLCanvasElement): PanelSurface {
  const panel: PanelSurface = {
    showPng(pngBase64: string) {
      img.src = `data:image/png;base64,${pngBase64}`;
      if (overlayCanvas) {
        const ctx = overlayCanvas.getContext("2d");
        ctx?.clearRect(0, 0, overlayCanvas.width, overlayCanvas.height);
      }
    },
  };
  if (overlayCanvas) {
    panel.outline = (rect: WireRect) => {
      overlayCanvas.width = img.naturalWidth || overlayCanvas.width;
      overlayCanvas.height = img.naturalHeight || overlayCanvas.height;
      const ctx = overlayCanvas.getContext("2d");
      if (!ctx) return;
      ctx.clearRect(0, 0, overlayCanvas.width, overlayCanvas.height);
      ctx.strokeStyle = "#ffd400";
      ctx.lineWidth = 2;
      ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
    };
  }
  return panel;
}

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function setup(): void {
  const statusEl = byId<HTMLSpanElement>("status");
  const warnEl = byId<HTMLSpanElement>("warning");
  const timingsEl = byId<HTMLSpanElement>("timings");

  const panels: PanelSet = {
    live: imagePanel(byId<HTMLImageElement>("live-view")),
    mosaic: imagePanel(byId<HTMLImageElement>("mosaic-view"),
      byId<HTMLCanvasElement>("mosaic-outline")),
    lesionMap: imagePanel(byId<HTMLImageElement>("lesion-view")),
    statusBar: {
      showStatus(status, timings) {
        statusEl.textContent = status;
        timingsEl.textContent = Object.entries(timings)
          .map(([k, v]) => `${k} ${v.toFixed(0)}ms`).join("  ");
      },
      showWarning(active) {
        warnEl.style.display = active ? "inline" : "none";
      },
    },
  };

  let session: ViewerSession | null = null;
  let timer: number | null = null;

  byId<HTMLButtonElement>("connect").addEventListener("click", async () => {
    const server = byId<HTMLInputElement>("server").value;
    const slideId = byId<HTMLInputElement>("slide").value;
    const devMode = byId<HTMLInputElement>("dev-rate").checked;
    statusEl.textContent = "connecting";
    try {
      const socket = new WebSocket(server);
      session = await bindSocket(socket, (transport) => new ViewerSession(
        transport,
        {
          slideId,
          startCenter: [400, 300],
          minIntervalMs: devMode ? 50 : 500,
          config: { backend: "threshold", edge_width: 120, strategy: "mirror" },
        },
        {
          onResult(result: FrameResult) {
            const img = byId<HTMLImageElement>("mosaic-view");
            renderPanels(panels, result, {
              mosaicThumbDims: [img.naturalWidth, img.naturalHeight],
            });
          },
          onStatus(status, detail) {
            statusEl.textContent = detail ? `${status}: ${detail}` : status;
            if (status === "failed") {
              statusEl.textContent += " (reconnect to retry)";
            }
          },
          onError(message) {
            statusEl.textContent = `error: ${message}`;
          },
        },
      ));
      // periodic flush so coalesced pans go out once the rate window opens
      timer = window.setInterval(() => session?.tick(), 50);
    } catch (err) {
      statusEl.textContent = `connection failed: ${(err as Error).message} (retry)`;
    }
  });

  byId<HTMLButtonElement>("disconnect").addEventListener("click", () => {
    session?.close();
    if (timer !== null) window.clearInterval(timer);
  });

  const live = byId<HTMLImageElement>("live-view");
  let dragging = false;
  let last: [number, number] = [0, 0];
  live.addEventListener("mousedown", (ev) => {
    dragging = true;
    last = [ev.clientX, ev.clientY];
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
  window.addEventListener("mousemove", (ev) => {
    if (!dragging || !session) return;
    // dragging the tissue moves the viewport the opposite way
    session.pan(last[0] - ev.clientX, last[1] - ev.clientY);
    last = [ev.clientX, ev.clientY];
  });
}

if (typeof document !== "undefined") {
  window.addEventListener("DOMContentLoaded", setup);
}
