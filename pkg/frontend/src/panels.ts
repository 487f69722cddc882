/**
 * Panel routing: one frame_result feeds the three live views.
 *
 * Rendering goes through a small surface interface so the logic is testable
 * without a DOM; the browser implementation backs it with <canvas>/<img>.
 */

import { FrameResult, WireRect, rleDecode } from "./protocol.js";

export interface PanelSurface {
  /** Replace the panel content with a base64 PNG payload. */
  showPng(pngBase64: string): void;
  /** Outline a rect, in panel pixel coordinates. */
  outline?(rect: WireRect): void;
}

export interface StatusSurface {
  showStatus(status: string, timings: Record<string, number>): void;
  showWarning(active: boolean): void;
}

export interface PanelSet {
  live: PanelSurface;
  mosaic: PanelSurface;
  lesionMap: PanelSurface;
  statusBar: StatusSurface;
}

/**
 * Map the reported global placement into mosaic-thumbnail coordinates.
 * The thumbnail covers `viewRect` in global space at `thumbWidth` px wide.
 */
export function placementOnThumbnail(
  placement: WireRect,
  viewRect: WireRect,
  thumbWidth: number,
  thumbHeight: number,
): WireRect {
  const sx = viewRect.w > 0 ? thumbWidth / viewRect.w : 1;
  const sy = viewRect.h > 0 ? thumbHeight / viewRect.h : 1;
  return {
    x: Math.round((placement.x - viewRect.x) * sx),
    y: Math.round((placement.y - viewRect.y) * sy),
    w: Math.max(1, Math.round(placement.w * sx)),
    h: Math.max(1, Math.round(placement.h * sy)),
  };
}

export interface RenderOptions {
  /** Decoded thumbnail dims, needed to scale the placement outline. */
  mosaicThumbDims?: [number, number];
}

/** Push one frame_result into the panels; malformed payloads are skipped so
 * panels always keep their last good state. */
export function renderPanels(
  panels: PanelSet,
  result: FrameResult,
  options: RenderOptions = {},
): void {
  panels.live.showPng(result.overlay_png);
  panels.mosaic.showPng(result.mosaic_png);
  if (panels.mosaic.outline && options.mosaicThumbDims) {
    const [tw, th] = options.mosaicThumbDims;
    panels.mosaic.outline(
      placementOnThumbnail(result.placement, result.mosaic_view_rect, tw, th));
  }
  panels.lesionMap.showPng(result.lesion_map_png);
  panels.statusBar.showStatus(result.status, result.timings_ms);
  panels.statusBar.showWarning(result.status === "degraded");
}

/** Decode the mask payload for client-side use (e.g. hover statistics). */
export function decodeMask(result: FrameResult): Uint8Array {
  return rleDecode(result.mask_rle, result.placement.w, result.placement.h);
}
