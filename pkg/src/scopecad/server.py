"""Streaming session server speaking JSON messages over WebSocket.

Message flow per session:

    -> {"type": "create_session", "config": {...}}
    <- {"type": "session_created", "session_id": ..., "slide": {...}?}
    -> {"type": "frame", "session_id", "index", "png": <b64>}        (or)
    -> {"type": "frame", "session_id", "index", "center": [x, y]}
    <- {"type": "frame_result", "index", "status", "placement",
        "overlay_png", "mask_rle", "mosaic_png", "lesion_map_png",
        "timings_ms"}
    -> {"type": "close_session", "session_id"}
    <- {"type": "session_closed", "exports": {...}}

``center`` frames require a slide-backed session (``slide_id`` in the
config): the server crops the viewport itself, which keeps the wire light
and lets the oracle backend see true slide coordinates. Any failure is
answered with {"type": "error", "message"} and the session is left intact.

Slides live in a directory as ``<id>.png`` with an optional
``<id>_mask.png`` ground truth.
"""

from __future__ import annotations

import itertools
import json
import logging
from pathlib import Path

from .errors import ScopeCadError
from .pipeline import Session, SessionConfig
from .protocol import png_b64_decode, png_b64_encode, rect_to_wire, rle_encode
from .raster import load_mask_png, load_png, save_mask_png, save_png
from .registration import RegistrationConfig
from .segment import ExternalBackend, OracleBackend, ThresholdBackend
from .slidesim import VirtualSlide, viewport_frame

log = logging.getLogger(__name__)

DEFAULT_VIEWPORT = (640, 480)

# base64 PNG payloads at camera resolution blow past the websockets default
# 1 MiB frame cap in both directions
MAX_MESSAGE_BYTES = 64 * 1024 * 1024


def config_from_wire(data: dict) -> SessionConfig:
    reg = data.get("registration", {})
    return SessionConfig(
        edge_width=int(data.get("edge_width", 120)),
        strategy=data.get("strategy", "mirror"),
        registration=RegistrationConfig(
            min_overlap_fraction=float(reg.get("min_overlap_fraction", 0.05)),
            peak_threshold=float(reg.get("peak_threshold", 0.04)),
            mad_threshold=float(reg.get("mad_threshold", 20.0)),
        ),
        fps=float(data.get("fps", 2.0)),
    )


def make_backend(name: str, slide: VirtualSlide | None, config: dict):
    if name == "threshold":
        return ThresholdBackend(
            threshold=int(config.get("threshold", 200)),
            polarity=config.get("polarity", "bright"),
            min_component_area=int(config.get("min_component_area", 0)),
        )
    if name == "oracle":
        if slide is None or slide.gt_mask is None:
            raise ScopeCadError("oracle backend needs a slide-backed session with a mask")
        return OracleBackend(slide.gt_mask)
    if name == "external":
        model = config.get("model")
        if not model:
            raise ScopeCadError("external backend needs a 'model' path in the config")
        return ExternalBackend(model)
    raise ScopeCadError(f"unknown backend {name!r}")


class _LiveSession:
    def __init__(self, session: Session, slide: VirtualSlide | None, viewport):
        self.session = session
        self.slide = slide
        self.viewport = viewport
        self.slide_origin = None  # slide coords of session-global (0, 0)


class PipelineServer:
    """One server; sessions are per-connection and strictly sequential."""

    def __init__(self, slide_dir=None, export_dir="exports", host="127.0.0.1", port=8765):
        self.slide_dir = Path(slide_dir) if slide_dir else None
        self.export_dir = Path(export_dir)
        self.host = host
        self.port = port
        self._ids = itertools.count(1)

    # -- slide loading ------------------------------------------------------

    def load_slide(self, slide_id: str) -> VirtualSlide:
        if self.slide_dir is None:
            raise ScopeCadError("server has no slide directory configured")
        image_path = self.slide_dir / f"{slide_id}.png"
        if not image_path.exists():
            raise ScopeCadError(f"unknown slide id {slide_id!r}")
        mask_path = self.slide_dir / f"{slide_id}_mask.png"
        mask = load_mask_png(mask_path) if mask_path.exists() else None
        return VirtualSlide(load_png(image_path), mask, slide_id)

    # -- message handling ----------------------------------------------------

    def handle_message(self, state: dict, msg: dict) -> dict:
        kind = msg.get("type")
        try:
            if kind == "create_session":
                return self._create(state, msg)
            if kind == "frame":
                return self._frame(state, msg)
            if kind == "close_session":
                return self._close(state, msg)
        except ScopeCadError as exc:
            return {"type": "error", "message": str(exc)}
        return {"type": "error", "message": f"unknown message type {kind!r}"}

    def _create(self, state: dict, msg: dict) -> dict:
        config = msg.get("config", {})
        slide = None
        if config.get("slide_id"):
            slide = self.load_slide(config["slide_id"])
        backend = make_backend(config.get("backend", "threshold"), slide, config)
        session_id = f"s{next(self._ids)}"
        viewport = tuple(config.get("viewport", DEFAULT_VIEWPORT))
        session = Session(session_id, backend, config_from_wire(config))
        state[session_id] = _LiveSession(session, slide, viewport)
        reply = {"type": "session_created", "session_id": session_id}
        if slide is not None:
            sh, sw = slide.image.shape[:2]
            reply["slide"] = {"id": slide.id, "width": sw, "height": sh}
        return reply

    def _frame(self, state: dict, msg: dict) -> dict:
        live = state.get(msg.get("session_id"))
        if live is None:
            return {"type": "error", "message": "unknown session_id"}
        index = msg.get("index")
        if index != live.session.next_index:
            return {"type": "error",
                    "message": f"expected index {live.session.next_index}, got {index}"}
        if "png" in msg:
            frame = png_b64_decode(msg["png"])
        elif "center" in msg:
            if live.slide is None:
                return {"type": "error",
                        "message": "center frames need a slide-backed session"}
            cx, cy = msg["center"]
            frame, rect = viewport_frame(live.slide, (cx, cy), *live.viewport)
            if live.slide_origin is None:
                live.slide_origin = (rect.x, rect.y)
                backend = live.session.backend
                if isinstance(backend, OracleBackend):
                    backend.origin = live.slide_origin
        else:
            return {"type": "error", "message": "frame needs 'png' or 'center'"}

        outputs = live.session.step(frame)
        return {
            "type": "frame_result",
            "index": outputs.frame_index,
            "status": outputs.status,
            "placement": rect_to_wire(outputs.placement),
            "overlay_png": png_b64_encode(outputs.labeled_view),
            "mask_rle": rle_encode(outputs.mask),
            "mosaic_png": png_b64_encode(outputs.mosaic_view),
            "lesion_map_png": png_b64_encode(outputs.lesion_map_view),
            "mosaic_view_rect": rect_to_wire(outputs.mosaic_view_rect),
            "timings_ms": outputs.timings_ms,
        }

    def _close(self, state: dict, msg: dict) -> dict:
        live = state.pop(msg.get("session_id"), None)
        if live is None:
            return {"type": "error", "message": "unknown session_id"}
        out_dir = self.export_dir / live.session.id
        out_dir.mkdir(parents=True, exist_ok=True)
        (mosaic, mosaic_valid), (lesion, lesion_valid) = live.session.exports()
        mosaic_path = out_dir / "mosaic.png"
        lesion_path = out_dir / "lesion_map.png"
        save_png(mosaic_path, mosaic)
        save_png(out_dir / "mosaic_valid.png", (mosaic_valid * 255).astype("uint8"))
        save_mask_png(lesion_path, lesion)
        save_png(out_dir / "lesion_map_valid.png", (lesion_valid * 255).astype("uint8"))
        return {
            "type": "session_closed",
            "exports": {"mosaic_path": str(mosaic_path),
                        "lesion_map_path": str(lesion_path)},
        }

    # -- transport -----------------------------------------------------------

    def _connection(self, websocket):
        state: dict = {}
        for raw in websocket:
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                websocket.send(json.dumps({"type": "error", "message": "bad JSON"}))
                continue
            try:
                reply = self.handle_message(state, msg)
            except Exception as exc:  # keep the connection alive on bugs
                log.exception("unhandled error")
                reply = {"type": "error", "message": f"internal error: {exc}"}
            websocket.send(json.dumps(reply))

    def serve_forever(self):
        from websockets.sync.server import serve

        with serve(self._connection, self.host, self.port,
                   max_size=MAX_MESSAGE_BYTES) as server:
            log.info("listening on ws://%s:%d", self.host, self.port)
            server.serve_forever()

    def start_background(self):
        """Start in a daemon thread; returns (server, thread) for tests."""
        import threading

        from websockets.sync.server import serve

        server = serve(self._connection, self.host, self.port,
                       max_size=MAX_MESSAGE_BYTES)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        return server, thread
