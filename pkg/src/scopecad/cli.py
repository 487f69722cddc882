"""Command-line entry points.

    scopecad synth-slide --seed 7 --dims 2000x1500 --blobs 40 --out slides/
    scopecad simulate --slide s.png --mask s_mask.png --path path.json \
        --backend threshold --edge-width 120 --strategy mirror --out run/
    scopecad mosaic-bench --frames frames/ --truth truth.json --stride 1 \
        --algo m3 --out bench.csv
    scopecad edge-sweep --slide s.png --mask s_mask.png --widths 0..160:40 \
        --backend threshold --out sweep.csv
    scopecad serve --port 8765 --slide-dir slides/

A JSON config file mirroring the create_session config can seed ``simulate``
and ``serve``; explicit flags override file values.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import click
import numpy as np

from .pipeline import (
    Session,
    SessionConfig,
    run_edge_sweep,
    run_mosaic_experiment,
)
from .raster import Rect, load_mask_png, load_png, save_mask_png, save_png
from .registration import RegistrationConfig
from .segment import ExternalBackend, OracleBackend, ThresholdBackend
from .server import PipelineServer
from .slidesim import (
    FrameEvent,
    VirtualSlide,
    generate_path_frames,
    load_path,
    synthetic_slide,
)


def _parse_dims(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def _parse_widths(text: str) -> list[int]:
    if ".." in text:
        span, _, step = text.partition(":")
        lo, _, hi = span.partition("..")
        step = int(step) if step else 1
        return list(range(int(lo), int(hi) + 1, step))
    return [int(tok) for tok in text.split(",")]


def _load_config(config_path) -> dict:
    if not config_path:
        return {}
    with open(config_path) as fh:
        return json.load(fh)


def _build_backend(name: str, slide: VirtualSlide | None, opts: dict):
    if name == "threshold":
        return ThresholdBackend(
            threshold=int(opts.get("threshold", 200)),
            min_component_area=int(opts.get("min_component_area", 0)),
        )
    if name == "oracle":
        if slide is None or slide.gt_mask is None:
            raise click.UsageError("oracle backend requires --mask")
        return OracleBackend(slide.gt_mask)
    if name == "external":
        model = opts.get("model")
        if not model:
            raise click.UsageError("external backend requires --model")
        return ExternalBackend(model)
    raise click.UsageError(f"unknown backend {name!r}")


@click.group()
def main():
    """Real-time virtual-microscope mosaicking and lesion overlay."""


@main.command("synth-slide")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dims", default="2000x1500", show_default=True)
@click.option("--blobs", type=int, default=40, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def synth_slide_cmd(seed, dims, blobs, out):
    """Write a synthetic slide PNG plus ground-truth mask PNG."""
    w, h = _parse_dims(dims)
    slide = synthetic_slide(seed, w, h, blobs)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_png(out_dir / f"{slide.id}.png", slide.image)
    save_mask_png(out_dir / f"{slide.id}_mask.png", slide.gt_mask)
    meta = {"id": slide.id, "seed": seed, "width": w, "height": h, "blobs": blobs}
    (out_dir / f"{slide.id}.json").write_text(json.dumps(meta, indent=2))
    click.echo(f"wrote {out_dir / slide.id}.png ({w}x{h}, {blobs} blobs)")


@main.command("simulate")
@click.option("--slide", "slide_path", type=click.Path(exists=True), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True))
@click.option("--path", "path_file", type=click.Path(exists=True), required=True)
@click.option("--backend", default="threshold", show_default=True)
@click.option("--model", type=click.Path(exists=True))
@click.option("--threshold", type=int, default=200, show_default=True)
@click.option("--min-area", type=int, default=0, show_default=True)
@click.option("--edge-width", type=int, default=None)
@click.option("--strategy", type=click.Choice(["zero", "mirror"]), default=None)
@click.option("--distort", is_flag=True)
@click.option("--viewport", default="640x480", show_default=True)
@click.option("--fps", type=float, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True)
def simulate_cmd(slide_path, mask_path, path_file, backend, model, threshold,
                 min_area, edge_width, strategy, distort, viewport, fps,
                 config_path, out):
    """Run a full session along a pan path, writing all per-frame outputs."""
    file_cfg = _load_config(config_path)
    edge_width = edge_width if edge_width is not None else int(file_cfg.get("edge_width", 120))
    strategy = strategy or file_cfg.get("strategy", "mirror")
    fps = fps if fps is not None else float(file_cfg.get("fps", 2.0))
    reg = file_cfg.get("registration", {})

    mask = load_mask_png(mask_path) if mask_path else None
    slide = VirtualSlide(load_png(slide_path), mask, Path(slide_path).stem)
    vw, vh = _parse_dims(viewport)
    centers = load_path(path_file)
    frames = list(generate_path_frames(slide, centers, vw, vh, fps, distort))

    backend_obj = _build_backend(
        backend, slide,
        {"threshold": threshold, "min_component_area": min_area, "model": model})
    if isinstance(backend_obj, OracleBackend):
        backend_obj.origin = (frames[0].true_placement.x, frames[0].true_placement.y)

    config = SessionConfig(
        edge_width=edge_width, strategy=strategy, fps=fps,
        registration=RegistrationConfig(**reg) if reg else RegistrationConfig())
    session = Session("cli", backend_obj, config)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for event in frames:
        outputs = session.step(event.pixels)
        save_png(out_dir / f"overlay_{event.index:04d}.png", outputs.labeled_view)
        rows.append({"frame": event.index, "status": outputs.status,
                     **{f"{k}_ms": v for k, v in outputs.timings_ms.items()}})

    (mosaic, mosaic_valid), (lesion, lesion_valid) = session.exports()
    save_png(out_dir / "mosaic.png", mosaic)
    save_png(out_dir / "mosaic_valid.png", (mosaic_valid * 255).astype(np.uint8))
    save_mask_png(out_dir / "lesion_map.png", lesion)
    save_png(out_dir / "lesion_map_valid.png", (lesion_valid * 255).astype(np.uint8))
    with open(out_dir / "timings.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    total = sum(sum(v for k, v in r.items() if k.endswith("_ms")) for r in rows)
    click.echo(f"processed {len(rows)} frames, mean {total / len(rows):.1f} ms/frame")


@main.command("mosaic-bench")
@click.option("--frames", "frames_dir", type=click.Path(exists=True), required=True)
@click.option("--truth", "truth_file", type=click.Path(exists=True), required=True)
@click.option("--stride", type=click.Choice(["1", "5"]), default="1", show_default=True)
@click.option("--algo", type=click.Choice(["m1", "m2", "m3"]), default="m3", show_default=True)
@click.option("--out", type=click.Path(), required=True)
def mosaic_bench_cmd(frames_dir, truth_file, stride, algo, out):
    """Pairwise mosaic benchmark over a recorded frame directory.

    The truth JSON holds {"placements": [[x, y], ...]} top-left corners (or
    [x, y, w, h] rects) aligned with the sorted PNG filenames.
    """
    paths = sorted(Path(frames_dir).glob("*.png"))
    if len(paths) < 2:
        raise click.UsageError("need at least two frame PNGs")
    with open(truth_file) as fh:
        placements = json.load(fh)["placements"]
    if len(placements) != len(paths):
        raise click.UsageError(
            f"{len(placements)} placements for {len(paths)} frames")
    events = []
    for i, (path, placed) in enumerate(zip(paths, placements)):
        pixels = load_png(path)
        h, w = pixels.shape[:2]
        rect = Rect(int(placed[0]), int(placed[1]), w, h)
        events.append(FrameEvent(i, i * 500, pixels, rect))

    report = run_mosaic_experiment(events, int(stride), algo)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair", "iou", "error"])
        for i, iou in enumerate(report["ious"]):
            err = 1 if (iou is None or iou < 0.9) else 0
            writer.writerow([i, "" if iou is None else f"{iou:.6f}", err])
    click.echo(
        f"{algo} stride {stride}: {report['error_count']} errors "
        f"({report['na_count']} N/A) over {report['pairs']} pairs, "
        f"{report['mean_ms_per_frame']:.0f} ms/frame")


@main.command("edge-sweep")
@click.option("--slide", "slide_path", type=click.Path(exists=True), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True), required=True)
@click.option("--widths", default="0..160:40", show_default=True)
@click.option("--backend", default="threshold", show_default=True)
@click.option("--model", type=click.Path(exists=True))
@click.option("--threshold", type=int, default=200, show_default=True)
@click.option("--min-area", type=int, default=150, show_default=True)
@click.option("--tile", default="640x480", show_default=True)
@click.option("--out", type=click.Path(), required=True)
def edge_sweep_cmd(slide_path, mask_path, widths, backend, model, threshold,
                   min_area, tile, out):
    """Edge-extension sweep table over deleted/unchanged/zero/mirror."""
    slide = VirtualSlide(load_png(slide_path), load_mask_png(mask_path),
                         Path(slide_path).stem)
    backend_obj = _build_backend(
        backend, slide,
        {"threshold": threshold, "min_component_area": min_area, "model": model})
    tw, th = _parse_dims(tile)
    rows = run_edge_sweep(slide, backend_obj, _parse_widths(widths),
                          tile_w=tw, tile_h=th)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        click.echo(f"w={row['width']:>4} {row['strategy']:>10}: "
                   f"pixel IoU {row['pixel_iou']:.4f} lesion IoU {row['lesion_iou']:.4f}")


@main.command("serve")
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--slide-dir", type=click.Path(exists=True))
@click.option("--export-dir", type=click.Path(), default="exports", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
def serve_cmd(port, host, slide_dir, export_dir, config_path):
    """Serve the streaming API for the interactive viewer."""
    _load_config(config_path)  # validated for JSON errors; per-session configs
    import logging

    logging.basicConfig(level=logging.INFO)
    PipelineServer(slide_dir, export_dir, host, port).serve_forever()


if __name__ == "__main__":
    main()
