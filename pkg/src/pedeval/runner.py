"""Evaluation orchestration: load, categorize, sweep, emit artifacts.

Artifacts are produced as exact strings so that every front end (CLI,
HTTP service) writes byte-identical files for identical inputs and
configuration.  Nothing time- or host-dependent goes into them.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .categorize import GtPartition, categorize_frame, reasonable_subset
from .config import RunConfig
from .errors import ConfigError, DimensionMismatch, PedevalError, SchemaError
from .fp_errors import categorize_fps
from .ingestion import (Frame, load_detections, load_ground_truth, load_masks,
                        mask_paths)
from .matching import match_frame
from .metrics import (CurvePoint, confidence_levels, flamr, operating_point,
                      select_levels, sweep_thresholds)
from .parallel import worker_count

ALL_MR_KEYS = ("F", "B", "E", "C", "A", "reasonable")


@dataclass
class LoadedDataset:
    frames: list[Frame]
    warnings: list[str] = field(default_factory=list)


def load_dataset(cfg: RunConfig) -> LoadedDataset:
    """Read ground truth, detections and masks into frames (GT file order)."""
    for path in (cfg.ground_truth, cfg.detections):
        if not os.path.exists(path):
            raise ConfigError(f"input file does not exist: {path}")
    if not os.path.isdir(cfg.mask_dir):
        raise ConfigError(f"mask directory does not exist: {cfg.mask_dir}")

    gt_records = load_ground_truth(cfg.ground_truth)
    det_records = load_detections(cfg.detections)
    by_id = {rec.frame_id: rec for rec in gt_records}
    dets_by_id = {}
    for rec in det_records:
        if rec.frame_id not in by_id:
            raise SchemaError("detections reference a frame that is not in "
                              "the ground truth", path=cfg.detections,
                              frame_id=rec.frame_id)
        dets_by_id[rec.frame_id] = rec.detections

    def build(rec):
        sem_path, inst_path = mask_paths(cfg.mask_dir, rec.frame_id)
        masks = load_masks(sem_path, inst_path)
        if (masks.width, masks.height) != (rec.width, rec.height):
            raise DimensionMismatch(
                f"frame {rec.frame_id!r}: masks are "
                f"{masks.width}x{masks.height} but the frame is "
                f"{rec.width}x{rec.height}")
        return Frame(frame_id=rec.frame_id, width=rec.width, height=rec.height,
                     gt=rec.boxes, detections=dets_by_id.get(rec.frame_id, []),
                     masks=masks)

    workers = worker_count()
    if workers > 1 and len(gt_records) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            frames = list(pool.map(build, gt_records))
    else:
        frames = [build(rec) for rec in gt_records]

    warnings = []
    ped = cfg.labels.pedestrian_id()
    for frame in frames:
        for msg in frame.masks.consistency_warnings(
                ped, cfg.labels.instance_id_encoding):
            warnings.append(f"frame {frame.frame_id!r}: {msg}")
        for i, g in enumerate(frame.gt):
            if g.instance_id is not None and not np.any(
                    frame.masks.instance == g.instance_id):
                warnings.append(
                    f"frame {frame.frame_id!r}: box {i} declares instance "
                    f"{g.instance_id} which is absent from the instance mask")
    return LoadedDataset(frames=frames, warnings=warnings)


def categorize_dataset(frames: list[Frame], cfg: RunConfig) -> dict[str, GtPartition]:
    ccfg = cfg.categorizer_config()

    def job(frame):
        return frame.frame_id, categorize_frame(frame, ccfg)

    workers = worker_count()
    if workers > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return dict(pool.map(job, frames))
    return dict(job(f) for f in frames)


def reasonable_by_frame(frames: list[Frame], cfg: RunConfig) -> dict[str, frozenset[int]]:
    return {f.frame_id: reasonable_subset(f, cfg.reasonable.min_height,
                                          cfg.reasonable.min_visibility)
            for f in frames}


# ---------------------------------------------------------------------------
# Canonical artifact rendering

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _cardinalities(frames, partitions, reasonable) -> tuple[dict, int]:
    counts = {k: 0 for k in ("F", "B", "E", "C", "A", "ignored")}
    residual = 0
    for frame in frames:
        part = partitions[frame.frame_id]
        for cat in part.categories:
            key = cat.value if cat.value in counts else "ignored"
            counts[key] += 1
        residual += part.residual_candidates
    counts["reasonable"] = sum(len(v) for v in reasonable.values())
    counts["total_non_ignored"] = sum(
        counts[k] for k in ("F", "B", "E", "C", "A"))
    return counts, residual


def render_gt_categories(frames, partitions, reasonable, cfg: RunConfig) -> str:
    counts, residual = _cardinalities(frames, partitions, reasonable)
    frames_out = []
    for frame in frames:
        part = partitions[frame.frame_id]
        members = reasonable[frame.frame_id]
        boxes = []
        for i, g in enumerate(frame.gt):
            vis = part.visibility[i]
            boxes.append({
                "index": i,
                "category": part.categories[i].value,
                "ignore": g.ignore,
                "height": g.bbox.height,
                "instance_id": vis.instance_id,
                "visible_frac": vis.visible_frac,
                "env_frac": vis.env_frac,
                "crowd_frac": vis.crowd_frac,
                "reasonable": i in members,
            })
        frames_out.append({"frame_id": frame.frame_id, "boxes": boxes,
                           "residual_candidates": part.residual_candidates})
    return _dump_json({
        "config": cfg.echo(),
        "cardinalities": counts,
        "residual_candidates": residual,
        "frames": frames_out,
    })


def render_fp_categories(frames, partitions, cfg: RunConfig) -> str:
    c_min = cfg.metrics.c_min
    summary = {"S": 0, "L": 0, "G": 0, "fp_total": 0, "ignored_detections": 0}
    frames_out = []
    for frame in frames:
        part = partitions[frame.frame_id]
        result = match_frame(frame, c_min, part.relaxed_for, part.crowd,
                             ignore_iom=cfg.matcher.ignore_iom)
        split = categorize_fps(result.fp, frame,
                               center_offset=cfg.fp.center_offset,
                               proximity_iou=cfg.fp.proximity_iou)
        summary["S"] += len(split.scale)
        summary["L"] += len(split.localization)
        summary["G"] += len(split.ghost)
        summary["fp_total"] += len(result.fp)
        summary["ignored_detections"] += len(result.ignored_dets)
        frames_out.append({
            "frame_id": frame.frame_id,
            "tp": [list(p) for p in result.tp],
            "fn": sorted(result.fn),
            "scale": sorted(split.scale),
            "localization": sorted(split.localization),
            "ghost": sorted(split.ghost),
            "ignored_detections": sorted(result.ignored_dets),
        })
    return _dump_json({
        "config": cfg.echo(),
        "threshold": c_min,
        "summary": summary,
        "frames": frames_out,
    })


def _curve_rows(points: list[CurvePoint]) -> list[dict]:
    return [{"threshold": p.threshold,
             "miss_rate": {k: p.miss_rate[k] for k in ALL_MR_KEYS},
             "fppi": p.fppi, "gdpi": p.gdpi} for p in points]


def render_curve_csv(points: list[CurvePoint], rate: str) -> str:
    header = ["threshold"] + [f"mr_{k}" for k in ALL_MR_KEYS] + [rate]
    lines = [",".join(header)]
    for p in points:
        cells = [repr(p.threshold)]
        for k in ALL_MR_KEYS:
            v = p.miss_rate[k]
            cells.append("na" if v is None else repr(v))
        cells.append(repr(p.fppi if rate == "fppi" else p.gdpi))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass
class EvaluationOutput:
    artifacts: dict[str, str]
    summary: dict
    warnings: list[str]


def run_evaluation(cfg: RunConfig, *, loader=None) -> EvaluationOutput:
    dataset = (loader or load_dataset)(cfg)
    frames = dataset.frames
    partitions = categorize_dataset(frames, cfg)
    reasonable = reasonable_by_frame(frames, cfg)

    sweep = sweep_thresholds(
        frames, partitions,
        c_min=cfg.metrics.c_min,
        reasonable=reasonable,
        center_offset=cfg.fp.center_offset,
        proximity_iou=cfg.fp.proximity_iou,
        ignore_iom=cfg.matcher.ignore_iom,
    )
    points = sweep.points
    refs = tuple(cfg.metrics.fppi_refs)
    floor = cfg.metrics.miss_rate_floor

    fppi_levels = confidence_levels(points, lambda p: p.fppi, refs)
    gdpi_levels = confidence_levels(points, lambda p: p.gdpi, refs)
    flamr_by_cat = {k: flamr(points, k, fppi_levels, floor=floor)
                    for k in ("F", "B", "E", "C", "A")}
    flamr_ghost_by_cat = {k: flamr(points, k, gdpi_levels, floor=floor)
                          for k in ("F", "B", "E", "C", "A")}
    lamr_reasonable = flamr(points, "reasonable", fppi_levels, floor=floor)
    op = operating_point(points, "F")

    counts, residual = _cardinalities(frames, partitions, reasonable)
    metrics_block = {
        "lamr_reasonable": lamr_reasonable,
        "flamr": flamr_by_cat,
        "flamr_ghost": flamr_ghost_by_cat,
        "undefined_categories": sorted(
            k for k, v in flamr_by_cat.items() if v is None),
        "confidence_levels_fppi": fppi_levels,
        "confidence_levels_gdpi": gdpi_levels,
        "fppi_level_picks": [
            {"reference": p.reference, "threshold": p.threshold,
             "rate": p.rate, "satisfied": p.satisfied}
            for p in select_levels(points, lambda p: p.fppi, refs)],
        "operating_point": None if op is None else {
            "threshold": op.threshold,
            "miss_rate_foreground": op.miss_rate,
            "gdpi": op.gdpi,
            "miss_at_c_min": op.miss_at_c_min,
        },
    }
    report = {
        "tool": {"name": "pedeval", "version": __version__},
        "config": cfg.echo(),
        "dataset": {
            "frames": len(frames),
            "ground_truth_boxes": sum(len(f.gt) for f in frames),
            "detections": sum(len(f.detections) for f in frames),
            "cardinalities": counts,
            "residual_candidates": residual,
            "warnings": dataset.warnings,
        },
        "metrics": metrics_block,
        "curve": _curve_rows(points),
    }

    artifacts = {}
    if "json" in cfg.output_formats:
        artifacts["report.json"] = _dump_json(report)
        artifacts["gt_categories.json"] = render_gt_categories(
            frames, partitions, reasonable, cfg)
        artifacts["fp_categories.json"] = render_fp_categories(
            frames, partitions, cfg)
    if "csv" in cfg.output_formats:
        artifacts["curve_fppi.csv"] = render_curve_csv(points, "fppi")
        artifacts["curve_gdpi.csv"] = render_curve_csv(points, "gdpi")

    summary = {
        "frames": len(frames),
        "cardinalities": counts,
        "lamr_reasonable": lamr_reasonable,
        "flamr": flamr_by_cat,
        "flamr_ghost": flamr_ghost_by_cat,
        "operating_point": metrics_block["operating_point"],
    }
    return EvaluationOutput(artifacts=artifacts, summary=summary,
                            warnings=dataset.warnings)


def run_categorization(cfg: RunConfig, *, loader=None) -> EvaluationOutput:
    dataset = (loader or load_dataset)(cfg)
    partitions = categorize_dataset(dataset.frames, cfg)
    reasonable = reasonable_by_frame(dataset.frames, cfg)
    counts, residual = _cardinalities(dataset.frames, partitions, reasonable)
    artifacts = {"gt_categories.json": render_gt_categories(
        dataset.frames, partitions, reasonable, cfg)}
    summary = {"frames": len(dataset.frames), "cardinalities": counts,
               "residual_candidates": residual}
    return EvaluationOutput(artifacts=artifacts, summary=summary,
                            warnings=dataset.warnings)


@dataclass
class Diagnostic:
    level: str  # "error" | "warning"
    message: str


def run_validation(cfg: RunConfig) -> list[Diagnostic]:
    """Dry-run schema, dimension and legend checks without evaluating."""
    diagnostics: list[Diagnostic] = []
    legend_values = set(cfg.labels.legend.values())
    cfg.labels.pedestrian_id()  # raises ConfigError on unknown names
    for cls in cfg.labels.occluder_ids():
        if cls not in legend_values:
            diagnostics.append(Diagnostic(
                "warning", f"occluder class {cls} is not in the legend"))
    try:
        dataset = load_dataset(cfg)
    except ConfigError:
        raise
    except PedevalError as e:
        diagnostics.append(Diagnostic("error", str(e)))
        return diagnostics
    for msg in dataset.warnings:
        diagnostics.append(Diagnostic("warning", msg))
    for frame in dataset.frames:
        unknown = sorted(set(np.unique(frame.masks.semantic).tolist())
                         - legend_values)
        if unknown:
            diagnostics.append(Diagnostic(
                "warning", f"frame {frame.frame_id!r}: semantic classes "
                f"{unknown} are not in the legend"))
    return diagnostics
