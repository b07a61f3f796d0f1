"""Curves over confidence thresholds and the log-average miss-rate family.

The curve is exact: one point per distinct detection score at or above the
sweep floor ``c_min``, plus the floor itself.  Every point carries the
dataset miss rate per ground-truth category, false positives per image and
ghost detections per image, all computed with strict score > threshold
filtering.

A log-average score is the geometric mean of the miss rate over a set of
confidence levels.  The level set picks, for each of nine reference rates
(log-spaced from 0.01 to 1), the threshold with the largest rate that does
not exceed the reference; duplicate picks collapse, so the set may hold
fewer than nine levels.  Using the false-positive rate yields the familiar
log-average miss rate; using the ghost rate instead weights the average by
the errors that matter most in an automated-driving setting.  Miss rates
are clamped to a small floor before taking logs so perfect points do not
collapse the mean to zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .categorize import GtPartition
from .errors import EmptyDataset
from .fp_errors import FpCategory, label_detections
from .ingestion import Frame
from .matching import FrameMatchContext
from .parallel import worker_count

CATEGORY_KEYS = ("F", "B", "E", "C", "A")
REASONABLE_KEY = "reasonable"
ALL_MR_KEYS = CATEGORY_KEYS + (REASONABLE_KEY,)

#: Nine reference rates, 0.25 apart in log10 from 1e-2 to 1.
FPPI_REFS = tuple(10.0 ** (-2.0 + 0.25 * k) for k in range(9))

DEFAULT_MR_FLOOR = 1e-4


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    miss_rate: dict[str, float | None]
    fppi: float
    gdpi: float


@dataclass
class SweepResult:
    points: list[CurvePoint]
    category_totals: dict[str, int]
    n_images: int
    c_min: float
    #: per-threshold raw counts, columns tp_F..tp_A, tp_reasonable, fp, ghost
    count_table: np.ndarray | None = None


def mr_filtered(tp_in_category: int, fn_in_category: int) -> float | None:
    """Miss rate within one category; None when the category is empty."""
    total = tp_in_category + fn_in_category
    if total == 0:
        return None
    return fn_in_category / total


def _frame_steps(frame: Frame, partition: GtPartition,
                 reasonable: frozenset[int], c_min: float,
                 center_offset: float, proximity_iou: float,
                 ignore_iom: bool) -> tuple[np.ndarray, np.ndarray]:
    """Step function of one frame's counts over its own score breakpoints.

    Returns (breakpoints ascending, counts[T, 8]) with columns
    tp_F, tp_B, tp_E, tp_C, tp_A, tp_reasonable, fp, ghost; the state at
    breakpoint b holds for thresholds in [b, next breakpoint).
    """
    ctx = FrameMatchContext(frame, partition.relaxed_for, partition.crowd,
                            ignore_iom=ignore_iom)
    labels = label_detections(frame, center_offset, proximity_iou)
    codes = [c.value for c in partition.categories]

    breakpoints = [c_min]
    breakpoints.extend(sorted({d.score for d in frame.detections
                               if d.score > c_min}))
    counts = np.zeros((len(breakpoints), 8), dtype=np.int64)
    for t, b in enumerate(breakpoints):
        result = ctx.match(b)
        row = counts[t]
        for g in result.tp_gt:
            code = codes[g]
            if code in CATEGORY_KEYS:
                row[CATEGORY_KEYS.index(code)] += 1
            if g in reasonable:
                row[5] += 1
        row[6] = len(result.fp)
        row[7] = sum(1 for d in result.fp if labels[d] is FpCategory.GHOST)
    return np.asarray(breakpoints, dtype=float), counts


def sweep_thresholds(frames: list[Frame], partitions: dict[str, GtPartition],
                     *, c_min: float = 0.01,
                     reasonable: dict[str, frozenset[int]] | None = None,
                     center_offset: float = 0.2, proximity_iou: float = 0.25,
                     ignore_iom: bool = False,
                     workers: int | None = None) -> SweepResult:
    """Evaluate the dataset at every distinct score >= c_min plus c_min."""
    if not frames:
        raise EmptyDataset("no frames to sweep")
    reasonable = reasonable or {}

    thresholds = sorted({c_min} | {d.score for f in frames
                                   for d in f.detections if d.score >= c_min})
    grid = np.asarray(thresholds, dtype=float)

    def steps_for(frame: Frame):
        return _frame_steps(frame, partitions[frame.frame_id],
                            reasonable.get(frame.frame_id, frozenset()),
                            c_min, center_offset, proximity_iou, ignore_iom)

    n_workers = workers if workers is not None else worker_count()
    if n_workers > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            frame_steps = list(pool.map(steps_for, frames))
    else:
        frame_steps = [steps_for(f) for f in frames]

    totals = np.zeros((len(grid), 8), dtype=np.int64)
    for breakpoints, counts in frame_steps:
        idx = np.searchsorted(breakpoints, grid, side="right") - 1
        totals += counts[idx]

    category_totals = {key: 0 for key in ALL_MR_KEYS}
    for frame in frames:
        for code in (c.value for c in partitions[frame.frame_id].categories):
            if code in category_totals:
                category_totals[code] += 1
        category_totals[REASONABLE_KEY] += len(
            reasonable.get(frame.frame_id, frozenset()))

    points = []
    for t, c in enumerate(thresholds):
        row = totals[t]
        mr = {}
        for k, key in enumerate(ALL_MR_KEYS):
            total = category_totals[key]
            mr[key] = mr_filtered(int(row[k]), total - int(row[k]))
        points.append(CurvePoint(threshold=c, miss_rate=mr,
                                 fppi=int(row[6]) / len(frames),
                                 gdpi=int(row[7]) / len(frames)))

    _check_sweep_invariants(totals)
    return SweepResult(points=points, category_totals=category_totals,
                       n_images=len(frames), c_min=c_min, count_table=totals)


def _check_sweep_invariants(totals: np.ndarray) -> None:
    # raising the threshold can only lose true positives and false positives
    for col in range(7):
        if np.any(np.diff(totals[:, col]) > 0):
            raise AssertionError("count increased along rising thresholds")
    if np.any(totals[:, 7] > totals[:, 6]):
        raise AssertionError("ghost count exceeded false-positive count")


# ---------------------------------------------------------------------------
# Confidence-level selection and log averages

@dataclass(frozen=True)
class LevelPick:
    reference: float
    threshold: float
    rate: float
    satisfied: bool  # False when even the lowest rate exceeds the reference


def select_levels(points: list[CurvePoint], rate_of, refs=FPPI_REFS) -> list[LevelPick]:
    """Per reference rate, the threshold with the largest rate <= reference.

    Ties on the rate resolve to the smallest threshold (the point with the
    most detections kept).  When no point satisfies the bound the
    largest-threshold point (lowest rate) is taken and flagged.
    """
    picks = []
    for ref in refs:
        best = None
        for p in points:
            r = rate_of(p)
            if r <= ref and (best is None or r > rate_of(best)
                             or (r == rate_of(best)
                                 and p.threshold < best.threshold)):
                best = p
        if best is None:
            fallback = max(points, key=lambda p: p.threshold)
            picks.append(LevelPick(ref, fallback.threshold,
                                   rate_of(fallback), False))
        else:
            picks.append(LevelPick(ref, best.threshold, rate_of(best), True))
    return picks


def confidence_levels(points: list[CurvePoint], rate_of,
                      refs=FPPI_REFS) -> list[float]:
    """The distinct selected thresholds, ascending (duplicates collapse)."""
    return sorted({pick.threshold for pick in select_levels(points, rate_of, refs)})


def log_average(values: list[float], floor: float = DEFAULT_MR_FLOOR) -> float:
    """Geometric mean of the values clamped below by floor.

    A single value is returned as-is (clamped) so the one-level identity is
    exact rather than an exp(log(.)) round trip.
    """
    if not values:
        raise ValueError("log average of an empty set")
    if len(values) == 1:
        return max(values[0], floor)
    return math.exp(sum(math.log(max(v, floor)) for v in values) / len(values))


def flamr(points: list[CurvePoint], category: str,
          levels: list[float] | None = None, *,
          refs=FPPI_REFS, floor: float = DEFAULT_MR_FLOOR) -> float | None:
    """Log-average miss rate of one category over FPPI-derived levels.

    None when the category is empty dataset-wide.  Passing ``levels``
    reuses a precomputed level set.
    """
    if levels is None:
        levels = confidence_levels(points, lambda p: p.fppi, refs)
    by_threshold = {p.threshold: p for p in points}
    values = []
    for c in levels:
        mr = by_threshold[c].miss_rate[category]
        if mr is None:
            return None
        values.append(mr)
    return log_average(values, floor)


def flamr_ghost(points: list[CurvePoint], category: str, *,
                refs=FPPI_REFS, floor: float = DEFAULT_MR_FLOOR) -> float | None:
    """Log-average miss rate over levels picked by the ghost rate instead."""
    levels = confidence_levels(points, lambda p: p.gdpi, refs)
    return flamr(points, category, levels, floor=floor)


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    miss_rate: float
    gdpi: float
    miss_at_c_min: bool  # the sweep floor already misses this category


def operating_point(points: list[CurvePoint],
                    category: str = "F") -> OperatingPoint | None:
    """Largest threshold attaining the minimum miss rate of the category.

    Thresholds at or below this one cannot add misses in the category (its
    miss rate never decreases with the threshold), which makes the value a
    safe upper bound for deployment.  None when the category is empty.
    """
    usable = [p for p in points if p.miss_rate[category] is not None]
    if not usable:
        return None
    best = min(p.miss_rate[category] for p in usable)
    star = max((p for p in usable if p.miss_rate[category] == best),
               key=lambda p: p.threshold)
    first = min(usable, key=lambda p: p.threshold)
    return OperatingPoint(threshold=star.threshold, miss_rate=best,
                          gdpi=star.gdpi,
                          miss_at_c_min=first.miss_rate[category] != 0.0)
