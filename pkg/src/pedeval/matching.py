"""Assignment of detections to ground truth at a confidence threshold.

Rules, applied to the boxes of one frame after clipping both sides to the
image:

* Only detections with score strictly above the threshold take part.
* Each detection is assigned the non-ignored ground-truth box with the
  highest IoU (exact ties go to the smaller ground-truth index).  The
  assignment witnesses that box when the IoU exceeds 0.5.
* A witnessed box is a true positive; among several witnesses the one with
  the highest IoU wins (ties: higher score, then smaller detection index)
  and the losers are false positives.
* Relaxed rule: a box in the supplied ``relaxed_for`` set that stayed
  unmatched still counts as a true positive when some participating
  detection overlaps it with IoU > 0.5 and every ground-truth box with a
  strictly higher IoU for that detection belongs to the supplied crowd
  set.  The detection backing such a match is consumed (not a false
  positive); it may back several relaxed matches at once.
* A leftover detection whose overlap with some ignore-flagged box exceeds
  0.5 is set aside as ignored, neither true nor false positive.  The
  overlap measure is IoU by default; ``ignore_iom=True`` switches to
  intersection over the smaller area, for comparability with tooling that
  forgives detections lying inside large ignore regions.

All IoU comparisons are exact integer comparisons of (intersection, union)
pixel counts, so threshold boundaries and ties are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .geometry import BBox, clip, intersection_area, iou_pair, pair_exceeds, pair_greater
from .ingestion import Detection, Frame

_HALF = Fraction(1, 2)


@dataclass(frozen=True)
class MatchResult:
    """TP pairs and FN/FP/ignored index sets for one frame at one threshold."""

    threshold: float
    tp: tuple[tuple[int, int], ...]          # (gt index, detection index)
    fn: frozenset[int]
    fp: frozenset[int]
    ignored_dets: frozenset[int]

    @property
    def tp_gt(self) -> frozenset[int]:
        return frozenset(g for g, _ in self.tp)

    @property
    def tp_dets(self) -> frozenset[int]:
        return frozenset(d for _, d in self.tp)


def filter_detections(dets: list[Detection], c: float) -> list[Detection]:
    """Detections scoring strictly above c, original order preserved."""
    return [d for d in dets if d.score > c]


class FrameMatchContext:
    """Per-frame precomputation reused when matching at many thresholds.

    Everything that does not depend on the threshold (clipped boxes, the
    IoU table, each detection's best ground-truth box, ignore overlaps) is
    computed once.
    """

    def __init__(self, frame: Frame, relaxed_for: frozenset[int] = frozenset(),
                 crowd: frozenset[int] = frozenset(), *,
                 ignore_iom: bool = False):
        self.frame = frame
        self.crowd = frozenset(crowd)
        w, h = frame.width, frame.height

        self.real_gt = [i for i, g in enumerate(frame.gt) if not g.ignore]
        self.relaxed_for = frozenset(relaxed_for) & set(self.real_gt)
        gt_clipped = {i: clip(frame.gt[i].bbox, w, h) for i in self.real_gt}
        ignore_clipped = [clip(g.bbox, w, h) for g in frame.gt if g.ignore]
        det_clipped = [clip(d.bbox, w, h) for d in frame.detections]

        # iou[(g, d)] as exact (intersection, union) counts
        self.iou: dict[tuple[int, int], tuple[int, int]] = {}
        # per detection: assigned gt (max IoU, tie -> smaller index), and the
        # best IoU over gt outside the crowd set (relaxation blockers)
        self.assigned: list[int | None] = []
        self.assigned_pair: list[tuple[int, int]] = []
        self.best_noncrowd: list[tuple[int, int]] = []
        for d_idx, dbox in enumerate(det_clipped):
            best_g, best = None, (0, 0)
            best_nc = (0, 0)
            for g_idx in self.real_gt:
                pair = iou_pair(gt_clipped[g_idx], dbox)
                self.iou[(g_idx, d_idx)] = pair
                if best_g is None or pair_greater(pair, best):
                    best_g, best = g_idx, pair
                if g_idx not in self.crowd and pair_greater(pair, best_nc):
                    best_nc = pair
            self.assigned.append(best_g)
            self.assigned_pair.append(best)
            self.best_noncrowd.append(best_nc)

        self.ignore_overlap = [
            self._overlaps_ignore(dbox, ignore_clipped, ignore_iom)
            for dbox in det_clipped]

    @staticmethod
    def _overlaps_ignore(dbox: BBox | None, ignore_boxes, iom: bool) -> bool:
        if dbox is None:
            return False
        for ibox in ignore_boxes:
            if ibox is None:
                continue
            if iom:
                inter = intersection_area(dbox, ibox)
                if 2 * inter > min(dbox.area, ibox.area):
                    return True
            elif pair_exceeds(iou_pair(dbox, ibox), _HALF):
                return True
        return False

    def match(self, c: float) -> MatchResult:
        frame = self.frame
        live = [d for d in range(len(frame.detections))
                if frame.detections[d].score > c]

        # strict phase: best witness per assigned ground-truth box
        winner: dict[int, int] = {}
        for d in live:
            g = self.assigned[d]
            if g is None or not pair_exceeds(self.assigned_pair[d], _HALF):
                continue
            cur = winner.get(g)
            if cur is None or self._witness_beats(d, cur, g):
                winner[g] = d

        tp = [(g, d) for g, d in winner.items()]
        consumed = set(winner.values())

        # relaxed phase: unmatched foreground/background boxes may reuse a
        # detection whose better candidates are all crowd-occluded
        for g in sorted(self.relaxed_for - winner.keys()):
            pick = None
            for d in live:
                pair = self.iou[(g, d)]
                if not pair_exceeds(pair, _HALF):
                    continue
                if pair_greater(self.best_noncrowd[d], pair):
                    continue  # blocked by a non-crowd box with higher IoU
                if pick is None or self._relax_beats(d, pick, g):
                    pick = d
            if pick is not None:
                tp.append((g, pick))
                consumed.add(pick)

        ignored = frozenset(d for d in live
                            if d not in consumed and self.ignore_overlap[d])
        fp = frozenset(d for d in live
                       if d not in consumed and d not in ignored)
        fn = frozenset(g for g in self.real_gt if g not in {p[0] for p in tp})
        return MatchResult(threshold=c, tp=tuple(sorted(tp)), fn=fn, fp=fp,
                           ignored_dets=ignored)

    def _witness_beats(self, d: int, cur: int, g: int) -> bool:
        a, b = self.iou[(g, d)], self.iou[(g, cur)]
        if pair_greater(a, b):
            return True
        if pair_greater(b, a):
            return False
        sa = self.frame.detections[d].score
        sb = self.frame.detections[cur].score
        if sa != sb:
            return sa > sb
        return d < cur

    _relax_beats = _witness_beats


def match_frame(frame: Frame, c: float,
                relaxed_for: frozenset[int] = frozenset(),
                crowd: frozenset[int] = frozenset(), *,
                ignore_iom: bool = False) -> MatchResult:
    """One-shot matching of a frame at a single threshold."""
    return FrameMatchContext(frame, relaxed_for, crowd,
                             ignore_iom=ignore_iom).match(c)


@dataclass
class DatasetMatch:
    """Aggregated counts plus the per-frame results behind them."""

    threshold: float
    tp_count: int = 0
    fn_count: int = 0
    fp_count: int = 0
    per_frame: dict[str, MatchResult] = field(default_factory=dict)


def match_dataset(frames: list[Frame], c: float,
                  relaxed_for: dict[str, frozenset[int]] | None = None,
                  crowd: dict[str, frozenset[int]] | None = None, *,
                  ignore_iom: bool = False) -> DatasetMatch:
    """Fold match_frame over a dataset; per-frame sets keyed by frame_id."""
    relaxed_for = relaxed_for or {}
    crowd = crowd or {}
    agg = DatasetMatch(threshold=c)
    for frame in frames:
        result = match_frame(frame, c,
                             relaxed_for.get(frame.frame_id, frozenset()),
                             crowd.get(frame.frame_id, frozenset()),
                             ignore_iom=ignore_iom)
        agg.per_frame[frame.frame_id] = result
        agg.tp_count += len(result.tp_gt)
        agg.fn_count += len(result.fn)
        agg.fp_count += len(result.fp)
    return agg
