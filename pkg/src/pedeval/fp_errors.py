"""Taxonomy of false positives: scale errors, localization errors, ghosts.

A false positive is

* a scale error ``S`` when its center aligns with some non-ignored
  ground-truth box (offset within ``center_offset`` times that box's width
  and height) -- the detector saw the right pedestrian at the wrong size;
* a localization error ``L`` when it is not a scale error but overlaps
  some non-ignored ground-truth box with IoU >= ``proximity_iou``;
* a ghost detection ``G`` otherwise: unrelated to any pedestrian, the kind
  of false positive that actually disrupts a driving system.

Center alignment is evaluated on the unclipped boxes (it is a statement
about geometry, not about visible pixels); the proximity IoU uses the same
clipped pixel-set IoU as the matcher.  Both predicates quantify over all
non-ignored ground truth of the frame, whatever its occlusion category.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import EmptyDataset
from .geometry import as_ratio, center_aligned, clip, iou_pair, pair_at_least
from .ingestion import Frame
from .matching import match_frame


class FpCategory(Enum):
    SCALE = "S"
    LOCALIZATION = "L"
    GHOST = "G"


@dataclass(frozen=True)
class FpPartition:
    scale: frozenset[int]
    localization: frozenset[int]
    ghost: frozenset[int]

    def counts(self) -> dict[str, int]:
        return {"S": len(self.scale), "L": len(self.localization),
                "G": len(self.ghost)}


def label_detections(frame: Frame, center_offset: float = 0.2,
                     proximity_iou: float = 0.25) -> list[FpCategory]:
    """Threshold-independent label each detection would get as a false positive."""
    offset = as_ratio(center_offset)
    near = as_ratio(proximity_iou)
    real_gt = [g.bbox for g in frame.gt if not g.ignore]
    real_gt_clipped = [clip(b, frame.width, frame.height) for b in real_gt]
    labels = []
    for det in frame.detections:
        if any(center_aligned(g, det.bbox, offset) for g in real_gt):
            labels.append(FpCategory.SCALE)
            continue
        dclip = clip(det.bbox, frame.width, frame.height)
        if any(pair_at_least(iou_pair(g, dclip), near)
               for g in real_gt_clipped):
            labels.append(FpCategory.LOCALIZATION)
        else:
            labels.append(FpCategory.GHOST)
    return labels


def categorize_fps(fp: frozenset[int], frame: Frame, *,
                   center_offset: float = 0.2,
                   proximity_iou: float = 0.25) -> FpPartition:
    """Split a matcher's false-positive set into the three categories."""
    labels = label_detections(frame, center_offset, proximity_iou)
    groups = {FpCategory.SCALE: set(), FpCategory.LOCALIZATION: set(),
              FpCategory.GHOST: set()}
    for d in fp:
        groups[labels[d]].add(d)
    return FpPartition(scale=frozenset(groups[FpCategory.SCALE]),
                       localization=frozenset(groups[FpCategory.LOCALIZATION]),
                       ghost=frozenset(groups[FpCategory.GHOST]))


def gdpi(frames: list[Frame], c: float,
         relaxed_for: dict[str, frozenset[int]] | None = None,
         crowd: dict[str, frozenset[int]] | None = None, *,
         center_offset: float = 0.2, proximity_iou: float = 0.25,
         ignore_iom: bool = False) -> float:
    """Ghost detections per image at threshold c (all images count)."""
    if not frames:
        raise EmptyDataset("ghost rate needs at least one image")
    relaxed_for = relaxed_for or {}
    crowd = crowd or {}
    ghosts = 0
    for frame in frames:
        result = match_frame(frame, c,
                             relaxed_for.get(frame.frame_id, frozenset()),
                             crowd.get(frame.frame_id, frozenset()),
                             ignore_iom=ignore_iom)
        part = categorize_fps(result.fp, frame, center_offset=center_offset,
                              proximity_iou=proximity_iou)
        ghosts += len(part.ghost)
    return ghosts / len(frames)
