"""Ground-truth categorization from segmentation masks.

Every non-ignored ground-truth box of a frame lands in exactly one of five
categories:

* ``F`` foreground: clearly visible and at least ``foreground_height`` px
  tall (the height a pedestrian has at the emergency-braking distance);
* ``B`` background: clearly visible but smaller;
* ``E`` occluded by the environment (buildings, vehicles, vegetation, ...,
  including the part of a truncated box that lies outside the image);
* ``C`` occluded by other pedestrians (crowd);
* ``A`` ambiguous: occlusion attributable to both sources at once.

The decision runs on three per-box ratios computed from the instance and
semantic grids, with the unclipped box area as the reference so that
truncation lowers visibility:

* ``visible_frac``  own-instance pixels / box area;
* ``env_frac``      (occluder-class pixels + out-of-image pixels) / box area;
* ``crowd_frac``    own-instance pixels / pedestrian-class pixels in the box
  (defined as 1.0 when the box contains no pedestrian-class pixel).

Boxes with ``visible_frac`` below ``occlusion_threshold`` are occlusion
candidates; candidates exceeding ``env_threshold`` / ``crowd_threshold``
form the preliminary environment / crowd sets.  A candidate in one
preliminary set whose other ratio clears the ambiguity-relaxed threshold
(factor ``ambiguity_factor``) moves to ``A``.  The ``literal_ambiguity``
switch instead re-tests each preliminary set against its *own* relaxed
threshold, which is vacuously true, so under that switch all occluded
boxes are reported as ambiguous; it exists for auditing the rule variants
and both readings are echoed in reports.

Candidates that clear neither preliminary threshold (occluder class not in
the configured set, for instance) fall back to the foreground/background
height split and are counted as ``residual_candidates``.

All threshold comparisons run on exact integer pixel counts against
rational thresholds; the float ratios are for reporting only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .geometry import as_ratio, clip
from .ingestion import Frame, GtBox, SegMasks, resolve_instance_id


class GtCategory(Enum):
    FOREGROUND = "F"
    BACKGROUND = "B"
    ENVIRONMENT = "E"
    CROWD = "C"
    AMBIGUOUS = "A"
    IGNORED = "ignored"


EVALUATED_CATEGORIES = (GtCategory.FOREGROUND, GtCategory.BACKGROUND,
                        GtCategory.ENVIRONMENT, GtCategory.CROWD,
                        GtCategory.AMBIGUOUS)


@dataclass(frozen=True)
class CategorizerConfig:
    occlusion_threshold: float = 0.6
    env_threshold: float = 0.7
    crowd_threshold: float = 0.5
    ambiguity_factor: float = 0.75
    foreground_height: int = 190
    occluder_classes: frozenset[int] = frozenset()
    pedestrian_class: int = 24
    instance_id_encoding: str = "cityscapes"
    literal_ambiguity: bool = False

    def __post_init__(self):
        for name in ("occlusion_threshold", "env_threshold", "crowd_threshold",
                     "ambiguity_factor"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.foreground_height <= 0:
            raise ConfigError("foreground_height must be positive")
        if self.pedestrian_class in self.occluder_classes:
            raise ConfigError("occluder classes must not contain the "
                              "pedestrian class")
        if self.instance_id_encoding not in ("cityscapes", "raw"):
            raise ConfigError("instance_id_encoding must be 'cityscapes' or 'raw'")


@dataclass(frozen=True)
class BoxVisibility:
    """Exact pixel counts behind the three visibility ratios of one box."""

    instance_id: int | None
    box_area: int          # unclipped
    out_of_image: int
    own_instance_px: int
    person_px: int
    occluder_px: int

    @property
    def visible_frac(self) -> float:
        return self.own_instance_px / self.box_area

    @property
    def env_frac(self) -> float:
        return (self.occluder_px + self.out_of_image) / self.box_area

    @property
    def crowd_frac(self) -> float:
        if self.person_px == 0:
            return 1.0
        return self.own_instance_px / self.person_px

    # exact comparisons used by the categorizer ---------------------------
    def visible_below(self, thr: Fraction) -> bool:
        return self.own_instance_px * thr.denominator < thr.numerator * self.box_area

    def env_above(self, thr: Fraction) -> bool:
        covered = self.occluder_px + self.out_of_image
        return covered * thr.denominator > thr.numerator * self.box_area

    def crowd_above(self, thr: Fraction) -> bool:
        if self.person_px == 0:
            return thr < 1
        return self.own_instance_px * thr.denominator > thr.numerator * self.person_px


def box_visibility(g: GtBox, masks: SegMasks, instance_id: int | None,
                   occluder_classes: frozenset[int],
                   pedestrian_class: int) -> BoxVisibility:
    """Count the mask pixels feeding a box's visibility ratios."""
    region = clip(g.bbox, masks.width, masks.height)
    area = g.bbox.area
    if region is None:
        return BoxVisibility(instance_id=instance_id, box_area=area,
                             out_of_image=area, own_instance_px=0,
                             person_px=0, occluder_px=0)
    sem = masks.semantic[region.y1:region.y2, region.x1:region.x2]
    inst = masks.instance[region.y1:region.y2, region.x1:region.x2]
    own = int(np.count_nonzero(inst == instance_id)) if instance_id is not None else 0
    person = int(np.count_nonzero(sem == pedestrian_class))
    if occluder_classes:
        occ = int(np.count_nonzero(np.isin(sem, sorted(occluder_classes))))
    else:
        occ = 0
    return BoxVisibility(instance_id=instance_id, box_area=area,
                         out_of_image=area - region.area,
                         own_instance_px=own, person_px=person,
                         occluder_px=occ)


def visibility_phi(g: GtBox, masks: SegMasks, instance_id: int | None,
                   pedestrian_class: int = 24) -> float:
    """Own-instance pixels over unclipped box area (0.0 when unresolved)."""
    return box_visibility(g, masks, instance_id, frozenset(),
                          pedestrian_class).visible_frac


def visibility_env(g: GtBox, masks: SegMasks, cfg: CategorizerConfig) -> float:
    """Occluder-class plus out-of-image pixels over unclipped box area."""
    return box_visibility(g, masks, None, cfg.occluder_classes,
                          cfg.pedestrian_class).env_frac


def visibility_crowd(g: GtBox, masks: SegMasks, instance_id: int | None,
                     cfg: CategorizerConfig) -> float:
    """Own-instance share of the pedestrian-class pixels inside the box."""
    return box_visibility(g, masks, instance_id, frozenset(),
                          cfg.pedestrian_class).crowd_frac


@dataclass
class GtPartition:
    """Category per ground-truth index plus the audit counters."""

    categories: list[GtCategory]
    visibility: list[BoxVisibility]
    residual_candidates: int = 0

    def indices(self, category: GtCategory) -> frozenset[int]:
        return frozenset(i for i, c in enumerate(self.categories)
                         if c is category)

    @property
    def foreground(self) -> frozenset[int]:
        return self.indices(GtCategory.FOREGROUND)

    @property
    def background(self) -> frozenset[int]:
        return self.indices(GtCategory.BACKGROUND)

    @property
    def environment(self) -> frozenset[int]:
        return self.indices(GtCategory.ENVIRONMENT)

    @property
    def crowd(self) -> frozenset[int]:
        return self.indices(GtCategory.CROWD)

    @property
    def ambiguous(self) -> frozenset[int]:
        return self.indices(GtCategory.AMBIGUOUS)

    @property
    def ignored(self) -> frozenset[int]:
        return self.indices(GtCategory.IGNORED)

    @property
    def relaxed_for(self) -> frozenset[int]:
        """Indices matched under the relaxed rule (foreground + background)."""
        return self.foreground | self.background

    def counts(self) -> dict[str, int]:
        out = {c.value: 0 for c in GtCategory}
        for c in self.categories:
            out[c.value] += 1
        return out


def occlusion_candidates(frame: Frame, cfg: CategorizerConfig) -> frozenset[int]:
    """Non-ignored boxes whose own-instance visibility is below the gate."""
    if frame.masks is None:
        raise ValueError(f"frame {frame.frame_id!r} has no masks loaded")
    thr = as_ratio(cfg.occlusion_threshold)
    members = set()
    for i, g in enumerate(frame.gt):
        if g.ignore:
            continue
        inst = resolve_instance_id(g, frame.masks, cfg.pedestrian_class,
                                   cfg.instance_id_encoding)
        vis = box_visibility(g, frame.masks, inst, frozenset(),
                             cfg.pedestrian_class)
        if vis.visible_below(thr):
            members.add(i)
    return frozenset(members)


def categorize_frame(frame: Frame, cfg: CategorizerConfig) -> GtPartition:
    """Assign every ground-truth box of the frame to exactly one category."""
    if frame.masks is None:
        raise ValueError(f"frame {frame.frame_id!r} has no masks loaded")
    occ_thr = as_ratio(cfg.occlusion_threshold)
    env_thr = as_ratio(cfg.env_threshold)
    crowd_thr = as_ratio(cfg.crowd_threshold)
    amb = as_ratio(cfg.ambiguity_factor)
    env_relaxed = env_thr * amb
    crowd_relaxed = crowd_thr * amb

    visibility: list[BoxVisibility] = []
    for g in frame.gt:
        inst = resolve_instance_id(g, frame.masks, cfg.pedestrian_class,
                                   cfg.instance_id_encoding)
        visibility.append(box_visibility(g, frame.masks, inst,
                                         cfg.occluder_classes,
                                         cfg.pedestrian_class))

    categories: list[GtCategory] = []
    residual = 0
    for g, vis in zip(frame.gt, visibility):
        if g.ignore:
            categories.append(GtCategory.IGNORED)
            continue
        if vis.visible_below(occ_thr):
            in_env = vis.env_above(env_thr)
            in_crowd = vis.crowd_above(crowd_thr)
            if cfg.literal_ambiguity:
                amb_env = in_env and vis.env_above(env_relaxed)
                amb_crowd = in_crowd and vis.crowd_above(crowd_relaxed)
            else:
                amb_env = in_env and vis.crowd_above(crowd_relaxed)
                amb_crowd = in_crowd and vis.env_above(env_relaxed)
            if amb_env or amb_crowd:
                categories.append(GtCategory.AMBIGUOUS)
                continue
            if in_env:
                categories.append(GtCategory.ENVIRONMENT)
                continue
            if in_crowd:
                categories.append(GtCategory.CROWD)
                continue
            residual += 1
        # clearly visible, or a candidate explained by neither source
        if g.bbox.height >= cfg.foreground_height:
            categories.append(GtCategory.FOREGROUND)
        else:
            categories.append(GtCategory.BACKGROUND)
    return GtPartition(categories=categories, visibility=visibility,
                       residual_candidates=residual)


def reasonable_subset(frame: Frame, min_height: int = 50,
                      min_visibility: float = 0.65) -> frozenset[int]:
    """Benchmark subset: non-ignored, tall enough, annotated visible enough.

    Visibility is the annotated visible-box share; boxes without a visible
    box count as fully visible.
    """
    thr = as_ratio(min_visibility)
    members = set()
    for i, g in enumerate(frame.gt):
        if g.ignore or g.bbox.height < min_height:
            continue
        if g.bbox_vis is None:
            members.add(i)
        elif g.bbox_vis.area * thr.denominator >= thr.numerator * g.bbox.area:
            members.add(i)
    return frozenset(members)


# ---------------------------------------------------------------------------
# Foreground height from braking distance

@dataclass(frozen=True)
class AebParams:
    """Inputs of the simplified emergency-braking stopping distance.

    ``focal_length_y`` back-solves to the shipped 190 px foreground height
    at the default 22 m distance for a 2048x1024 automotive camera.
    """

    pedestrian_height: float = 1.7   # m
    processing_time: float = 0.4     # s
    friction: float = 0.3
    velocity: float = 8.33           # m/s
    gravity: float = 9.81            # m/s^2
    added_distance: float = 2.0      # m, safety margin
    axle_to_front: float = 4.0       # m
    focal_length_y: float = 2459.0   # px

    def __post_init__(self):
        for name in ("pedestrian_height", "processing_time", "friction",
                     "gravity", "added_distance", "axle_to_front",
                     "focal_length_y"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.velocity < 0:
            raise ConfigError("velocity must be non-negative")


def aeb_distance(p: AebParams = AebParams()) -> float:
    """Stopping distance in meters; the two dynamic terms are ceiled."""
    braking = math.ceil(p.velocity ** 2 / (2 * p.friction * p.gravity))
    reaction = math.ceil(p.velocity * p.processing_time)
    return p.added_distance + p.axle_to_front + braking + reaction


def height_threshold(p: AebParams, distance: float) -> int:
    """Pinhole pixel height of a pedestrian at the given distance, rounded."""
    if distance <= 0:
        raise ConfigError("distance must be positive")
    return round(p.focal_length_y * p.pedestrian_height / distance)
