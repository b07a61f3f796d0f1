"""Synthetic scenes with analytically known categories, plus slow oracles.

Scenes stack rectangular actors back to front on a flat road: pedestrian
rectangles carrying an instance id and occluder rectangles carrying a
semantic class.  Because everything is rectangular, each box's visibility
ratios follow from rectangle arithmetic alone, so the generator can emit
the expected category of every pedestrian without ever rasterizing.  The
raster masks are painted in the same order and must agree.

The oracle functions re-evaluate matching, categorization and the
false-positive split directly from their defining conditions (nested
quantifier loops, literal per-box pixel counts, Fraction arithmetic).
They are deliberately slow and structure-free; production code is tested
against them for exact equality.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .categorize import (BoxVisibility, CategorizerConfig, GtCategory,
                         GtPartition)
from .geometry import BBox, as_ratio, clip, iou_pair
from .ingestion import (DetFrameRecord, Detection, Frame, GtBox,
                        GtFrameRecord, SegMasks, serialize_detections,
                        serialize_ground_truth, write_pgm)
from .labels import CITYSCAPES_LABELS
from .matching import MatchResult

ROAD = CITYSCAPES_LABELS["road"]
PERSON = CITYSCAPES_LABELS["person"]

#: Classes the generator may paint, with "terrain" deliberately outside the
#: default occluder set so some candidates stay unexplained.
OCCLUDER_CHOICES = (CITYSCAPES_LABELS["building"], CITYSCAPES_LABELS["car"],
                    CITYSCAPES_LABELS["vegetation"],
                    CITYSCAPES_LABELS["terrain"])


@dataclass(frozen=True)
class PedActor:
    rect: BBox
    instance_id: int
    ignore: bool = False
    declare_instance: bool = True  # False: annotation omits the id


@dataclass(frozen=True)
class OccluderActor:
    rect: BBox
    sem_class: int


@dataclass(frozen=True)
class DetectionNoise:
    jitter: int = 2
    scale_noise: float = 0.15
    duplicate_rate: float = 0.2
    ghost_rate: float = 0.4


@dataclass(frozen=True)
class SceneSpec:
    width: int = 64
    height: int = 64
    actors: tuple = ()          # paint order: first = furthest back
    noise: DetectionNoise = DetectionNoise()
    seed: int = 0
    frame_id: str = "scene"


@dataclass
class RenderedScene:
    frame: Frame
    expected: GtPartition   # from rectangle arithmetic, not from the masks
    config: CategorizerConfig


#: Foreground height used by generated scenes; the road-vehicle default is
#: far taller than a 64 px canvas, which would leave the foreground empty.
SYNTH_CONFIG = CategorizerConfig(
    foreground_height=32,
    occluder_classes=frozenset({CITYSCAPES_LABELS["building"],
                                CITYSCAPES_LABELS["car"],
                                CITYSCAPES_LABELS["vegetation"]}),
    pedestrian_class=PERSON,
)


def render(spec: SceneSpec, cfg: CategorizerConfig = SYNTH_CONFIG) -> RenderedScene:
    """Paint the masks, perturb detections, and derive expected categories."""
    sem = np.full((spec.height, spec.width), ROAD, dtype=np.int64)
    inst = np.zeros((spec.height, spec.width), dtype=np.int64)
    for actor in spec.actors:
        r = clip(actor.rect, spec.width, spec.height)
        if r is None:
            continue
        if isinstance(actor, PedActor):
            sem[r.y1:r.y2, r.x1:r.x2] = cfg.pedestrian_class
            inst[r.y1:r.y2, r.x1:r.x2] = actor.instance_id
        else:
            sem[r.y1:r.y2, r.x1:r.x2] = actor.sem_class
            inst[r.y1:r.y2, r.x1:r.x2] = 0

    peds = [a for a in spec.actors if isinstance(a, PedActor)]
    gt = [GtBox(bbox=p.rect,
                instance_id=p.instance_id if p.declare_instance else None,
                ignore=p.ignore, frame_id=spec.frame_id)
          for p in peds]
    masks = SegMasks(semantic=sem, instance=inst,
                     width=spec.width, height=spec.height)
    frame = Frame(frame_id=spec.frame_id, width=spec.width, height=spec.height,
                  gt=gt, detections=_perturbed_detections(spec, peds),
                  masks=masks)
    expected = _expected_partition(spec, peds, cfg)
    return RenderedScene(frame=frame, expected=expected, config=cfg)


# ---------------------------------------------------------------------------
# Analytic expectations via coordinate compression

def _cell_owners(spec: SceneSpec):
    """Grid cells covering the image with the index of the topmost actor."""
    xs = {0, spec.width}
    ys = {0, spec.height}
    for a in spec.actors:
        xs.update((min(max(a.rect.x1, 0), spec.width),
                   min(max(a.rect.x2, 0), spec.width)))
        ys.update((min(max(a.rect.y1, 0), spec.height),
                   min(max(a.rect.y2, 0), spec.height)))
    xs, ys = sorted(xs), sorted(ys)
    cells = []
    for xi in range(len(xs) - 1):
        for yi in range(len(ys) - 1):
            x1, x2 = xs[xi], xs[xi + 1]
            y1, y2 = ys[yi], ys[yi + 1]
            if x1 == x2 or y1 == y2:
                continue
            owner = None
            for idx in range(len(spec.actors) - 1, -1, -1):
                r = spec.actors[idx].rect
                if r.x1 <= x1 < r.x2 and r.y1 <= y1 < r.y2:
                    owner = idx
                    break
            cells.append((x1, y1, x2, y2, owner))
    return cells


def _expected_partition(spec: SceneSpec, peds: list[PedActor],
                        cfg: CategorizerConfig) -> GtPartition:
    cells = _cell_owners(spec)
    actor_of = list(spec.actors)

    visibility = []
    for ped in peds:
        box = ped.rect
        own_by_instance: dict[int, int] = {}
        person = 0
        occ = 0
        in_image = 0
        for (x1, y1, x2, y2, owner) in cells:
            if not (box.x1 <= x1 and x2 <= box.x2
                    and box.y1 <= y1 and y2 <= box.y2):
                continue
            area = (x2 - x1) * (y2 - y1)
            in_image += area
            if owner is None:
                continue
            actor = actor_of[owner]
            if isinstance(actor, PedActor):
                person += area
                own_by_instance[actor.instance_id] = (
                    own_by_instance.get(actor.instance_id, 0) + area)
            elif actor.sem_class == cfg.pedestrian_class:
                person += area  # group region: person class, no instance
            elif actor.sem_class in cfg.occluder_classes:
                occ += area
        if ped.declare_instance:
            resolved = ped.instance_id
        elif own_by_instance:
            top = max(own_by_instance.values())
            resolved = min(i for i, n in own_by_instance.items() if n == top)
        else:
            resolved = None
        own = own_by_instance.get(resolved, 0) if resolved is not None else 0
        visibility.append(BoxVisibility(
            instance_id=resolved, box_area=box.area,
            out_of_image=box.area - in_image, own_instance_px=own,
            person_px=person, occluder_px=occ))

    categories, residual = _classify_counts(peds, visibility, cfg)
    return GtPartition(categories=categories, visibility=visibility,
                       residual_candidates=residual)


def _classify_counts(peds: list[PedActor], visibility: list[BoxVisibility],
                     cfg: CategorizerConfig) -> tuple[list[GtCategory], int]:
    """Category rules restated over exact Fractions (oracle arithmetic)."""
    occ_t = as_ratio(cfg.occlusion_threshold)
    env_t = as_ratio(cfg.env_threshold)
    crowd_t = as_ratio(cfg.crowd_threshold)
    amb = as_ratio(cfg.ambiguity_factor)
    categories = []
    residual = 0
    for ped, v in zip(peds, visibility):
        if ped.ignore:
            categories.append(GtCategory.IGNORED)
            continue
        visible = Fraction(v.own_instance_px, v.box_area)
        env = Fraction(v.occluder_px + v.out_of_image, v.box_area)
        crowd = (Fraction(v.own_instance_px, v.person_px)
                 if v.person_px else Fraction(1))
        if visible < occ_t:
            in_env = env > env_t
            in_crowd = crowd > crowd_t
            if cfg.literal_ambiguity:
                amb_env = in_env and env > env_t * amb
                amb_crowd = in_crowd and crowd > crowd_t * amb
            else:
                amb_env = in_env and crowd > crowd_t * amb
                amb_crowd = in_crowd and env > env_t * amb
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
        if ped.rect.height >= cfg.foreground_height:
            categories.append(GtCategory.FOREGROUND)
        else:
            categories.append(GtCategory.BACKGROUND)
    return categories, residual


# ---------------------------------------------------------------------------
# Detection perturbation

def _perturbed_detections(spec: SceneSpec, peds: list[PedActor]) -> list[Detection]:
    rng = random.Random(spec.seed ^ 0x5EED)
    noise = spec.noise
    dets: list[Detection] = []

    def emit(box: BBox):
        dets.append(Detection(bbox=box, score=round(rng.uniform(0.02, 1.0), 3),
                              frame_id=spec.frame_id))

    def jittered(rect: BBox) -> BBox:
        j = noise.jitter
        scale = 1.0 + rng.uniform(-noise.scale_noise, noise.scale_noise)
        w = max(1, round(rect.width * scale))
        h = max(1, round(rect.height * scale))
        x1 = rect.x1 + rng.randint(-j, j)
        y1 = rect.y1 + rng.randint(-j, j)
        return BBox(x1, y1, x1 + w, y1 + h)

    for ped in peds:
        emit(jittered(ped.rect))
        if rng.random() < noise.duplicate_rate:
            emit(jittered(ped.rect))
    while rng.random() < noise.ghost_rate and len(dets) < 8:
        w = rng.randint(3, 16)
        h = rng.randint(6, 24)
        x1 = rng.randint(0, max(0, spec.width - w - 1))
        y1 = rng.randint(0, max(0, spec.height - h - 1))
        emit(BBox(x1, y1, x1 + w, y1 + h))
    return dets[:8]


def random_scene(seed: int, *, canvas: int = 64, max_peds: int = 6,
                 max_occluders: int = 3,
                 noise: DetectionNoise = DetectionNoise()) -> SceneSpec:
    """A seeded random layered scene within the given budgets."""
    rng = random.Random(seed)
    actors = []
    next_instance = PERSON * 1000 + 1
    for _ in range(rng.randint(0, max_peds)):
        w = rng.randint(4, 20)
        h = rng.randint(10, 56)
        x1 = rng.randint(-6, canvas - 4)
        y1 = rng.randint(-6, canvas - 6)
        actors.append(PedActor(rect=BBox(x1, y1, x1 + w, y1 + h),
                               instance_id=next_instance,
                               ignore=rng.random() < 0.1,
                               declare_instance=rng.random() < 0.7))
        next_instance += 1
    for _ in range(rng.randint(0, max_occluders)):
        w = rng.randint(6, 40)
        h = rng.randint(6, 40)
        x1 = rng.randint(-6, canvas - 4)
        y1 = rng.randint(-6, canvas - 4)
        cls = rng.choice(OCCLUDER_CHOICES + (PERSON,))
        actors.append(OccluderActor(rect=BBox(x1, y1, x1 + w, y1 + h),
                                    sem_class=cls))
    rng.shuffle(actors)
    return SceneSpec(width=canvas, height=canvas, actors=tuple(actors),
                     noise=noise, seed=seed, frame_id=f"scene_{seed:06d}")


# ---------------------------------------------------------------------------
# Brute-force oracles

def oracle_match(frame: Frame, c: float,
                 relaxed_for: frozenset[int] = frozenset(),
                 crowd: frozenset[int] = frozenset(), *,
                 ignore_iom: bool = False) -> MatchResult:
    """Direct evaluation of the matching conditions, O(|G|^2 |D|^2)."""
    half = Fraction(1, 2)
    real = [i for i, g in enumerate(frame.gt) if not g.ignore]
    live = [i for i, d in enumerate(frame.detections) if d.score > c]
    gtc = {i: clip(frame.gt[i].bbox, frame.width, frame.height) for i in real}
    dtc = {i: clip(frame.detections[i].bbox, frame.width, frame.height)
           for i in live}

    table: dict[tuple[int, int], Fraction] = {}

    def ratio(g, d):
        if (g, d) not in table:
            inter, union = iou_pair(gtc[g], dtc[d])
            table[(g, d)] = Fraction(inter, union) if union else Fraction(0)
        return table[(g, d)]

    def is_witness(g, d):
        # IoU above half and no other box strictly better (ties: smaller index)
        if ratio(g, d) <= half:
            return False
        for h in real:
            if h == g:
                continue
            if ratio(h, d) > ratio(g, d):
                return False
            if ratio(h, d) == ratio(g, d) and h < g:
                return False
        return True

    def better(d, e, g):
        if ratio(g, d) != ratio(g, e):
            return ratio(g, d) > ratio(g, e)
        sd = frame.detections[d].score
        se = frame.detections[e].score
        if sd != se:
            return sd > se
        return d < e

    tp = []
    consumed = set()
    for g in real:
        witnesses = [d for d in live if is_witness(g, d)]
        if not witnesses:
            continue
        win = witnesses[0]
        for d in witnesses[1:]:
            if better(d, win, g):
                win = d
        tp.append((g, win))
        consumed.add(win)

    matched = {g for g, _ in tp}
    for g in sorted(relaxed_for):
        if g in matched or g not in real:
            continue
        candidates = []
        for d in live:
            if ratio(g, d) <= half:
                continue
            if all(h in crowd for h in real if ratio(h, d) > ratio(g, d)):
                candidates.append(d)
        if candidates:
            pick = candidates[0]
            for d in candidates[1:]:
                if better(d, pick, g):
                    pick = d
            tp.append((g, pick))
            consumed.add(pick)
            matched.add(g)

    ignored = set()
    for d in live:
        if d in consumed or dtc[d] is None:
            continue
        for i, g in enumerate(frame.gt):
            if not g.ignore:
                continue
            ibox = clip(g.bbox, frame.width, frame.height)
            if ibox is None:
                continue
            inter, union = iou_pair(ibox, dtc[d])
            if ignore_iom:
                over = Fraction(inter, min(ibox.area, dtc[d].area))
            else:
                over = Fraction(inter, union) if union else Fraction(0)
            if over > half:
                ignored.add(d)
                break

    fp = frozenset(d for d in live if d not in consumed and d not in ignored)
    fn = frozenset(g for g in real if g not in matched)
    return MatchResult(threshold=c, tp=tuple(sorted(tp)), fn=fn, fp=fp,
                       ignored_dets=frozenset(ignored))


def oracle_categorize(frame: Frame, cfg: CategorizerConfig) -> GtPartition:
    """Literal per-box pixel enumeration of the category rules."""
    masks = frame.masks
    visibility = []
    for g in frame.gt:
        area = g.bbox.area
        region = clip(g.bbox, masks.width, masks.height)
        if region is None:
            # a declared id still wins for a fully off-image box
            visibility.append(BoxVisibility(g.instance_id, area, area, 0, 0, 0))
            continue
        sem = masks.semantic[region.y1:region.y2, region.x1:region.x2]
        inst = masks.instance[region.y1:region.y2, region.x1:region.x2]
        if g.instance_id is not None:
            resolved = g.instance_id
        else:
            values = inst[sem == cfg.pedestrian_class]
            if cfg.instance_id_encoding == "cityscapes":
                values = values[values >= 1000]
            else:
                values = values[values != 0]
            if values.size:
                tallies: dict[int, int] = {}
                for v in values.tolist():
                    tallies[v] = tallies.get(v, 0) + 1
                top = max(tallies.values())
                resolved = min(v for v, n in tallies.items() if n == top)
            else:
                resolved = None
        own = int((inst == resolved).sum()) if resolved is not None else 0
        person = int((sem == cfg.pedestrian_class).sum())
        occ = sum(int((sem == cls).sum()) for cls in sorted(cfg.occluder_classes))
        visibility.append(BoxVisibility(
            instance_id=resolved, box_area=area,
            out_of_image=area - region.area, own_instance_px=own,
            person_px=person, occluder_px=occ))

    pseudo = [PedActor(rect=g.bbox, instance_id=0, ignore=g.ignore)
              for g in frame.gt]
    categories, residual = _classify_counts(pseudo, visibility, cfg)
    return GtPartition(categories=categories, visibility=visibility,
                       residual_candidates=residual)


def oracle_fp_partition(fp: frozenset[int], frame: Frame,
                        center_offset: float = 0.2,
                        proximity_iou: float = 0.25) -> dict[str, frozenset[int]]:
    """Direct evaluation of the scale / localization / ghost predicates."""
    lam_o = as_ratio(center_offset)
    lam_i = as_ratio(proximity_iou)
    real = [g.bbox for g in frame.gt if not g.ignore]
    out = {"S": set(), "L": set(), "G": set()}
    for d in fp:
        dbox = frame.detections[d].bbox
        scale = False
        for g in real:
            off_x = abs(Fraction(g.x1 + g.x2, 2) - Fraction(dbox.x1 + dbox.x2, 2))
            off_y = abs(Fraction(g.y1 + g.y2, 2) - Fraction(dbox.y1 + dbox.y2, 2))
            if off_x <= lam_o * g.width and off_y <= lam_o * g.height:
                scale = True
                break
        if scale:
            out["S"].add(d)
            continue
        near = False
        dclip = clip(dbox, frame.width, frame.height)
        for g in real:
            gclip = clip(g, frame.width, frame.height)
            inter, union = iou_pair(gclip, dclip)
            if union and Fraction(inter, union) >= lam_i:
                near = True
                break
        out["L" if near else "G"].add(d)
    return {k: frozenset(v) for k, v in out.items()}


# ---------------------------------------------------------------------------
# Fixture writing (doubles as documentation of the input formats)

def write_fixture(out_dir: str, scenes: list[RenderedScene], *,
                  c_min: float = 0.01) -> dict[str, str]:
    """Write scenes as a ready-to-run dataset; returns the file paths."""
    mask_dir = os.path.join(out_dir, "masks")
    os.makedirs(mask_dir, exist_ok=True)

    gt_records = [GtFrameRecord(s.frame.frame_id, s.frame.width,
                                s.frame.height, s.frame.gt) for s in scenes]
    det_records = [DetFrameRecord(s.frame.frame_id, s.frame.detections)
                   for s in scenes]

    gt_path = os.path.join(out_dir, "ground_truth.json")
    det_path = os.path.join(out_dir, "detections.json")
    with open(gt_path, "w", encoding="utf-8") as f:
        json.dump(serialize_ground_truth(gt_records), f, indent=2)
        f.write("\n")
    with open(det_path, "w", encoding="utf-8") as f:
        json.dump(serialize_detections(det_records), f, indent=2)
        f.write("\n")

    for scene in scenes:
        frame = scene.frame
        write_pgm(os.path.join(mask_dir, f"{frame.frame_id}_semantic.pgm"),
                  frame.masks.semantic)
        write_pgm(os.path.join(mask_dir, f"{frame.frame_id}_instance.pgm"),
                  frame.masks.instance)

    cfg = scenes[0].config if scenes else SYNTH_CONFIG
    legend_by_id = {v: k for k, v in CITYSCAPES_LABELS.items()}
    config = {
        "ground_truth": gt_path,
        "detections": det_path,
        "mask_dir": mask_dir,
        "output_dir": os.path.join(out_dir, "out"),
        "labels": {
            "legend": CITYSCAPES_LABELS,
            "pedestrian": legend_by_id[cfg.pedestrian_class],
            "occluders": sorted(legend_by_id[c] for c in cfg.occluder_classes),
            "instance_id_encoding": cfg.instance_id_encoding,
        },
        "categorizer": {
            "occlusion_visibility": cfg.occlusion_threshold,
            "environment_coverage": cfg.env_threshold,
            "crowd_share": cfg.crowd_threshold,
            "ambiguity_factor": cfg.ambiguity_factor,
            "foreground_height_px": cfg.foreground_height,
        },
        "metrics": {"c_min": c_min},
    }
    config_path = os.path.join(out_dir, "config.json")
    with open(config_path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
        f.write("\n")
    return {"ground_truth": gt_path, "detections": det_path,
            "mask_dir": mask_dir, "config": config_path}
