"""Decoding of annotation, detection and mask files into frames.

This is the only module that touches disk.  File formats:

* Ground truth: a JSON array with one object per frame,
  ``{"frame_id": str, "width": int, "height": int, "boxes": [...]}`` where
  each box has integer ``x1, y1, x2, y2``, optional ``vis`` (visible-part
  box), optional ``instance_id`` and a boolean ``ignore``.
* Detections: a JSON array of ``{"frame_id": str, "detections": [...]}``
  with integer corners and a ``score`` in (0, 1].  Repeated frame groups
  are merged in file order.
* Masks: one 16-bit single-channel binary portable graymap (P5, maxval
  65535, big-endian samples) per frame and kind, named
  ``<frame_id>_semantic.pgm`` / ``<frame_id>_instance.pgm``.  PNG files are
  accepted as a fallback when Pillow is installed.

Ground-truth boxes are stored with their full, unclipped extent; clipping
to the image happens at matching time, while categorization deliberately
works with the unclipped pixel count so that truncation registers as
occlusion by the environment.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DecodeError, DimensionMismatch, ParseError, SchemaError
from .geometry import BBox, clip


@dataclass(frozen=True)
class GtBox:
    """One annotated pedestrian: full box, optional visible part, flags."""

    bbox: BBox
    bbox_vis: BBox | None = None
    instance_id: int | None = None
    ignore: bool = False
    frame_id: str = ""

    def __post_init__(self):
        v = self.bbox_vis
        if v is not None and not (v.x1 >= self.bbox.x1 and v.y1 >= self.bbox.y1
                                  and v.x2 <= self.bbox.x2 and v.y2 <= self.bbox.y2):
            raise ValueError("visible-part box must lie inside the full box")

    @property
    def visibility(self) -> float:
        """Annotated visible fraction |vis| / |bbox|; 1.0 when no vis box."""
        if self.bbox_vis is None:
            return 1.0
        return self.bbox_vis.area / self.bbox.area


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    score: float
    frame_id: str = ""

    def __post_init__(self):
        if not (0.0 < self.score <= 1.0):
            raise ValueError(f"score must lie in (0, 1], got {self.score}")


@dataclass
class SegMasks:
    """Semantic class grid and instance-id grid of one frame (row-major y,x)."""

    semantic: np.ndarray
    instance: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        if self.semantic.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"semantic grid is {self.semantic.shape}, expected "
                f"{(self.height, self.width)}")
        if self.instance.shape != self.semantic.shape:
            raise DimensionMismatch(
                f"instance grid {self.instance.shape} does not match semantic "
                f"grid {self.semantic.shape}")

    def consistency_warnings(self, pedestrian_class: int,
                             encoding: str = "cityscapes") -> list[str]:
        """Non-fatal checks: pedestrian-class pixels should carry an instance id.

        Under the ``cityscapes`` encoding an instance id is class*1000+k, so
        values below 1000 mean "no individual instance"; under ``raw`` any
        non-zero value is an instance id.
        """
        ped = self.semantic == pedestrian_class
        if encoding == "cityscapes":
            has_inst = self.instance >= 1000
        else:
            has_inst = self.instance != 0
        warnings = []
        missing = int(np.count_nonzero(ped & ~has_inst))
        if missing:
            warnings.append(
                f"{missing} pedestrian-class pixels carry no instance id")
        if encoding == "cityscapes":
            stray = int(np.count_nonzero(
                ~ped & (self.instance // 1000 == pedestrian_class)))
            if stray:
                warnings.append(
                    f"{stray} pixels carry a pedestrian instance id but a "
                    "different semantic class")
        return warnings


@dataclass
class Frame:
    """Everything known about one image."""

    frame_id: str
    width: int
    height: int
    gt: list[GtBox] = field(default_factory=list)
    detections: list[Detection] = field(default_factory=list)
    masks: SegMasks | None = None


@dataclass
class GtFrameRecord:
    frame_id: str
    width: int
    height: int
    boxes: list[GtBox]


@dataclass
class DetFrameRecord:
    frame_id: str
    detections: list[Detection]


# ---------------------------------------------------------------------------
# JSON annotation / detection files

def _load_json(path: str):
    try:
        with open(path, "rb") as f:
            return json.load(f)
    except OSError as e:
        raise ParseError(e.strerror or str(e), path=path)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path=path, line=e.lineno, offset=e.colno)


def _require(obj: dict, key: str, path: str, frame_id: str | None = None):
    if key not in obj:
        raise SchemaError(f"missing field {key!r}", path=path, frame_id=frame_id)
    return obj[key]


def _as_int(value, what: str, path: str, frame_id: str | None):
    # JSON may deliver 5.0 for 5; accept integral floats, reject the rest.
    if isinstance(value, bool):
        raise SchemaError(f"{what} must be an integer, got {value!r}",
                          path=path, frame_id=frame_id)
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise SchemaError(f"{what} must be an integer, got {value!r}",
                      path=path, frame_id=frame_id)


def _read_bbox(obj: dict, path: str, frame_id: str) -> BBox:
    corners = [_as_int(_require(obj, k, path, frame_id), k, path, frame_id)
               for k in ("x1", "y1", "x2", "y2")]
    try:
        return BBox(*corners)
    except ValueError as e:
        raise SchemaError(str(e), path=path, frame_id=frame_id)


def load_ground_truth(path: str) -> list[GtFrameRecord]:
    """Parse a ground-truth file into per-frame records (file order kept)."""
    doc = _load_json(path)
    if not isinstance(doc, list):
        raise SchemaError("top-level value must be an array of frame objects",
                          path=path)
    records: dict[str, GtFrameRecord] = {}
    for entry in doc:
        if not isinstance(entry, dict):
            raise SchemaError("frame entry must be an object", path=path)
        frame_id = _require(entry, "frame_id", path)
        if not isinstance(frame_id, str):
            raise SchemaError("frame_id must be a string", path=path)
        width = _as_int(_require(entry, "width", path, frame_id), "width", path, frame_id)
        height = _as_int(_require(entry, "height", path, frame_id), "height", path, frame_id)
        if width <= 0 or height <= 0:
            raise SchemaError("frame dimensions must be positive", path=path,
                              frame_id=frame_id)
        boxes = []
        for raw in _require(entry, "boxes", path, frame_id):
            bbox = _read_bbox(raw, path, frame_id)
            vis = None
            if raw.get("vis") is not None:
                vis = _read_bbox(raw["vis"], path, frame_id)
            instance_id = raw.get("instance_id")
            if instance_id is not None:
                instance_id = _as_int(instance_id, "instance_id", path, frame_id)
            ignore = raw.get("ignore", False)
            if not isinstance(ignore, bool):
                raise SchemaError("ignore must be a boolean", path=path,
                                  frame_id=frame_id)
            try:
                boxes.append(GtBox(bbox=bbox, bbox_vis=vis, instance_id=instance_id,
                                   ignore=ignore, frame_id=frame_id))
            except ValueError as e:
                raise SchemaError(str(e), path=path, frame_id=frame_id)
        if frame_id in records:
            prev = records[frame_id]
            if (prev.width, prev.height) != (width, height):
                raise SchemaError("frame repeated with conflicting dimensions",
                                  path=path, frame_id=frame_id)
            prev.boxes.extend(boxes)
        else:
            records[frame_id] = GtFrameRecord(frame_id, width, height, boxes)
    return list(records.values())


def load_detections(path: str) -> list[DetFrameRecord]:
    """Parse a detection file; repeated frame groups are merged in order."""
    doc = _load_json(path)
    if not isinstance(doc, list):
        raise SchemaError("top-level value must be an array of frame objects",
                          path=path)
    records: dict[str, DetFrameRecord] = {}
    for entry in doc:
        if not isinstance(entry, dict):
            raise SchemaError("frame entry must be an object", path=path)
        frame_id = _require(entry, "frame_id", path)
        if not isinstance(frame_id, str):
            raise SchemaError("frame_id must be a string", path=path)
        dets = []
        for raw in _require(entry, "detections", path, frame_id):
            bbox = _read_bbox(raw, path, frame_id)
            score = _require(raw, "score", path, frame_id)
            if isinstance(score, bool) or not isinstance(score, (int, float)):
                raise SchemaError(f"score must be a number, got {score!r}",
                                  path=path, frame_id=frame_id)
            try:
                dets.append(Detection(bbox=bbox, score=float(score),
                                      frame_id=frame_id))
            except ValueError as e:
                raise SchemaError(str(e), path=path, frame_id=frame_id)
        if frame_id in records:
            records[frame_id].detections.extend(dets)
        else:
            records[frame_id] = DetFrameRecord(frame_id, dets)
    return list(records.values())


# ---------------------------------------------------------------------------
# Mask files

_PGM_TOKEN = re.compile(rb"^\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace/comment-delimited header tokens; return offset."""
    tokens = []
    pos = 0
    for _ in range(count):
        m = _PGM_TOKEN.match(data[pos:])
        if not m:
            raise DecodeError("truncated graymap header")
        tokens.append(m.group(1))
        pos += m.end(1)
    return tokens, pos


def read_pgm(path: str) -> np.ndarray:
    """Decode a binary (P5) portable graymap into a 2-D integer array.

    Samples are big-endian 16-bit when maxval > 255, else single bytes.
    """
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise DecodeError(f"{path}: {e.strerror or e}")
    tokens, pos = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise DecodeError(f"{path}: not a binary graymap (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DecodeError(f"{path}: non-numeric header field")
    if width <= 0 or height <= 0:
        raise DecodeError(f"{path}: non-positive dimensions")
    if not (0 < maxval < 65536):
        raise DecodeError(f"{path}: maxval {maxval} out of range")
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise DecodeError(f"{path}: raster has {len(raster)} bytes, "
                          f"expected {expected}")
    grid = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return grid.astype(np.int64)


def write_pgm(path: str, grid: np.ndarray) -> None:
    """Write a 2-D non-negative integer array as 16-bit big-endian P5."""
    arr = np.asarray(grid)
    if arr.ndim != 2:
        raise ValueError("mask grid must be 2-D")
    if arr.min() < 0 or arr.max() > 65535:
        raise ValueError("mask values must fit 16 bits")
    height, width = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        f.write(arr.astype(">u2").tobytes())


def read_mask(path: str) -> np.ndarray:
    """Read a mask grid; dispatches on extension (.pgm native, .png optional)."""
    if path.lower().endswith(".png"):
        try:
            from PIL import Image
        except ImportError:
            raise DecodeError(f"{path}: PNG masks need Pillow installed")
        try:
            with Image.open(path) as img:
                return np.asarray(img).astype(np.int64)
        except FileNotFoundError:
            raise DecodeError(f"{path}: file not found")
        except Exception as e:  # Pillow raises a zoo of decode errors
            raise DecodeError(f"{path}: {e}")
    return read_pgm(path)


def mask_paths(mask_dir: str, frame_id: str) -> tuple[str, str]:
    """Resolve the (semantic, instance) mask files for a frame.

    Prefers the native .pgm pair; falls back to .png when present.
    """
    pair = []
    for kind in ("semantic", "instance"):
        base = os.path.join(mask_dir, f"{frame_id}_{kind}")
        for ext in (".pgm", ".png"):
            if os.path.exists(base + ext):
                pair.append(base + ext)
                break
        else:
            raise DecodeError(
                f"frame {frame_id!r}: no {kind} mask under {mask_dir} "
                f"(looked for {base}.pgm / .png)")
    return pair[0], pair[1]


def load_masks(semantic_path: str, instance_path: str) -> SegMasks:
    semantic = read_mask(semantic_path)
    instance = read_mask(instance_path)
    if semantic.shape != instance.shape:
        raise DimensionMismatch(
            f"{semantic_path} is {semantic.shape[1]}x{semantic.shape[0]} but "
            f"{instance_path} is {instance.shape[1]}x{instance.shape[0]}")
    height, width = semantic.shape
    return SegMasks(semantic=semantic, instance=instance,
                    width=width, height=height)


# ---------------------------------------------------------------------------
# Instance resolution

def resolve_instance_id(g: GtBox, masks: SegMasks, pedestrian_class: int,
                        encoding: str = "cityscapes") -> int | None:
    """Instance id evaluated for a ground-truth box.

    An id stored on the annotation wins.  Otherwise the pedestrian instance
    covering the most pixels inside the box is chosen, ties broken toward
    the smaller id; None when no pedestrian instance pixel lies inside.
    """
    if g.instance_id is not None:
        return g.instance_id
    region = clip(g.bbox, masks.width, masks.height)
    if region is None:
        return None
    sem = masks.semantic[region.y1:region.y2, region.x1:region.x2]
    inst = masks.instance[region.y1:region.y2, region.x1:region.x2]
    candidates = inst[sem == pedestrian_class]
    if encoding == "cityscapes":
        candidates = candidates[candidates >= 1000]
    else:
        candidates = candidates[candidates != 0]
    if candidates.size == 0:
        return None
    ids, counts = np.unique(candidates, return_counts=True)
    best = counts.max()
    return int(ids[counts == best].min())


def serialize_ground_truth(records: list[GtFrameRecord]) -> list[dict]:
    """Inverse of load_ground_truth, used for round-trip checks and fixtures."""
    out = []
    for rec in records:
        boxes = []
        for b in rec.boxes:
            obj = dict(zip(("x1", "y1", "x2", "y2"), b.bbox.as_tuple()))
            if b.bbox_vis is not None:
                obj["vis"] = dict(zip(("x1", "y1", "x2", "y2"),
                                      b.bbox_vis.as_tuple()))
            if b.instance_id is not None:
                obj["instance_id"] = b.instance_id
            obj["ignore"] = b.ignore
            boxes.append(obj)
        out.append({"frame_id": rec.frame_id, "width": rec.width,
                    "height": rec.height, "boxes": boxes})
    return out


def serialize_detections(records: list[DetFrameRecord]) -> list[dict]:
    out = []
    for rec in records:
        dets = [dict(zip(("x1", "y1", "x2", "y2"), d.bbox.as_tuple()),
                     score=d.score) for d in rec.detections]
        out.append({"frame_id": rec.frame_id, "detections": dets})
    return out
