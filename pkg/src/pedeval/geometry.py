"""Axis-aligned bounding boxes with integer pixel-set semantics.

A box covers the half-open pixel set ``{(x, y) : x1 <= x < x2, y1 <= y < y2}``,
so areas and intersections are exact integer counts.  All threshold
comparisons offered here are carried out in integer / rational arithmetic;
floating point only appears in values returned for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


def as_ratio(value) -> Fraction:
    """Exact rational view of a config threshold.

    Floats are interpreted through their decimal repr (0.2 -> 1/5) because
    thresholds are decimal by intent, not binary.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


@dataclass(frozen=True)
class BBox:
    """Non-empty pixel rectangle; corners are integers, x2/y2 exclusive."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValueError(f"box corners must be integers, got {v!r}")
        if self.x1 >= self.x2 or self.y1 >= self.y2:
            raise ValueError(
                f"empty box ({self.x1},{self.y1},{self.x2},{self.y2}): "
                "need x1 < x2 and y1 < y2")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)


def intersect(a: BBox, b: BBox) -> BBox | None:
    """Pixel-set intersection; None when the sets are disjoint."""
    x1 = max(a.x1, b.x1)
    y1 = max(a.y1, b.y1)
    x2 = min(a.x2, b.x2)
    y2 = min(a.y2, b.y2)
    if x1 >= x2 or y1 >= y2:
        return None
    return BBox(x1, y1, x2, y2)


def intersection_area(a: BBox, b: BBox) -> int:
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    if w <= 0:
        return 0
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if h <= 0:
        return 0
    return w * h


def iou_pair(a: BBox | None, b: BBox | None) -> tuple[int, int]:
    """(intersection, union) pixel counts; degenerate boxes count as empty."""
    if a is None or b is None:
        area_a = a.area if a is not None else 0
        area_b = b.area if b is not None else 0
        return 0, area_a + area_b
    inter = intersection_area(a, b)
    return inter, a.area + b.area - inter


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of the two pixel sets, in [0, 1].

    Computed from exact integer counts with a single final division.
    """
    inter, union = iou_pair(a, b)
    if union == 0:
        return 0.0
    return inter / union


def pair_exceeds(pair: tuple[int, int], threshold: Fraction) -> bool:
    """inter/union > threshold, decided exactly (empty union -> ratio 0)."""
    inter, union = pair
    return inter * threshold.denominator > threshold.numerator * union


def pair_at_least(pair: tuple[int, int], threshold: Fraction) -> bool:
    """inter/union >= threshold, decided exactly."""
    inter, union = pair
    if union == 0:
        return threshold <= 0
    return inter * threshold.denominator >= threshold.numerator * union


def pair_greater(p: tuple[int, int], q: tuple[int, int]) -> bool:
    """Exact comparison inter_p/union_p > inter_q/union_q (0/0 reads as 0)."""
    pi, pu = p
    qi, qu = q
    if pu == 0:
        return False
    if qu == 0:
        return pi > 0
    return pi * qu > qi * pu


def center_aligned(g: BBox, d: BBox, max_offset) -> bool:
    """True when d's center sits within max_offset * (w, h) of g's center.

    Centers are half-integer; the test runs on doubled coordinates so the
    boundary (offset exactly equal to the allowance) is decided exactly and
    counts as aligned.
    """
    lam = as_ratio(max_offset)
    dx2 = abs((g.x1 + g.x2) - (d.x1 + d.x2))  # 2 * |cx(g) - cx(d)|
    dy2 = abs((g.y1 + g.y2) - (d.y1 + d.y2))
    # |cx(g)-cx(d)| <= lam * w(g)  <=>  dx2 * den <= 2 * num * w(g)
    return (dx2 * lam.denominator <= 2 * lam.numerator * g.width
            and dy2 * lam.denominator <= 2 * lam.numerator * g.height)


def clip(b: BBox, width: int, height: int) -> BBox | None:
    """Intersection with the image rectangle; None when nothing remains."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    return intersect(b, BBox(0, 0, width, height))
