import pytest
from hypothesis import given, strategies as st

from pedeval.geometry import (BBox, center_aligned, clip, intersect, iou,
                              iou_pair, pair_at_least, pair_exceeds,
                              pair_greater)


def pixel_set(b: BBox) -> set:
    return {(x, y) for x in range(b.x1, b.x2) for y in range(b.y1, b.y2)}


def iou_by_enumeration(a: BBox, b: BBox) -> float:
    sa, sb = pixel_set(a), pixel_set(b)
    return len(sa & sb) / len(sa | sb)


@st.composite
def boxes(draw, lo=0, hi=64):
    x1 = draw(st.integers(lo, hi - 1))
    y1 = draw(st.integers(lo, hi - 1))
    x2 = draw(st.integers(x1 + 1, hi))
    y2 = draw(st.integers(y1 + 1, hi))
    return BBox(x1, y1, x2, y2)


class TestBBox:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            BBox(0, 0, 0, 10)
        with pytest.raises(ValueError):
            BBox(5, 0, 5, 10)
        with pytest.raises(ValueError):
            BBox(0, 10, 10, 10)

    def test_rejects_non_integer(self):
        with pytest.raises(ValueError):
            BBox(0.5, 0, 10, 10)

    def test_area_is_pixel_count(self):
        b = BBox(2, 3, 7, 9)
        assert b.area == len(pixel_set(b)) == 30
        assert b.width == 5 and b.height == 6


class TestIou:
    def test_identity(self):
        a = BBox(0, 0, 10, 10)
        assert iou(a, a) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == 0.0

    def test_half_overlap_is_one_third(self):
        # 150 union pixels, 50 intersection pixels by enumeration
        a, b = BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)
        sa, sb = pixel_set(a), pixel_set(b)
        assert (len(sa & sb), len(sa | sb)) == (50, 150)
        assert iou(a, b) == 50 / 150
        assert iou_pair(a, b) == (50, 150)

    @given(boxes(), boxes())
    def test_matches_pixel_enumeration(self, a, b):
        assert iou(a, b) == iou_by_enumeration(a, b)

    @given(boxes(), boxes())
    def test_symmetric(self, a, b):
        assert iou(a, b) == iou(b, a)

    @given(boxes(), boxes())
    def test_one_iff_equal_zero_iff_disjoint(self, a, b):
        sa, sb = pixel_set(a), pixel_set(b)
        assert (iou(a, b) == 1.0) == (a == b)
        assert (iou(a, b) == 0.0) == (not (sa & sb))

    @given(boxes(), boxes(), boxes(), boxes())
    def test_pair_comparisons_are_exact(self, a, b, c, d):
        p, q = iou_pair(a, b), iou_pair(c, d)
        assert pair_greater(p, q) == (iou_by_enumeration(a, b)
                                      > iou_by_enumeration(c, d))


class TestCenterAligned:
    def test_zero_offset(self):
        g = BBox(0, 0, 10, 10)
        assert center_aligned(g, g, 0.2)

    def test_offset_beyond_allowance(self):
        # offset 3 > 0.2 * 10 = 2
        assert not center_aligned(BBox(0, 0, 10, 10), BBox(3, 0, 13, 10), 0.2)

    def test_boundary_is_inclusive(self):
        # offset exactly 2 == 0.2 * 10
        assert center_aligned(BBox(0, 0, 10, 10), BBox(2, 0, 12, 10), 0.2)

    @given(boxes(), st.floats(0.01, 2.0))
    def test_self_alignment_for_any_allowance(self, g, lam):
        assert center_aligned(g, g, lam)

    def test_asymmetric_in_reference_box(self):
        g, d = BBox(0, 0, 100, 100), BBox(45, 45, 65, 65)
        # offsets measured against g's size here, d's size when swapped
        assert center_aligned(g, d, 0.2)
        assert not center_aligned(d, g, 0.2)


class TestClip:
    def test_negative_corner(self):
        assert clip(BBox(-5, 0, 10, 10), 2048, 1024) == BBox(0, 0, 10, 10)

    def test_inside_unchanged(self):
        assert clip(BBox(0, 0, 10, 10), 2048, 1024) == BBox(0, 0, 10, 10)

    def test_right_edge(self):
        assert clip(BBox(2040, 0, 2060, 10), 2048, 1024) == BBox(2040, 0, 2048, 10)

    def test_outside_is_empty(self):
        assert clip(BBox(-10, -10, -1, -1), 64, 64) is None

    @given(boxes(lo=-20, hi=90))
    def test_clip_is_intersection_with_image(self, b):
        image = BBox(0, 0, 64, 64)
        assert clip(b, 64, 64) == intersect(b, image)


class TestThresholdComparisons:
    def test_exceeds_is_strict(self):
        from fractions import Fraction
        half = Fraction(1, 2)
        assert not pair_exceeds((1, 2), half)
        assert pair_exceeds((51, 100), half)

    def test_at_least_is_inclusive(self):
        from fractions import Fraction
        quarter = Fraction(1, 4)
        assert pair_at_least((1, 4), quarter)
        assert not pair_at_least((24, 100), quarter)
