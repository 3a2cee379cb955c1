import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mitofuse import (
    Annotation,
    AnnotationSet,
    BBox,
    Detection,
    SlideInfo,
    center_distance,
    clip_box,
    iou,
)


def box(x1, y1, x2, y2):
    return BBox(float(x1), float(y1), float(x2), float(y2))


# Quarter-integer grid keeps every coordinate, area, and intersection exactly
# representable, so equality assertions below are exact.
coords = st.integers(min_value=-4000, max_value=4000).map(lambda v: v / 4.0)


@st.composite
def boxes(draw):
    x1 = draw(coords)
    y1 = draw(coords)
    w = draw(st.integers(min_value=1, max_value=2000).map(lambda v: v / 4.0))
    h = draw(st.integers(min_value=1, max_value=2000).map(lambda v: v / 4.0))
    return BBox(x1, y1, x1 + w, y1 + h)


class TestBBox:
    def test_area_and_center(self):
        b = box(2, 3, 10, 7)
        assert b.area() == 32.0
        assert b.center() == (6.0, 5.0)
        assert b.width == 8.0
        assert b.height == 4.0

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            box(0, 0, 0, 10)
        with pytest.raises(ValueError):
            box(0, 0, 10, 0)
        with pytest.raises(ValueError):
            box(5, 0, 4, 10)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            BBox(0.0, 0.0, math.inf, 10.0)
        with pytest.raises(ValueError):
            BBox(math.nan, 0.0, 1.0, 1.0)

    def test_translate(self):
        assert box(1, 2, 3, 4).translate(10, 20) == box(11, 22, 13, 24)


class TestIou:
    def test_identical_is_one(self):
        b = box(3, 4, 50, 60)
        assert iou(b, b) == 1.0

    def test_disjoint_is_zero(self):
        assert iou(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0

    def test_touching_edges_is_zero(self):
        # half-open boxes that share an edge do not share pixels
        assert iou(box(0, 0, 10, 10), box(10, 0, 20, 10)) == 0.0

    def test_unit_shift_overlap(self):
        # 10x10 boxes offset by (1, 1): intersection 81, union 119
        assert iou(box(0, 0, 10, 10), box(1, 1, 11, 11)) == 81 / 119

    @given(boxes(), boxes())
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0

    @given(boxes(), boxes())
    def test_one_iff_identical(self, a, b):
        if a == b:
            assert iou(a, b) == 1.0
        else:
            assert iou(a, b) < 1.0

    @given(boxes(), boxes())
    def test_matches_set_arithmetic(self, a, b):
        # independent recomputation from the definition
        iw = min(a.x2, b.x2) - max(a.x1, b.x1)
        ih = min(a.y2, b.y2) - max(a.y1, b.y1)
        inter = max(iw, 0.0) * max(ih, 0.0)
        union = a.area() + b.area() - inter
        assert iou(a, b) * union == pytest.approx(inter, rel=1e-12, abs=0.0)


class TestCenterDistance:
    def test_zero_for_same_center(self):
        assert center_distance(box(0, 0, 10, 10), box(2, 2, 8, 8)) == 0.0

    def test_axis_aligned(self):
        assert center_distance(box(0, 0, 10, 10), box(6, 0, 16, 10)) == 6.0

    def test_three_four_five(self):
        assert center_distance(box(0, 0, 10, 10), box(3, 4, 13, 14)) == 5.0

    @given(boxes(), boxes())
    def test_symmetric(self, a, b):
        assert center_distance(a, b) == center_distance(b, a)


class TestClipBox:
    def test_inside_unchanged(self):
        slide = SlideInfo("s", 100, 100)
        b = box(10, 10, 40, 40)
        assert clip_box(b, slide) == b

    def test_straddling_clipped(self):
        slide = SlideInfo("s", 100, 100)
        assert clip_box(box(-5, -5, 10, 10), slide) == box(0, 0, 10, 10)

    def test_outside_is_none(self):
        slide = SlideInfo("s", 100, 100)
        assert clip_box(box(200, 200, 210, 210), slide) is None
        assert clip_box(box(-20, 0, -10, 10), slide) is None

    @given(boxes())
    def test_result_inside_slide(self, b):
        slide = SlideInfo("s", 300, 200)
        clipped = clip_box(b, slide)
        if clipped is not None:
            assert 0.0 <= clipped.x1 < clipped.x2 <= 300.0
            assert 0.0 <= clipped.y1 < clipped.y2 <= 200.0
            assert clipped.area() <= b.area()


class TestDetection:
    def test_score_range_enforced(self):
        b = box(0, 0, 10, 10)
        with pytest.raises(ValueError):
            Detection(b, 1.5, "m", "s")
        with pytest.raises(ValueError):
            Detection(b, -0.1, "m", "s")
        with pytest.raises(ValueError):
            Detection(b, math.nan, "m", "s")

    def test_local_needs_tile_index(self):
        b = box(0, 0, 10, 10)
        with pytest.raises(ValueError):
            Detection(b, 0.5, "m", "s", frame="local")
        Detection(b, 0.5, "m", "s", frame="local", tile_index=0)

    def test_global_forbids_tile_index(self):
        b = box(0, 0, 10, 10)
        with pytest.raises(ValueError):
            Detection(b, 0.5, "m", "s", frame="global", tile_index=3)

    def test_unknown_frame_rejected(self):
        with pytest.raises(ValueError):
            Detection(box(0, 0, 10, 10), 0.5, "m", "s", frame="tile")


class TestAnnotations:
    def test_box_from_center(self):
        ann = Annotation(100.0, 200.0, "s")
        assert ann.box(50.0) == box(75, 175, 125, 225)

    def test_set_rejects_foreign_slide(self):
        with pytest.raises(ValueError):
            AnnotationSet("s1", (Annotation(5.0, 5.0, "s2"),), box_size=50.0)

    def test_set_boxes(self):
        anns = AnnotationSet(
            "s", (Annotation(10.0, 10.0, "s"), Annotation(30.0, 30.0, "s")), box_size=10.0
        )
        assert len(anns) == 2
        assert anns.boxes() == [box(5, 5, 15, 15), box(25, 25, 35, 35)]

    def test_box_size_positive(self):
        with pytest.raises(ValueError):
            AnnotationSet("s", (), box_size=0.0)


class TestSlideInfo:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SlideInfo("s", 0, 100)
        with pytest.raises(ValueError):
            SlideInfo("s", 100, -1)

    def test_rejects_bad_resolution(self):
        with pytest.raises(ValueError):
            SlideInfo("s", 100, 100, microns_per_pixel=0.0)
