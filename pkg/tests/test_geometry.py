import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zshoi.geometry import (
    Box,
    BoxPair,
    CenterBox,
    giou,
    giou_matrix,
    iou,
    iou_matrix,
    l1_box_cost,
    to_center_form,
    to_corner_form,
    union_box,
)

from oracles import raster_iou

coord = st.floats(0, 100, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw, min_side=0.5):
    x0, y0 = draw(coord), draw(coord)
    w = draw(st.floats(min_side, 50))
    h = draw(st.floats(min_side, 50))
    return [x0, y0, x0 + w, y0 + h]


class TestIoU:
    def test_identity_and_disjoint(self):
        assert iou([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
        assert iou([0, 0, 1, 1], [2, 0, 3, 1]) == 0.0

    def test_half_overlap_is_one_third(self):
        value = iou([0, 0, 2, 2], [1, 0, 3, 2])
        assert value == pytest.approx(1 / 3, abs=1e-12)
        assert raster_iou([0, 0, 2, 2], [1, 0, 3, 2]) == pytest.approx(value, abs=2 / 400)

    def test_degenerate_pair_is_zero(self):
        assert iou([1, 1, 1, 1], [1, 1, 1, 1]) == 0.0

    def test_matrix_shape(self):
        m = iou_matrix(np.zeros((0, 4)), [[0, 0, 1, 1]])
        assert m.shape == (0, 1)
        assert iou_matrix([[0, 0, 1, 1], [0, 0, 2, 2]], [[0, 0, 1, 1]]).shape == (2, 1)

    @pytest.mark.parametrize("bad", [[0, 0, -1, 1], [0, 0, 1, np.nan], [0, 0, 1]])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            iou(bad, [0, 0, 1, 1])

    @settings(max_examples=60, deadline=None)
    @given(boxes(), boxes())
    def test_raster_oracle(self, a, b):
        assert raster_iou(a, b) == pytest.approx(iou(a, b), abs=2 / 400 * 4)


class TestGIoU:
    def test_examples(self):
        assert giou([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
        assert giou([0, 0, 1, 1], [1, 0, 2, 1]) == 0.0
        assert giou([0, 0, 1, 1], [9, 0, 10, 1]) == pytest.approx(-0.8, abs=1e-12)

    def test_two_degenerate_boxes_raise(self):
        with pytest.raises(ValueError):
            giou([1, 1, 1, 1], [2, 2, 2, 2])

    def test_one_degenerate_box_is_defined(self):
        assert -1 <= giou([0, 0, 0, 0], [1, 1, 2, 2]) <= 0

    def test_monotone_along_translation_ray(self):
        vals = [giou([0, 0, 1, 1], [d, 0, d + 1, 1]) for d in np.linspace(0, 200, 60)]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
        assert vals[-1] > -1 and vals[-1] < -0.98

    @settings(max_examples=150, deadline=None)
    @given(boxes(), boxes())
    def test_invariants(self, a, b):
        u, g = iou(a, b), giou(a, b)
        assert 0 <= u <= 1
        assert -1 <= g <= 1
        assert g <= u + 1e-12
        assert u == pytest.approx(iou(b, a), abs=1e-12)
        assert g == pytest.approx(giou(b, a), abs=1e-12)

    def test_equality_iff_union_fills_enclosure(self):
        # nested boxes: enclosing box = union
        assert giou([0, 0, 4, 4], [1, 1, 2, 2]) == pytest.approx(iou([0, 0, 4, 4], [1, 1, 2, 2]))
        assert giou([0, 0, 1, 1], [2, 2, 3, 3]) < iou([0, 0, 1, 1], [2, 2, 3, 3])

    def test_matrix_matches_scalar(self):
        rng = np.random.default_rng(3)
        a = np.sort(rng.uniform(0, 10, (5, 2, 2)), axis=1).transpose(0, 2, 1).reshape(5, 4)[:, [0, 2, 1, 3]]
        b = np.sort(rng.uniform(0, 10, (4, 2, 2)), axis=1).transpose(0, 2, 1).reshape(4, 4)[:, [0, 2, 1, 3]]
        m = giou_matrix(a, b)
        for i in range(5):
            for j in range(4):
                assert m[i, j] == pytest.approx(giou(a[i], b[j]), abs=1e-14)


class TestUnionBox:
    @pytest.mark.parametrize("h, o, expected", [
        ([0, 0, 1, 1], [0, 0, 1, 1], (0, 0, 1, 1)),
        ([0, 0, 4, 4], [1, 1, 2, 2], (0, 0, 4, 4)),
        ([0, 0, 1, 1], [3, 2, 5, 4], (0, 0, 5, 4)),
    ])
    def test_examples(self, h, o, expected):
        assert union_box(h, o).as_tuple() == expected

    def test_accepts_pair(self):
        pair = BoxPair(Box(0, 0, 1, 1), Box(3, 2, 5, 4), 1)
        assert union_box(pair).as_tuple() == (0, 0, 5, 4)

    @settings(max_examples=80, deadline=None)
    @given(boxes(min_side=0), boxes(min_side=0))
    def test_contains_both_and_is_minimal(self, a, b):
        u = np.array(union_box(a, b))
        for box in (a, b):
            assert u[0] <= box[0] and u[1] <= box[1] and u[2] >= box[2] and u[3] >= box[3]
        arr = np.array([a, b])
        tight = [arr[:, 0].min(), arr[:, 1].min(), arr[:, 2].max(), arr[:, 3].max()]
        assert list(u) == tight


class TestL1AndForms:
    def test_l1_examples(self):
        assert l1_box_cost((0.3, 0.3, 0.2, 0.2), (0.3, 0.3, 0.2, 0.2)) == 0.0
        assert l1_box_cost((0.5, 0.5, 0.2, 0.2), (0.5, 0.5, 0.4, 0.2)) == pytest.approx(0.2)
        assert l1_box_cost((0.1, 0.2, 0.3, 0.4), (0.2, 0.4, 0.1, 0.1)) == pytest.approx(0.8, abs=1e-12)

    def test_center_form(self):
        assert to_center_form([0, 0, 10, 10], 10, 10).as_tuple() == (0.5, 0.5, 1, 1)
        c = to_center_form([2, 2, 4, 6], 10, 10)
        assert np.allclose(c.as_tuple(), (0.3, 0.4, 0.2, 0.4), atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(boxes(min_side=0), st.floats(151, 400), st.floats(151, 400))
    def test_round_trip(self, b, w, h):
        back = to_corner_form(to_center_form(b, w, h), w, h)
        assert np.allclose(back.as_tuple(), b, atol=1e-9)

    def test_bad_image_size(self):
        with pytest.raises(ValueError):
            to_center_form([0, 0, 1, 1], 0, 10)

    def test_center_box_validation(self):
        with pytest.raises(ValueError):
            CenterBox(0.5, 0.5, -0.1, 0.2)

    def test_box_validation(self):
        with pytest.raises(ValueError):
            Box(2, 0, 1, 1)
        assert Box(0, 0, 2, 3).area == 6
