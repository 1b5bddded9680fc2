import math

import numpy as np
import pytest

from roadcover.utils import (
    EPS,
    bearing,
    in_wedge,
    supercover,
    within_range,
)


def touched_cells(start, end):
    """Cells whose closed square the segment between centers touches."""
    X0, Y0 = 2 * start[0], 2 * start[1]
    X1, Y1 = 2 * end[0], 2 * end[1]
    cells = set()
    for cy in range(min(start[1], end[1]), max(start[1], end[1]) + 1):
        for cx in range(min(start[0], end[0]), max(start[0], end[0]) + 1):
            sides = [
                (X1 - X0) * (2 * cy + oy - Y0) - (Y1 - Y0) * (2 * cx + ox - X0)
                for ox in (-1, 1)
                for oy in (-1, 1)
            ]
            if min(sides) <= 0 <= max(sides):
                cells.add((cx, cy))
    return cells


class TestSupercover:

    @pytest.mark.parametrize('start,end', [
        ((0, 0), (3, 1)),
        ((0, 0), (2, 2)),
        ((5, 5), (1, 2)),
        ((0, 4), (0, 0)),
        ((3, 3), (3, 3)),
        ((2, 7), (9, 7)),
    ])
    def test_known_segments(self, start, end):
        cells = list(supercover(start, end))
        assert cells[0] == start
        assert cells[-1] == end
        assert set(cells) == touched_cells(start, end)

    def test_corner_crossing_yields_both_sides(self):
        cells = set(supercover((0, 0), (2, 2)))
        assert {(1, 0), (0, 1), (2, 1), (1, 2)} <= cells

    def test_random_segments_match_closed_squares(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            start = tuple(int(v) for v in rng.integers(0, 16, size=2))
            end = tuple(int(v) for v in rng.integers(0, 16, size=2))
            assert set(supercover(start, end)) == touched_cells(start, end)


class TestAngles:

    def test_bearing_points_down_for_positive_dy(self):
        assert bearing(1, 0) == 0.0
        assert bearing(0, 1) == pytest.approx(math.pi / 2)
        assert bearing(-1, 0) == pytest.approx(math.pi)

    def test_bearing_cache_is_bounded(self):
        assert bearing.cache_info().maxsize is not None

    def test_wedge_is_inclusive(self):
        half = math.radians(20)
        assert in_wedge(half, 0.0, half)
        assert in_wedge(-half, 0.0, half)
        assert not in_wedge(half + 1e-6, 0.0, half)

    def test_wedge_across_branch_cut(self):
        assert in_wedge(-math.pi + 0.05, math.pi - 0.05, 0.2)

    def test_full_circle(self):
        assert in_wedge(1.0, -2.0, math.pi)

    def test_range_is_inclusive(self):
        assert within_range(25, 25.0 + EPS, 1.0)
        assert not within_range(26, 25.0 + EPS, 1.0)
