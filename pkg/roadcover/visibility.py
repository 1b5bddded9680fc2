import functools
import math

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InfeasibleScenario
from .gridworld import CellTag, OcclusionMask, Scenario
from .utils import (
    EPS,
    TWO_PI,
    Cell,
    bearing,
    in_wedge,
    supercover,
    within_range,
)


# Candidate angles closer than this are the same angle.
ANGLE_TOLERANCE = 1e-9

# Entries kept by the per-mask caches of a coverage index.
SIGHT_CACHE_SIZE = 1 << 15
COVERED_CACHE_SIZE = 1 << 17

# Scenarios whose coverage index is shared.
SHARED_INDEXES = 16


@dataclass(frozen=True)
class Gene:
    x: int
    y: int
    phi: float

    @property
    def pos(self) -> Cell:
        return self.x, self.y

    @property
    def phi_deg(self) -> float:
        return math.degrees(self.phi)

    def sort_key(self) -> Tuple[int, int, float]:
        return self.y, self.x, self.phi


class CoverageField:
    """Per street cell coverage counts of a set of genes."""

    def __init__(self, counts: np.ndarray, scenario: Scenario):
        self.counts = counts
        self.scenario = scenario
        self._n_cov = _suffix_counts(counts)

    def __getitem__(self, cell: Cell) -> int:
        return int(self.counts[self.scenario.street_index[cell]])

    def n_cov(self, n: int) -> int:
        if n < 0:
            n = 0
        if n >= len(self._n_cov):
            return 0
        return int(self._n_cov[n])


def _suffix_counts(counts: np.ndarray) -> np.ndarray:
    """n_cov[n] = number of cells with count >= n."""
    if counts.size == 0:
        return np.zeros(1, dtype=np.int64)
    hist = np.bincount(counts)
    return np.cumsum(hist[::-1])[::-1]


class _Reach:
    """Street cells within range of one position, sorted by bearing."""

    def __init__(
        self,
        ids: np.ndarray,
        angles: np.ndarray,
        static_ok: np.ndarray,
        crossed: List[Tuple[Cell, ...]],
    ):
        self.ids = ids
        self.angles = angles
        self.static_ok = static_ok
        self.crossed = crossed

    @property
    def count(self) -> int:
        return len(self.ids)


class _Sight:
    """Street cells one position sees under one mask, with the bearing
    array tripled over [-3pi, 3pi] so a wedge is one contiguous slice."""

    def __init__(self, ids: np.ndarray, angles: np.ndarray):
        self.ids = ids
        self.angles_ext = np.concatenate(
            [angles - TWO_PI, angles, angles + TWO_PI]
        )
        self.ids_ext = np.concatenate([ids, ids, ids])
        self.ids.setflags(write=False)
        self.ids_ext.setflags(write=False)


class CoverageIndex:
    """
    Memoized coverage queries over one scenario.

    Every answer agrees exactly with the `covers` predicate: the same
    bearings, range test and wedge bounds are used.
    """

    def __init__(
        self,
        scenario: Scenario,
        *,
        sight_cache_size: int = SIGHT_CACHE_SIZE,
        covered_cache_size: int = COVERED_CACHE_SIZE
    ):
        self.scenario = scenario
        spec = scenario.sensor_spec
        self.half_fov = spec.half_fov
        self.range_sq = spec.range_m * spec.range_m + EPS
        self.cell_area = scenario.grid_len * scenario.grid_len
        self._reach: Dict[Cell, _Reach] = {}
        self._angles: Dict[Cell, np.ndarray] = {}
        self._sight = functools.lru_cache(maxsize=sight_cache_size)(
            self._compute_sight
        )
        self._covered = functools.lru_cache(maxsize=covered_cache_size)(
            self._compute_covered
        )
        self._opacity_cells = frozenset(scenario.opacity)

    @property
    def full_circle(self) -> bool:
        return self.half_fov + EPS >= math.pi

    def angles(self, pos: Cell) -> np.ndarray:
        try:
            return self._angles[pos]
        except KeyError:
            pass
        x, y = pos
        values = sorted(
            bearing(cx - x, cy - y) for cx, cy in self.scenario.street_cells
        )
        unique: List[float] = []
        for value in values:
            if not unique or value - unique[-1] > ANGLE_TOLERANCE:
                unique.append(value)
        angles = np.array(unique, dtype=float)
        angles.setflags(write=False)
        self._angles[pos] = angles
        return angles

    def snap(self, pos: Cell, phi: float) -> float:
        """Nearest candidate angle at `pos`; ties go to the smaller angle."""
        angles = self.angles(pos)
        if not len(angles):
            raise InfeasibleScenario('no street cells to orient towards')
        distances = _circular_distance(angles, phi)
        return float(angles[int(np.argmin(distances))])

    def nearest_angles(
        self,
        pos: Cell,
        phi: float,
        count: int,
        *,
        exclude: Optional[float] = None
    ) -> List[float]:
        angles = self.angles(pos)
        order = np.argsort(_circular_distance(angles, phi), kind='stable')
        result = []
        for i in order:
            value = float(angles[i])
            if exclude is not None and value == exclude:
                continue
            result.append(value)
            if len(result) == count:
                break
        return result

    def in_range(self, pos: Cell) -> int:
        return self._get_reach(pos).count

    def covered(self, gene: Gene, mask: OcclusionMask) -> np.ndarray:
        """Street indices covered by `gene` under `mask`."""
        return self._covered(gene, mask)

    def cache_info(self) -> Dict[str, functools._CacheInfo]:
        return {
            'sight': self._sight.cache_info(),
            'covered': self._covered.cache_info(),
        }

    def _compute_covered(self, gene: Gene, mask: OcclusionMask) -> np.ndarray:
        sight = self._sight(gene.pos, mask)
        if self.full_circle:
            ids = sight.ids
        else:
            low = gene.phi - self.half_fov - EPS
            high = gene.phi + self.half_fov + EPS
            start = np.searchsorted(sight.angles_ext, low, side='left')
            stop = np.searchsorted(sight.angles_ext, high, side='right')
            ids = sight.ids_ext[start:stop]
        return ids

    def wedge_counts(
        self,
        pos: Cell,
        phis: np.ndarray,
        mask: OcclusionMask,
        weights: np.ndarray
    ) -> np.ndarray:
        """Sum of `weights` over the cells covered at every orientation."""
        sight = self._sight(pos, mask)
        if self.full_circle:
            total = weights[sight.ids].sum()
            return np.full(len(phis), total, dtype=weights.dtype)
        prefix = np.concatenate(
            [[0], np.cumsum(weights[sight.ids_ext])]
        ).astype(weights.dtype)
        low = phis - self.half_fov - EPS
        high = phis + self.half_fov + EPS
        start = np.searchsorted(sight.angles_ext, low, side='left')
        stop = np.searchsorted(sight.angles_ext, high, side='right')
        return prefix[stop] - prefix[start]

    def _get_reach(self, pos: Cell) -> _Reach:
        try:
            return self._reach[pos]
        except KeyError:
            pass
        scenario = self.scenario
        x, y = pos
        xy = scenario.street_xy
        dx = xy[:, 0] - x
        dy = xy[:, 1] - y
        d2 = dx * dx + dy * dy
        ids = np.nonzero(within_range(d2, self.range_sq, self.cell_area))[0]
        angles = np.array(
            [bearing(int(dx[i]), int(dy[i])) for i in ids],
            dtype=float
        )
        order = np.argsort(angles, kind='stable')
        ids = ids[order]
        angles = angles[order]

        static_ok = np.ones(len(ids), dtype=bool)
        crossed: List[Tuple[Cell, ...]] = []
        for k, i in enumerate(ids):
            blocked, transparent = self._trace(pos, scenario.street_cells[i])
            static_ok[k] = not blocked
            crossed.append(transparent)

        reach = _Reach(ids, angles, static_ok, crossed)
        self._reach[pos] = reach
        return reach

    def _trace(self, start: Cell, end: Cell) -> Tuple[bool, Tuple[Cell, ...]]:
        tags = self.scenario.tags
        transparent = []
        for cell in supercover(start, end):
            if cell == start or cell == end:
                continue
            x, y = cell
            if tags[y, x] == CellTag.OBSTACLE:
                return True, ()
            if cell in self._opacity_cells:
                transparent.append(cell)
        return False, tuple(transparent)

    def _compute_sight(self, pos: Cell, mask: OcclusionMask) -> _Sight:
        reach = self._get_reach(pos)
        visible = reach.static_ok.copy()
        if mask.opaque_now:
            opaque = mask.opaque_now
            for k, cells in enumerate(reach.crossed):
                if visible[k] and any(cell in opaque for cell in cells):
                    visible[k] = False
        return _Sight(reach.ids[visible], reach.angles[visible])


def _circular_distance(angles: np.ndarray, phi: float) -> np.ndarray:
    return np.abs(np.mod(angles - phi + math.pi, TWO_PI) - math.pi)


@functools.lru_cache(maxsize=SHARED_INDEXES)
def index_for(scenario: Scenario) -> CoverageIndex:
    """Shared coverage index of a scenario."""
    return CoverageIndex(scenario)


def candidate_angles(pos: Cell, scenario: Scenario) -> List[float]:
    if not scenario.in_bounds(pos):
        raise ValueError('position {} outside the grid'.format(pos))
    return index_for(scenario).angles(pos).tolist()


def line_of_sight(
    scenario: Scenario,
    mask: OcclusionMask,
    start: Cell,
    end: Cell
) -> bool:
    for cell in supercover(start, end):
        if cell == start or cell == end:
            continue
        if scenario.is_obstacle(cell) or cell in mask.opaque_now:
            return False
    return True


def covers(
    gene: Gene,
    cell: Cell,
    scenario: Scenario,
    mask: OcclusionMask
) -> bool:
    spec = scenario.sensor_spec
    dx = cell[0] - gene.x
    dy = cell[1] - gene.y
    range_sq = spec.range_m * spec.range_m + EPS
    cell_area = scenario.grid_len * scenario.grid_len
    if not within_range(dx * dx + dy * dy, range_sq, cell_area):
        return False
    if not in_wedge(bearing(dx, dy), gene.phi, spec.half_fov):
        return False
    return line_of_sight(scenario, mask, gene.pos, cell)


def coverage_counts(
    genes: Sequence[Gene],
    scenario: Scenario,
    mask: OcclusionMask,
    index: Optional[CoverageIndex] = None
) -> CoverageField:
    index = index or index_for(scenario)
    counts = np.zeros(scenario.n_road, dtype=np.int64)
    for gene in genes:
        counts[index.covered(gene, mask)] += 1
    return CoverageField(counts, scenario)


def covered_cells(
    genes: Iterable[Gene],
    scenario: Scenario,
    mask: OcclusionMask,
    index: Optional[CoverageIndex] = None
) -> np.ndarray:
    """Boolean street mask of cells covered at least once."""
    index = index or index_for(scenario)
    seen = np.zeros(scenario.n_road, dtype=bool)
    for gene in genes:
        seen[index.covered(gene, mask)] = True
    return seen


def cells_in_range(pos: Cell, scenario: Scenario) -> int:
    if not scenario.in_bounds(pos):
        raise ValueError('position {} outside the grid'.format(pos))
    return index_for(scenario).in_range(pos)
