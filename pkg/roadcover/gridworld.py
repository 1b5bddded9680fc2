import enum
import math

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Tuple,
    Union,
)

import numpy as np

from .exceptions import ConfigError, ScenarioError
from .utils import Cell


class CellTag(enum.IntEnum):
    OBSTACLE = 0
    BLOCKED = 1
    STREET = 2
    FREE = 3
    SENSOR = 4


CELL_CHARS = {
    '#': CellTag.OBSTACLE,
    'B': CellTag.BLOCKED,
    'S': CellTag.STREET,
    'P': CellTag.STREET,
    '.': CellTag.FREE,
}

TAG_CHARS = {
    CellTag.OBSTACLE: '#',
    CellTag.BLOCKED: 'B',
    CellTag.STREET: 'S',
    CellTag.FREE: '.',
    CellTag.SENSOR: '.',
}

HEADER_KEYS = ('name', 'grid_len', 'sensor_range', 'sensor_fov_deg', 'symmetry')


@dataclass(frozen=True)
class SensorSpec:
    range_m: float
    fov_rad: float
    fov_deg: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.range_m > 0:
            raise ScenarioError(
                'invalid sensor spec: range must be positive, got {}'.format(
                    self.range_m
                )
            )
        if not 0 < self.fov_rad <= 2 * math.pi + 1e-12:
            raise ScenarioError(
                'invalid sensor spec: fov must lie in (0, 2pi], got {}'.format(
                    self.fov_rad
                )
            )
        if self.fov_deg is None:
            object.__setattr__(self, 'fov_deg', math.degrees(self.fov_rad))

    @classmethod
    def from_degrees(cls, range_m: float, fov_deg: float) -> 'SensorSpec':
        return cls(range_m, math.radians(fov_deg), fov_deg)

    @property
    def half_fov(self) -> float:
        return self.fov_rad / 2.0

    @property
    def wedge_area(self) -> float:
        """Sensing area in square meters, r^2 * omega / 2."""
        return self.range_m * self.range_m * self.fov_rad / 2.0


@dataclass(frozen=True)
class OcclusionMask:
    opaque_now: FrozenSet[Cell]
    seed: int
    index: int = 0

    def __contains__(self, cell: Cell) -> bool:
        return cell in self.opaque_now


class Scenario:
    """
    A grid map with tagged cells. Cells are addressed as (x, y) with the
    origin at the top-left corner, x growing rightward and y downward.
    Scenarios are immutable once built.
    """

    def __init__(
        self,
        tags: np.ndarray,
        *,
        grid_len: float,
        sensor_spec: SensorSpec,
        priority: Iterable[Cell] = (),
        opacity: Optional[Mapping[Cell, float]] = None,
        symmetry: Optional[str] = None,
        name: Optional[str] = None,
    ):
        tags = np.array(tags, dtype=np.int8)
        if tags.ndim != 2:
            raise ScenarioError('malformed grid row lengths')
        tags.setflags(write=False)
        if not grid_len > 0:
            raise ScenarioError(
                'grid_len must be positive, got {}'.format(grid_len)
            )

        self.tags = tags
        self.height, self.width = tags.shape
        self.grid_len = float(grid_len)
        self.sensor_spec = sensor_spec
        self.priority = frozenset(priority)
        self.opacity = dict(sorted(
            (opacity or {}).items(),
            key=lambda item: (item[0][1], item[0][0])
        ))
        self.symmetry = symmetry
        self.name = name
        self._validate()

    def __repr__(self):
        return '<Scenario {}x{} n_road={}{}>'.format(
            self.width,
            self.height,
            self.n_road,
            f' {self.name!r}' if self.name else ''
        )

    def _validate(self):
        for cell in self.priority:
            if not self.is_street(cell):
                raise ScenarioError(
                    'priority on non-street cell {}'.format(cell)
                )
        for cell, value in self.opacity.items():
            if not self.is_street(cell):
                raise ScenarioError('opacity on non-street cell {}'.format(cell))
            if not 0.0 <= value <= 1.0:
                raise ScenarioError(
                    'opacity {} at {} outside [0, 1]'.format(value, cell)
                )

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def tag(self, cell: Cell) -> CellTag:
        x, y = cell
        return CellTag(int(self.tags[y, x]))

    def is_street(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.tag(cell) == CellTag.STREET

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.tag(cell) == CellTag.FREE

    def is_obstacle(self, cell: Cell) -> bool:
        return self.tag(cell) == CellTag.OBSTACLE

    @cached_property
    def street_cells(self) -> List[Cell]:
        ys, xs = np.nonzero(self.tags == CellTag.STREET)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    @cached_property
    def street_index(self) -> Dict[Cell, int]:
        return {cell: i for i, cell in enumerate(self.street_cells)}

    @cached_property
    def street_xy(self) -> np.ndarray:
        return np.array(self.street_cells, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def n_road(self) -> int:
        return len(self.street_cells)

    @cached_property
    def free_cells(self) -> List[Cell]:
        ys, xs = np.nonzero(self.tags == CellTag.FREE)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    @cached_property
    def free_index(self) -> Dict[Cell, int]:
        return {cell: i for i, cell in enumerate(self.free_cells)}

    @cached_property
    def free_xy(self) -> np.ndarray:
        return np.array(self.free_cells, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def priority_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_road, dtype=bool)
        for cell in self.priority:
            mask[self.street_index[cell]] = True
        return mask

    def wedge_lower_bound(self) -> int:
        """Sensors needed if every wedge covered only street area."""
        area = self.n_road * self.grid_len ** 2
        return max(1, math.ceil(area / self.sensor_spec.wedge_area))


@dataclass(frozen=True)
class ScenarioStats:
    n_road: int
    tags: Dict[str, int]
    priority: int
    free: int

    def to_dict(self) -> Dict[str, Union[int, Dict[str, int]]]:
        return {
            'n_road': self.n_road,
            'tags': dict(self.tags),
            'priority': self.priority,
            'free': self.free,
        }


def parse_scenario(doc: str) -> Scenario:
    """Parse a scenario document.

    The header holds `key=value` lines and `opacity <x> <y> <value>` lines,
    the grid block holds one character per cell, rows top to bottom.

    Raises:
        ScenarioError: On any format or validation failure.
    """
    header: Dict[str, str] = {}
    opacity: Dict[Cell, float] = {}
    rows: List[Tuple[int, str]] = []

    for lineno, raw in enumerate(doc.splitlines(), start=1):
        line = raw.strip()
        if not rows:
            if not line:
                continue
            if line.startswith('opacity'):
                cell, value = _parse_opacity(line, lineno)
                opacity[cell] = value
                continue
            if '=' in line:
                key, _, value = line.partition('=')
                key = key.strip()
                if key not in HEADER_KEYS:
                    raise ScenarioError(
                        'unknown header key "{}"'.format(key),
                        line=lineno
                    )
                header[key] = value.strip()
                continue
        if not line:
            continue
        rows.append((lineno, line))

    if not rows:
        raise ScenarioError('missing grid block')
    width = len(rows[0][1])
    tags = np.empty((len(rows), width), dtype=np.int8)
    priority = []
    for y, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ScenarioError('malformed grid row lengths', line=lineno)
        for x, char in enumerate(row):
            try:
                tags[y, x] = CELL_CHARS[char]
            except KeyError:
                raise ScenarioError(
                    'unknown cell character {!r}'.format(char),
                    line=lineno
                )
            if char == 'P':
                priority.append((x, y))

    try:
        grid_len = float(header['grid_len'])
    except KeyError:
        raise ScenarioError('missing grid_len')
    except ValueError:
        raise ScenarioError('grid_len is not a number')
    try:
        spec = SensorSpec.from_degrees(
            float(header['sensor_range']),
            float(header['sensor_fov_deg'])
        )
    except KeyError:
        raise ScenarioError('missing sensor spec')
    except ValueError:
        raise ScenarioError('sensor spec is not numeric')

    return Scenario(
        tags,
        grid_len=grid_len,
        sensor_spec=spec,
        priority=priority,
        opacity=opacity,
        symmetry=header.get('symmetry') or None,
        name=header.get('name') or None,
    )


def _parse_opacity(line: str, lineno: int) -> Tuple[Cell, float]:
    parts = line.split()
    if len(parts) != 4:
        raise ScenarioError(
            'opacity lines read "opacity <x> <y> <value>"',
            line=lineno
        )
    try:
        return (int(parts[1]), int(parts[2])), float(parts[3])
    except ValueError:
        raise ScenarioError('malformed opacity line', line=lineno)


def serialize_scenario(scenario: Scenario) -> str:
    lines = []
    if scenario.name:
        lines.append(f'name={scenario.name}')
    lines.append(f'grid_len={scenario.grid_len!r}')
    lines.append(f'sensor_range={scenario.sensor_spec.range_m!r}')
    lines.append(f'sensor_fov_deg={scenario.sensor_spec.fov_deg!r}')
    if scenario.symmetry:
        lines.append(f'symmetry={scenario.symmetry}')
    for (x, y), value in scenario.opacity.items():
        lines.append(f'opacity {x} {y} {value!r}')
    for y in range(scenario.height):
        row = []
        for x in range(scenario.width):
            if (x, y) in scenario.priority:
                row.append('P')
            else:
                row.append(TAG_CHARS[CellTag(int(scenario.tags[y, x]))])
        lines.append(''.join(row))
    return '\n'.join(lines) + '\n'


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        doc = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError('cannot read scenario {}: {}'.format(path, exc))
    return parse_scenario(doc)


def sample_occlusion_masks(
    scenario: Scenario,
    seed: int,
    count: int
) -> List[OcclusionMask]:
    """Draw `count` occlusion realizations.

    Every semi-transparent cell is opaque in a realization with probability
    equal to its opacity, independently of the other cells. Mask `i` draws
    from the stream seeded with `(seed, i)`.
    """
    if count < 1:
        raise ConfigError('mask_count', 'must be at least 1')
    if seed < 0:
        raise ConfigError('seed', 'must be non-negative')

    cells = list(scenario.opacity.keys())
    probabilities = np.array(list(scenario.opacity.values()), dtype=float)
    masks = []
    for index in range(count):
        rng = np.random.default_rng([seed, index])
        draws = rng.random(len(cells))
        opaque = frozenset(
            cell for cell, hit in zip(cells, draws < probabilities) if hit
        )
        masks.append(OcclusionMask(opaque, seed, index))
    return masks


def scenario_stats(scenario: Scenario) -> ScenarioStats:
    counts = np.bincount(scenario.tags.ravel(), minlength=len(CellTag))
    tags = {tag.name.lower(): int(counts[tag]) for tag in CellTag}
    return ScenarioStats(
        n_road=scenario.n_road,
        tags=tags,
        priority=len(scenario.priority),
        free=tags['free'],
    )
