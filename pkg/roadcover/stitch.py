import concurrent.futures
import json
import math

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .config import Settings
from .evolve import Chromosome
from .exceptions import LayoutError, SensorSpecMismatch
from .fitness import Evaluator, FitnessWeights, default_weights
from .gridworld import (
    CellTag,
    CELL_CHARS,
    OcclusionMask,
    Scenario,
    load_scenario,
    parse_scenario,
    sample_occlusion_masks,
)
from .logging import logger
from .pipeline import run_pipeline
from .refine import genes_near, local_search
from .registry import Registry
from .symmetry import MIRROR, SymmetryGroup
from .utils import Cell
from .visibility import Gene, index_for


JUNCTION = 'junction'
STRAIGHT_SEGMENT = 'straight_segment'
FRAGMENT_KINDS = (JUNCTION, STRAIGHT_SEGMENT)

SIDES = ('n', 'e', 's', 'w')
NORMALS = {'n': (0, -1), 'e': (1, 0), 's': (0, 1), 'w': (-1, 0)}


@dataclass(frozen=True)
class Port:
    name: str
    side: str
    span: Tuple[int, int]

    def __post_init__(self):
        if self.side not in SIDES:
            raise LayoutError('unknown port side "{}"'.format(self.side))

    def cells(self, width: int, height: int) -> List[Cell]:
        lo, hi = self.span
        if self.side == 'n':
            return [(x, 0) for x in range(lo, hi + 1)]
        if self.side == 's':
            return [(x, height - 1) for x in range(lo, hi + 1)]
        if self.side == 'w':
            return [(0, y) for y in range(lo, hi + 1)]
        return [(width - 1, y) for y in range(lo, hi + 1)]


@dataclass
class Fragment:
    id: str
    scenario: Scenario
    kind: str
    ports: Dict[str, Port]
    solution: Optional[Chromosome] = None
    lanes: int = 1
    axis: Optional[str] = None
    period_m: Optional[float] = None

    def __post_init__(self):
        if self.kind not in FRAGMENT_KINDS:
            raise LayoutError(
                'unknown fragment kind "{}" for "{}"'.format(self.kind, self.id)
            )
        if self.kind == STRAIGHT_SEGMENT and self.axis not in ('x', 'y'):
            raise LayoutError(
                'straight segment "{}" needs an axis'.format(self.id)
            )

    def library_key(self) -> Tuple[str, int, float, float]:
        spec = self.scenario.sensor_spec
        return self.kind, self.lanes, spec.range_m, spec.fov_rad

    def mirror_invariant(self) -> bool:
        group = SymmetryGroup(
            MIRROR,
            axis='x',
            offset=(self.scenario.width - 1) / 2.0
        )
        return group.is_invariant(self.scenario)

    def shift_range(self) -> int:
        """Number of rigid shifts scanned for the solution.

        Only a segment whose solution repeats with a period shorter than the
        segment is shifted; genes pushed past its end wrap back by whole
        periods, so the repeated pattern keeps its pairwise distances.
        """
        if self.kind != STRAIGHT_SEGMENT or not self.period_m:
            return 1
        length = self.scenario.width if self.axis == 'x' else \
            self.scenario.height
        period = int(round(self.period_m / self.scenario.grid_len))
        if period < 2 or period >= length:
            return 1
        return period


@dataclass(frozen=True)
class Placement:
    name: str
    fragment: str
    offset: Cell = (0, 0)
    rotation: int = 0
    mirror: bool = False

    def __post_init__(self):
        if self.rotation not in (0, 90, 180, 270):
            raise LayoutError(
                'rotation of "{}" must be 0, 90, 180 or 270'.format(self.name)
            )

    def dims(self, piece: Scenario) -> Tuple[int, int]:
        if self.rotation in (90, 270):
            return piece.height, piece.width
        return piece.width, piece.height

    def cell(self, piece: Scenario, cell: Cell) -> Cell:
        x, y = cell
        width, height = piece.width, piece.height
        if self.mirror:
            x = width - 1 - x
        for _ in range(self.rotation // 90):
            x, y = height - 1 - y, x
            width, height = height, width
        return x + self.offset[0], y + self.offset[1]

    def direction(self, vector: Cell) -> Cell:
        dx, dy = vector
        if self.mirror:
            dx = -dx
        for _ in range(self.rotation // 90):
            dx, dy = -dy, dx
        return dx, dy

    def angle(self, phi: float) -> float:
        if self.mirror:
            phi = math.pi - phi
        return phi + (self.rotation // 90) * math.pi / 2

    def tags(self, piece: Scenario) -> np.ndarray:
        tags = np.array(piece.tags)
        if self.mirror:
            tags = tags[:, ::-1]
        for _ in range(self.rotation // 90):
            tags = tags.T[:, ::-1]
        return tags


@dataclass
class Layout:
    width: int
    height: int
    placements: List[Placement]
    adjacency: List[Tuple[str, str]] = field(default_factory=list)
    fill: str = '#'

    def placement(self, name: str) -> Placement:
        for placement in self.placements:
            if placement.name == name:
                return placement
        raise LayoutError('unknown placement "{}"'.format(name))


def _fragment(library: Registry[Fragment], key: str) -> Fragment:
    if key not in library:
        raise LayoutError('unknown fragment "{}"'.format(key))
    return library.get(key)


def _port(
    layout: Layout,
    library: Registry[Fragment],
    ref: str
) -> Tuple[Set[Cell], Cell]:
    """Global cells and outward normal of `placement.port`."""
    name, _, port_name = ref.partition('.')
    placement = layout.placement(name)
    fragment = _fragment(library, placement.fragment)
    try:
        port = fragment.ports[port_name]
    except KeyError:
        raise LayoutError('dangling port "{}"'.format(ref))
    piece = fragment.scenario
    cells = {
        placement.cell(piece, cell)
        for cell in port.cells(piece.width, piece.height)
    }
    return cells, placement.direction(NORMALS[port.side])


def check_homogeneous(library: Registry[Fragment], layout: Layout):
    """Raise SensorSpecMismatch unless every placed fragment shares one
    sensor spec."""
    expected = None
    grid_len = None
    for placement in layout.placements:
        fragment = _fragment(library, placement.fragment)
        spec = fragment.scenario.sensor_spec
        if expected is None:
            expected = spec
            grid_len = fragment.scenario.grid_len
            continue
        if spec != expected:
            raise SensorSpecMismatch(expected, spec, fragment=fragment.id)
        if fragment.scenario.grid_len != grid_len:
            raise LayoutError(
                'fragment "{}" uses grid_len {} instead of {}'.format(
                    fragment.id,
                    fragment.scenario.grid_len,
                    grid_len
                )
            )


def assemble_scenario(
    layout: Layout,
    library: Registry[Fragment]
) -> Scenario:
    """Union of the transformed pieces; uncovered cells take the layout
    fill.

    Raises:
        LayoutError: On overlapping street cells, pieces leaving the layout
            or ports that do not coincide.
    """
    if not layout.placements:
        raise LayoutError('layout has no placements')
    check_homogeneous(library, layout)
    try:
        fill = CELL_CHARS[layout.fill]
    except KeyError:
        raise LayoutError('unknown fill character {!r}'.format(layout.fill))

    tags = np.full((layout.height, layout.width), fill, dtype=np.int8)
    owner = np.full((layout.height, layout.width), -1, dtype=np.int64)
    priority = []
    opacity = {}
    for k, placement in enumerate(layout.placements):
        piece = _fragment(library, placement.fragment).scenario
        width, height = placement.dims(piece)
        ox, oy = placement.offset
        if ox < 0 or oy < 0 or ox + width > layout.width \
                or oy + height > layout.height:
            raise LayoutError(
                'placement "{}" leaves the layout'.format(placement.name)
            )
        local = placement.tags(piece)
        window = tags[oy:oy + height, ox:ox + width]
        taken = owner[oy:oy + height, ox:ox + width]
        clash = (local == CellTag.STREET) & (window == CellTag.STREET) \
            & (taken >= 0)
        if clash.any():
            y, x = (int(v) for v in np.argwhere(clash)[0])
            raise LayoutError('overlapping street cells', cell=(x + ox, y + oy))
        keep = (taken >= 0) & (window == CellTag.STREET)
        window[~keep] = local[~keep]
        taken[~keep] = k
        priority.extend(placement.cell(piece, cell) for cell in piece.priority)
        for cell, value in piece.opacity.items():
            opacity[placement.cell(piece, cell)] = value

    for left, right in layout.adjacency:
        cells_a, normal_a = _port(layout, library, left)
        cells_b, normal_b = _port(layout, library, right)
        shifted = {(x + normal_a[0], y + normal_a[1]) for x, y in cells_a}
        if shifted != cells_b or normal_a != (-normal_b[0], -normal_b[1]):
            raise LayoutError(
                'ports "{}" and "{}" do not coincide'.format(left, right)
            )

    joined = {ref for pair in layout.adjacency for ref in pair}
    for placement in layout.placements:
        fragment = _fragment(library, placement.fragment)
        for port_name in fragment.ports:
            ref = '{}.{}'.format(placement.name, port_name)
            if ref in joined:
                continue
            cells, normal = _port(layout, library, ref)
            for x, y in cells:
                outside = (x + normal[0], y + normal[1])
                if 0 <= outside[0] < layout.width \
                        and 0 <= outside[1] < layout.height \
                        and tags[outside[1], outside[0]] == CellTag.STREET:
                    raise LayoutError('dangling port "{}"'.format(ref))

    first = _fragment(library, layout.placements[0].fragment).scenario
    return Scenario(
        tags,
        grid_len=first.grid_len,
        sensor_spec=first.sensor_spec,
        priority=priority,
        opacity=opacity,
    )


class _Assembler:
    """Global genes of every placement for every mirror and shift
    option."""

    def __init__(
        self,
        layout: Layout,
        library: Registry[Fragment],
        scenario: Scenario
    ):
        self.layout = layout
        self.library = library
        self.scenario = scenario
        self.index = index_for(scenario)
        self._cache: Dict[Tuple[int, bool, int], List[Gene]] = {}
        self._joined = {
            ref.partition('.')[0] for pair in layout.adjacency for ref in pair
        }

    def fragment(self, k: int) -> Fragment:
        return self.library.get(self.layout.placements[k].fragment)

    def options(self, k: int) -> List[Tuple[bool, int]]:
        """Mirror and shift states of placement `k`. A placement joined to
        no other one keeps its solution unshifted."""
        fragment = self.fragment(k)
        toggles = [False, True] if fragment.mirror_invariant() else [False]
        shifts = 1
        if len(self.layout.placements) > 1 \
                and self.layout.placements[k].name in self._joined:
            shifts = fragment.shift_range()
        return [
            (toggle, shift)
            for toggle in toggles
            for shift in range(shifts)
        ]

    def genes(self, k: int, toggle: bool, shift: int) -> List[Gene]:
        key = (k, toggle, shift)
        try:
            return self._cache[key]
        except KeyError:
            pass
        placement = self.layout.placements[k]
        fragment = self.fragment(k)
        piece = fragment.scenario
        period = fragment.shift_range()
        genes = []
        for gene in fragment.solution or ():
            x, y, phi = gene.x, gene.y, gene.phi
            if toggle:
                x = piece.width - 1 - x
                phi = math.pi - phi
            if shift:
                if fragment.axis == 'x':
                    x = _wrap(x + shift, piece.width, period)
                else:
                    y = _wrap(y + shift, piece.height, period)
            cell = placement.cell(piece, (x, y))
            if not self.scenario.is_free(cell):
                continue
            phi = self.index.snap(cell, placement.angle(phi))
            genes.append(Gene(cell[0], cell[1], phi))
        self._cache[key] = genes
        return genes

    def chromosome(self, states: Sequence[Tuple[bool, int]]) -> Chromosome:
        genes = []
        for k, (toggle, shift) in enumerate(states):
            genes.extend(self.genes(k, toggle, shift))
        return Chromosome(genes)


def _wrap(value: int, length: int, period: int) -> int:
    if value >= length:
        value -= (length // period) * period
    return value


def assemble_layout(
    layout: Layout,
    library: Registry[Fragment]
) -> Tuple[Scenario, Chromosome]:
    """Global scenario and the union of the transformed fragment
    solutions."""
    scenario = assemble_scenario(layout, library)
    assembler = _Assembler(layout, library, scenario)
    naive = assembler.chromosome([(False, 0)] * len(layout.placements))
    return scenario, naive


@dataclass
class StitchResult:
    scenario: Scenario
    chromosome: Chromosome
    naive_fitness: float
    trial_fitness: List[float]
    masks: List[OcclusionMask]
    states: List[Tuple[bool, int]]


def port_cells(layout: Layout, library: Registry[Fragment]) -> Set[Cell]:
    cells: Set[Cell] = set()
    for pair in layout.adjacency:
        for ref in pair:
            cells |= _port(layout, library, ref)[0]
    return cells


def stitch_optimize(
    layout: Layout,
    library: Registry[Fragment],
    *,
    weights: Optional[FitnessWeights] = None,
    masks: Optional[Sequence[OcclusionMask]] = None,
    trials: int = 10,
    seed: int = 0,
    mask_count: int = 4,
    full_search: bool = False,
    workers: int = 1,
    max_iterations: Optional[int] = None
) -> StitchResult:
    """Join fragment solutions on a layout.

    Every trial draws random mirror states for mirror invariant fragments,
    then walks the port pairs and, for each fragment not settled yet, picks
    the mirror state and rigid shift with the best global fitness. A local
    search over genes within twice the sensor range of a port finishes the
    trial. The best trial wins and is never worse than the naive assembly.
    """
    if trials < 1:
        raise ValueError('at least one trial is required')
    scenario = assemble_scenario(layout, library)
    weights = weights or default_weights(scenario.n_road)
    masks = list(masks or sample_occlusion_masks(scenario, seed, mask_count))
    index = index_for(scenario)
    evaluator = Evaluator(scenario, weights, masks, index=index)
    assembler = _Assembler(layout, library, scenario)
    names = [placement.name for placement in layout.placements]

    order: List[int] = []
    for pair in layout.adjacency:
        for ref in pair:
            k = names.index(ref.partition('.')[0])
            if k not in order:
                order.append(k)
    order.extend(k for k in range(len(names)) if k not in order)

    radius = 2 * scenario.sensor_spec.range_m / scenario.grid_len
    movable = None if full_search else genes_near(
        port_cells(layout, library),
        radius
    )

    def fitness_of(states: List[Tuple[bool, int]]) -> float:
        return evaluator.fitness(assembler.chromosome(states).genes)

    def run_trial(trial: int) -> Tuple[Chromosome, List[Tuple[bool, int]]]:
        rng = np.random.default_rng([seed, trial])
        draws = rng.random(len(names))
        states = []
        for k, draw in enumerate(draws):
            toggle = bool(draw < 0.5) and assembler.fragment(k).mirror_invariant()
            states.append((toggle, 0))
        for k in order:
            best_state = states[k]
            best_fitness = None
            for option in assembler.options(k):
                states[k] = option
                value = fitness_of(states)
                if best_fitness is None or value > best_fitness:
                    best_fitness = value
                    best_state = option
            states[k] = best_state
        chromosome = local_search(
            assembler.chromosome(states),
            scenario,
            weights,
            masks,
            index=index,
            movable=movable,
            max_iterations=max_iterations
        )
        if chromosome.fitness is None:
            chromosome.fitness = evaluator.fitness(chromosome.genes)
        logger.info(
            'Stitch trial %d: fitness %.6g with %d sensors',
            trial,
            chromosome.fitness,
            len(chromosome)
        )
        return chromosome, states

    if workers > 1 and trials > 1:
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=workers
        ) as executor:
            outcomes = list(executor.map(run_trial, range(trials)))
    else:
        outcomes = [run_trial(trial) for trial in range(trials)]

    best, best_states = outcomes[0]
    for chromosome, states in outcomes[1:]:
        if chromosome.fitness > best.fitness:
            best, best_states = chromosome, states

    naive_states = [(False, 0)] * len(names)
    naive = assembler.chromosome(naive_states)
    naive.fitness = evaluator.fitness(naive.genes)
    if best.fitness < naive.fitness:
        logger.warning('Stitched solution is less fit, keeping the naive one')
        best, best_states = naive, naive_states

    return StitchResult(
        scenario=scenario,
        chromosome=best,
        naive_fitness=naive.fitness,
        trial_fitness=[chromosome.fitness for chromosome, _ in outcomes],
        masks=masks,
        states=best_states,
    )


def ensure_solutions(library: Registry[Fragment], settings: Settings):
    """Optimize every fragment lacking a stored solution."""
    for fragment in library.get_all():
        if fragment.solution is not None and len(fragment.solution):
            continue
        logger.warning(
            'Fragment "%s" has no stored solution, optimizing it',
            fragment.id
        )
        context = run_pipeline(fragment.scenario, settings)
        fragment.solution = context.chromosome
        if fragment.kind == STRAIGHT_SEGMENT and fragment.period_m is None:
            fragment.period_m = context.extras.get('period_m')


def _parse_solution(
    items: List[Dict[str, Any]],
    scenario: Scenario
) -> Chromosome:
    index = index_for(scenario)
    genes = []
    for item in items:
        pos = (int(item['x']), int(item['y']))
        if not scenario.is_free(pos):
            raise LayoutError('solution gene on non-free cell', cell=pos)
        genes.append(Gene(pos[0], pos[1], index.snap(
            pos,
            math.radians(float(item['phi_deg']))
        )))
    return Chromosome(genes)


def fragment_from_dict(
    data: Dict[str, Any],
    base: Optional[Path] = None
) -> Fragment:
    try:
        fragment_id = data['id']
        if 'scenario' in data:
            scenario = parse_scenario(data['scenario'])
        else:
            scenario = load_scenario((base or Path('.')) / data['scenario_path'])
        ports = {}
        for item in data.get('ports', ()):
            port = Port(item['name'], item['side'], tuple(item['span']))
            ports[port.name] = port
        solution = None
        if data.get('solution'):
            solution = _parse_solution(data['solution'], scenario)
        return Fragment(
            id=fragment_id,
            scenario=scenario,
            kind=data['kind'],
            ports=ports,
            solution=solution,
            lanes=int(data.get('lanes', 1)),
            axis=data.get('axis'),
            period_m=data.get('period_m'),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LayoutError('malformed fragment entry: {}'.format(exc))


def load_library(path: Union[str, Path]) -> Registry[Fragment]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise LayoutError('cannot read library {}: {}'.format(path, exc))
    library = Registry[Fragment]()
    for item in data.get('fragments', ()):
        fragment = fragment_from_dict(item, path.parent)
        library.register(fragment, fragment.id)
    return library


def layout_from_dict(data: Dict[str, Any]) -> Layout:
    try:
        placements = [
            Placement(
                name=item['name'],
                fragment=item['fragment'],
                offset=tuple(item.get('offset', (0, 0))),
                rotation=int(item.get('rotation', 0)),
                mirror=bool(item.get('mirror', False)),
            )
            for item in data['placements']
        ]
        return Layout(
            width=int(data['width']),
            height=int(data['height']),
            placements=placements,
            adjacency=[tuple(pair) for pair in data.get('adjacency', ())],
            fill=data.get('fill', '#'),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LayoutError('malformed layout: {}'.format(exc))


def load_layout(path: Union[str, Path]) -> Layout:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise LayoutError('cannot read layout {}: {}'.format(path, exc))
    return layout_from_dict(data)
