import math

from collections import deque
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from .evolve import (
    Chromosome,
    coverage_demand,
    gene_rank_key,
    settle_demand,
)
from .exceptions import SymmetryError
from .fitness import Evaluator, FitnessWeights
from .gridworld import CellTag, OcclusionMask, Scenario
from .logging import logger
from .refine import local_search
from .utils import Cell
from .visibility import CoverageIndex, Gene, index_for


ROTATION = 'rotation'
MIRROR = 'mirror'
TRANSLATION = 'translation'

GeneKey = Tuple[int, int, float]


def _half_units(value: float, what: str) -> int:
    doubled = 2.0 * value
    if abs(doubled - round(doubled)) > 1e-9:
        raise SymmetryError(
            '{} {} is not a multiple of half a cell'.format(what, value)
        )
    return int(round(doubled))


def _format_coord(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(value)


@dataclass(frozen=True)
class SymmetryGroup:
    """
    A finite set of grid operations. Element 0 is always the identity.

    Rotations turn about `center` in quarter turns (`order` 4) or half
    turns (`order` 2). Mirrors reflect across the line `axis` = `offset`.
    Translations shift along `axis` by multiples of `step` cells, from
    `-repeats` to `repeats`.
    """
    kind: str
    axis: Optional[str] = None
    center: Tuple[float, float] = (0.0, 0.0)
    order: int = 1
    offset: float = 0.0
    step: int = 0
    repeats: int = 0

    def __post_init__(self):
        if self.kind == ROTATION:
            if self.order not in (2, 4):
                raise SymmetryError('rotation order must be 2 or 4')
            _half_units(self.center[0], 'rotation center')
            _half_units(self.center[1], 'rotation center')
        elif self.kind in (MIRROR, TRANSLATION):
            if self.axis not in ('x', 'y'):
                raise SymmetryError('axis must be "x" or "y"')
            if self.kind == MIRROR:
                _half_units(self.offset, 'mirror axis')
        else:
            raise SymmetryError('unknown group kind "{}"'.format(self.kind))

    def __str__(self):
        return self.to_text()

    @property
    def elements(self) -> List[int]:
        if self.kind == ROTATION:
            return list(range(self.order))
        if self.kind == MIRROR:
            return [0, 1]
        if not self.step:
            return [0]
        return [0] + [
            j for k in range(1, self.repeats + 1) for j in (k, -k)
        ]

    def with_period(self, step: int, repeats: int) -> 'SymmetryGroup':
        if self.kind != TRANSLATION:
            raise SymmetryError('only translations have a period')
        return replace(self, step=step, repeats=repeats)

    def to_text(self) -> str:
        if self.kind == ROTATION:
            return 'c{}:{},{}'.format(
                self.order,
                _format_coord(self.center[0]),
                _format_coord(self.center[1])
            )
        if self.kind == MIRROR:
            return 'mirror:{}={}'.format(self.axis, _format_coord(self.offset))
        return 'translation:{}'.format(self.axis)

    def validate(self, scenario: Scenario):
        """Raise SymmetryError unless the group's center or axis lies on
        the grid."""
        if self.kind == ROTATION:
            cx, cy = self.center
            if not (0 <= cx <= scenario.width - 1
                    and 0 <= cy <= scenario.height - 1):
                raise SymmetryError(
                    'rotation center {} outside the grid'.format(self.center)
                )
        elif self.kind == MIRROR:
            size = scenario.width if self.axis == 'x' else scenario.height
            if not 0 <= self.offset <= size - 1:
                raise SymmetryError(
                    'mirror axis {}={} outside the grid'.format(
                        self.axis,
                        self.offset
                    )
                )

    def map_cell(self, element: int, cell: Cell) -> Optional[Cell]:
        """Image of a cell, None when it falls between cells."""
        x, y = cell
        if element == 0:
            return cell
        if self.kind == ROTATION:
            c2x = _half_units(self.center[0], 'rotation center')
            c2y = _half_units(self.center[1], 'rotation center')
            dx = 2 * x - c2x
            dy = 2 * y - c2y
            for _ in range(element * (4 // self.order)):
                dx, dy = -dy, dx
            nx = c2x + dx
            ny = c2y + dy
            if nx % 2 or ny % 2:
                return None
            return nx // 2, ny // 2
        if self.kind == MIRROR:
            o2 = _half_units(self.offset, 'mirror axis')
            if self.axis == 'x':
                return o2 - x, y
            return x, o2 - y
        if self.axis == 'x':
            return x + element * self.step, y
        return x, y + element * self.step

    def map_angle(self, element: int, phi: float) -> float:
        if element == 0 or self.kind == TRANSLATION:
            return phi
        if self.kind == ROTATION:
            return phi + element * (4 // self.order) * math.pi / 2
        if self.axis == 'x':
            return math.pi - phi
        return -phi

    def is_invariant(self, scenario: Scenario) -> bool:
        """Whether every element maps tags and priority cells onto
        themselves."""
        for element in self.elements[1:]:
            for y in range(scenario.height):
                for x in range(scenario.width):
                    image = self.map_cell(element, (x, y))
                    if image is None or not scenario.in_bounds(image):
                        return False
                    if scenario.tag(image) != scenario.tag((x, y)):
                        return False
                    if ((image in scenario.priority)
                            != ((x, y) in scenario.priority)):
                        return False
        return True


def parse_symmetry(text: Optional[str]) -> Optional[SymmetryGroup]:
    """Parse `c4:cx,cy`, `c2:cx,cy`, `mirror:x=a`, `mirror:y=b`,
    `translation:x`, `translation:y` or `none`."""
    if text is None:
        return None
    text = text.strip()
    if not text or text == 'none':
        return None
    kind, sep, args = text.partition(':')
    if not sep:
        raise SymmetryError('cannot parse "{}"'.format(text))
    try:
        if kind in ('c4', 'c2'):
            cx, cy = (float(v) for v in args.split(','))
            return SymmetryGroup(ROTATION, center=(cx, cy), order=int(kind[1]))
        if kind == MIRROR:
            axis, _, offset = args.partition('=')
            return SymmetryGroup(MIRROR, axis=axis.strip(), offset=float(offset))
        if kind == TRANSLATION:
            return SymmetryGroup(TRANSLATION, axis=args.strip())
    except ValueError:
        raise SymmetryError('cannot parse "{}"'.format(text))
    raise SymmetryError('unknown group kind "{}"'.format(kind))


def _key(gene: Gene) -> GeneKey:
    return gene.x, gene.y, gene.phi


def map_gene(
    group: SymmetryGroup,
    element: int,
    gene: Gene,
    scenario: Scenario,
    index: Optional[CoverageIndex] = None
) -> Optional[Gene]:
    """Image of a gene with its angle snapped at the image cell, None when
    the image cell is not Free."""
    if element == 0:
        return gene
    cell = group.map_cell(element, gene.pos)
    if cell is None or not scenario.is_free(cell):
        return None
    index = index or index_for(scenario)
    phi = index.snap(cell, group.map_angle(element, gene.phi))
    return Gene(cell[0], cell[1], phi)


def augment_with_symmetry(
    chromosome: Chromosome,
    group: SymmetryGroup,
    scenario: Scenario,
    index: Optional[CoverageIndex] = None
) -> Chromosome:
    """The input genes followed by their images under every non-identity
    element. Images on non-Free or already used cells are dropped."""
    index = index or index_for(scenario)
    genes = list(chromosome.genes)
    for element in group.elements[1:]:
        for gene in chromosome.genes:
            image = map_gene(group, element, gene, scenario, index)
            if image is not None:
                genes.append(image)
    return Chromosome(genes)


def multiplicity(
    gene: Gene,
    genes: Set[GeneKey],
    group: SymmetryGroup,
    scenario: Scenario,
    index: Optional[CoverageIndex] = None
) -> int:
    """Number of group elements mapping `gene` into `genes`."""
    count = 0
    for element in group.elements:
        image = map_gene(group, element, gene, scenario, index)
        if image is not None and _key(image) in genes:
            count += 1
    return count


@dataclass
class EliminationReport:
    pattern_breaks: int = 0
    broken: bool = False


def symmetry_eliminate(
    augmented: Chromosome,
    scenario: Scenario,
    mask: OcclusionMask,
    group: SymmetryGroup,
    max_pattern_breaks: int,
    index: Optional[CoverageIndex] = None
) -> Tuple[Chromosome, EliminationReport]:
    """Reduce an augmented solution to a symmetric subset.

    Genes are picked one at a time, ranked by multiplicity in the augmented
    solution and then as in crossover. After the first pick only genes
    some non-identity element maps a picked gene onto qualify. When none of
    them covers a cell still owed a cover (priority cells are owed two) a
    pattern break is counted and the best gene is taken anyway; once breaks
    exceed `max_pattern_breaks` the result is returned flagged as broken.
    """
    index = index or index_for(scenario)
    keys = {_key(gene) for gene in augmented.genes}
    ranked = {
        gene: multiplicity(gene, keys, group, scenario, index)
        for gene in augmented.genes
    }
    pool = list(augmented.genes)
    demand = coverage_demand(scenario)
    pattern: Set[GeneKey] = set()
    picked: List[Gene] = []
    report = EliminationReport()

    while True:
        candidates = []
        for gene in pool:
            key = gene_rank_key(gene, demand, mask, index)
            if key[0] < 0:
                candidates.append(((-ranked[gene],) + key, gene))
        if not candidates:
            break
        if picked:
            compliant = [c for c in candidates if _key(c[1]) in pattern]
            if not compliant:
                report.pattern_breaks += 1
                logger.debug(
                    'Pattern break %d: no compliant gene adds coverage',
                    report.pattern_breaks
                )
                if report.pattern_breaks > max_pattern_breaks:
                    report.broken = True
                    break
            else:
                candidates = compliant
        _, best = min(candidates, key=lambda c: c[0])
        picked.append(best)
        pool.remove(best)
        settle_demand(demand, index.covered(best, mask))
        for element in group.elements[1:]:
            image = map_gene(group, element, best, scenario, index)
            if image is not None:
                pattern.add(_key(image))

    return Chromosome(picked), report


def default_pattern_breaks(scenario: Scenario) -> int:
    """Road connected components plus road runs touching the border."""
    street = scenario.tags == CellTag.STREET
    height, width = street.shape
    seen = np.zeros_like(street)
    components = 0
    for y, x in zip(*np.nonzero(street)):
        if seen[y, x]:
            continue
        components += 1
        seen[y, x] = True
        queue = deque([(y, x)])
        while queue:
            cy, cx = queue.popleft()
            for ny, nx in ((cy + 1, cx), (cy - 1, cx), (cy, cx + 1), (cy, cx - 1)):
                if 0 <= ny < height and 0 <= nx < width \
                        and street[ny, nx] and not seen[ny, nx]:
                    seen[ny, nx] = True
                    queue.append((ny, nx))

    border = (
        [street[0, x] for x in range(width)]
        + [street[y, width - 1] for y in range(1, height)]
        + [street[height - 1, x] for x in range(width - 2, -1, -1)]
        + [street[y, 0] for y in range(height - 2, 0, -1)]
    )
    runs = sum(
        1 for i, value in enumerate(border)
        if value and not border[i - 1]
    )
    if border and all(border):
        runs = 1
    return components + runs


@dataclass
class SymmetrizeReport:
    pattern_breaks: int = 0
    broken: bool = False
    kept_input: bool = False


def symmetrize(
    chromosome: Chromosome,
    scenario: Scenario,
    weights: FitnessWeights,
    masks: Sequence[OcclusionMask],
    group: SymmetryGroup,
    *,
    max_pattern_breaks: Optional[int] = None,
    index: Optional[CoverageIndex] = None,
    max_iterations: Optional[int] = None
) -> Tuple[Chromosome, SymmetrizeReport]:
    """Augment, eliminate and refine; keep the better of input and
    result."""
    index = index or index_for(scenario)
    group.validate(scenario)
    if max_pattern_breaks is None:
        max_pattern_breaks = default_pattern_breaks(scenario)
    evaluator = Evaluator(scenario, weights, masks, index=index)

    augmented = augment_with_symmetry(chromosome, group, scenario, index)
    reduced, elimination = symmetry_eliminate(
        augmented,
        scenario,
        masks[0],
        group,
        max_pattern_breaks,
        index
    )
    refined = local_search(
        reduced,
        scenario,
        weights,
        masks,
        index=index,
        max_iterations=max_iterations
    )
    if refined.fitness is None:
        refined.fitness = evaluator.fitness(refined.genes)
    if chromosome.fitness is None:
        chromosome.fitness = evaluator.fitness(chromosome.genes)

    report = SymmetrizeReport(elimination.pattern_breaks, elimination.broken)
    logger.info(
        'Symmetrized with %s: %d -> %d sensors, fitness %.6g -> %.6g, '
        '%d pattern breaks',
        group,
        len(chromosome),
        len(refined),
        chromosome.fitness,
        refined.fitness,
        elimination.pattern_breaks
    )
    if refined.fitness < chromosome.fitness:
        logger.warning(
            'Symmetrized solution is less fit, keeping the input'
        )
        report.kept_input = True
        return chromosome, report
    return refined, report


def tile_motif(
    motif: Sequence[Gene],
    scenario: Scenario,
    axis: str,
    step: int,
    index: Optional[CoverageIndex] = None
) -> Chromosome:
    """Repeat `motif` every `step` cells along `axis` across the grid."""
    index = index or index_for(scenario)
    length = scenario.width if axis == 'x' else scenario.height
    repeats = length // step + 1
    group = SymmetryGroup(TRANSLATION, axis=axis, step=step, repeats=repeats)
    genes = []
    for j in range(-repeats, repeats + 1):
        for gene in motif:
            cell = group.map_cell(j, gene.pos)
            if not scenario.is_free(cell):
                continue
            genes.append(Gene(cell[0], cell[1], index.snap(cell, gene.phi)))
    genes.sort(key=Gene.sort_key)
    return Chromosome(genes)


def motif_window(length: int, step: int) -> Tuple[int, int]:
    """Centered window [start, stop) of one period along the axis."""
    start = max(0, (length - step) // 2)
    return start, start + step


def motif_windows(
    length: int,
    step: int,
    coords: Sequence[int]
) -> List[Tuple[int, int]]:
    """The centered window, then one starting at every gene coordinate,
    clamped into the grid."""
    last = max(0, length - step)
    windows = [motif_window(length, step)]
    for coord in sorted(set(coords)):
        start = min(max(0, coord), last)
        if (start, start + step) not in windows:
            windows.append((start, start + step))
    return windows


@dataclass
class TranslationCandidate:
    step: int
    period_m: float
    chromosome: Chromosome = field(repr=False)
    fitness: float
    window: Tuple[int, int] = (0, 0)


def scan_translations(
    chromosome: Chromosome,
    scenario: Scenario,
    weights: FitnessWeights,
    masks: Sequence[OcclusionMask],
    *,
    axis: Optional[str] = None,
    refine: bool = True,
    index: Optional[CoverageIndex] = None,
    max_iterations: Optional[int] = None
) -> List[TranslationCandidate]:
    """Tile the motif of every period from one cell to twice the sensor
    range and score each tiling.

    Each period tries the motif of every window in `motif_windows` and
    keeps the fittest tiling before the local search.

    Raises:
        SymmetryError: If no translation axis is declared.
    """
    if axis is None:
        group = parse_symmetry(scenario.symmetry)
        if group is None or group.kind != TRANSLATION:
            raise SymmetryError('no translation axis declared')
        axis = group.axis
    if axis not in ('x', 'y'):
        raise SymmetryError('axis must be "x" or "y"')
    index = index or index_for(scenario)
    evaluator = Evaluator(scenario, weights, masks, index=index)
    length = scenario.width if axis == 'x' else scenario.height
    longest = max(1, int(math.floor(
        2 * scenario.sensor_spec.range_m / scenario.grid_len + 1e-9
    )))

    coords = [gene.x if axis == 'x' else gene.y for gene in chromosome.genes]

    candidates = []
    for step in range(1, longest + 1):
        tiled = None
        for start, stop in motif_windows(length, step, coords):
            motif = [
                gene for gene, coord in zip(chromosome.genes, coords)
                if start <= coord < stop
            ]
            trial = tile_motif(motif, scenario, axis, step, index)
            trial.fitness = evaluator.fitness(trial.genes)
            if tiled is None or trial.fitness > tiled.fitness:
                tiled, window = trial, (start, stop)
        if refine and len(tiled):
            tiled = local_search(
                tiled,
                scenario,
                weights,
                masks,
                index=index,
                max_iterations=max_iterations
            )
        if tiled.fitness is None:
            tiled.fitness = evaluator.fitness(tiled.genes)
        candidates.append(TranslationCandidate(
            step=step,
            period_m=step * scenario.grid_len,
            chromosome=tiled,
            fitness=tiled.fitness,
            window=window,
        ))
        logger.debug(
            'Translation period %g m: fitness %.6g with %d sensors',
            step * scenario.grid_len,
            tiled.fitness,
            len(tiled)
        )
    return candidates


def optimize_translation(
    chromosome: Chromosome,
    scenario: Scenario,
    weights: FitnessWeights,
    masks: Sequence[OcclusionMask],
    *,
    axis: Optional[str] = None,
    refine: bool = True,
    index: Optional[CoverageIndex] = None,
    max_iterations: Optional[int] = None
) -> Tuple[float, Chromosome]:
    """Best translation period in meters and its tiled solution. Ties go
    to the shorter period."""
    candidates = scan_translations(
        chromosome,
        scenario,
        weights,
        masks,
        axis=axis,
        refine=refine,
        index=index,
        max_iterations=max_iterations
    )
    best = candidates[0]
    for candidate in candidates[1:]:
        if candidate.fitness > best.fitness:
            best = candidate
    logger.info(
        'Chose translation period %g m: fitness %.6g with %d sensors',
        best.period_m,
        best.fitness,
        len(best.chromosome)
    )
    return best.period_m, best.chromosome
