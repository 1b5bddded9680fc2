from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from .evolve import Chromosome
from .fitness import ContributionTable, Evaluator, FitnessWeights
from .gridworld import OcclusionMask, Scenario
from .logging import logger
from .utils import Cell
from .visibility import CoverageIndex, Gene, index_for


RELOCATION_OFFSETS: Tuple[Cell, ...] = (
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (2, 0), (-2, 0), (0, 2), (0, -2),
)

NEAREST_ANGLES = 10

# Gains at or below this are rounding noise.
GAIN_TOLERANCE = 1e-7

RELOCATE = 'relocate'
REORIENT = 'reorient'
DELETE = 'delete'


@dataclass(frozen=True)
class Move:
    gene_index: int
    kind: str
    replacement: Optional[Gene]
    gain: float = 0.0


def candidate_moves(
    genes: Sequence[Gene],
    i: int,
    scenario: Scenario,
    index: CoverageIndex
) -> Iterator[Tuple[str, Optional[Gene]]]:
    """Moves of gene `i`: relocations to the 12 neighbour cells at the
    angles nearest its orientation, re-orientation in place, deletion."""
    gene = genes[i]
    occupied = {other.pos for other in genes}
    for dx, dy in RELOCATION_OFFSETS:
        target = (gene.x + dx, gene.y + dy)
        if target in occupied or not scenario.is_free(target):
            continue
        for phi in index.nearest_angles(target, gene.phi, NEAREST_ANGLES):
            yield RELOCATE, Gene(target[0], target[1], phi)
    for phi in index.nearest_angles(
        gene.pos,
        gene.phi,
        NEAREST_ANGLES,
        exclude=gene.phi
    ):
        yield REORIENT, Gene(gene.x, gene.y, phi)
    yield DELETE, None


class _State:
    """Coverage counts of a gene list under every mask."""

    def __init__(
        self,
        genes: List[Gene],
        scenario: Scenario,
        weights: FitnessWeights,
        masks: Sequence[OcclusionMask],
        index: CoverageIndex
    ):
        self.genes = genes
        self.masks = masks
        self.index = index
        self.weights = weights
        self.priority = scenario.priority_mask
        self.table = ContributionTable(weights)
        self.counts = []
        for mask in masks:
            counts = np.zeros(scenario.n_road, dtype=np.int64)
            for gene in genes:
                counts[index.covered(gene, mask)] += 1
            self.counts.append(counts)

    def _step(self, counts: np.ndarray, ids: np.ndarray) -> np.ndarray:
        """Per cell change in contribution when `ids` gain one sensor."""
        k = counts[ids]
        if k.size:
            self.table.reserve(int(k.max()) + 2)
        plain = self.table.plain
        prio = self.table.prio
        return (plain[k + 1] - plain[k]) \
            + (prio[k + 1] - prio[k]) * self.priority[ids]

    def removal(self, i: int) -> Tuple[float, List[np.ndarray]]:
        """Mean gain of removing gene `i` and the counts without it."""
        gene = self.genes[i]
        total = 0.0
        without = []
        for mask, counts in zip(self.masks, self.counts):
            ids = self.index.covered(gene, mask)
            rest = counts.copy()
            rest[ids] -= 1
            total -= float(np.sum(self._step(rest, ids)))
            without.append(rest)
        return total / len(self.masks) + self.weights.gamma, without

    def addition(self, gene: Gene, without: List[np.ndarray]) -> float:
        total = 0.0
        for mask, rest in zip(self.masks, without):
            ids = self.index.covered(gene, mask)
            total += float(np.sum(self._step(rest, ids)))
        return total / len(self.masks) - self.weights.gamma

    def apply(self, move: Move):
        old = self.genes[move.gene_index]
        for mask, counts in zip(self.masks, self.counts):
            counts[self.index.covered(old, mask)] -= 1
            if move.replacement is not None:
                counts[self.index.covered(move.replacement, mask)] += 1
        if move.replacement is None:
            del self.genes[move.gene_index]
        else:
            self.genes[move.gene_index] = move.replacement


def local_search(
    chromosome: Chromosome,
    scenario: Scenario,
    weights: FitnessWeights,
    masks: Sequence[OcclusionMask],
    *,
    index: Optional[CoverageIndex] = None,
    movable: Optional[Callable[[Gene], bool]] = None,
    max_iterations: Optional[int] = None
) -> Chromosome:
    """Steepest ascent over single gene moves.

    Every iteration applies the one move, over all genes, with the highest
    fitness gain and stops once no move gains. Genes rejected by `movable`
    stay fixed.
    """
    index = index or index_for(scenario)
    state = _State(list(chromosome.genes), scenario, weights, masks, index)
    applied = 0

    while max_iterations is None or applied < max_iterations:
        best: Optional[Move] = None
        for i, gene in enumerate(state.genes):
            if movable is not None and not movable(gene):
                continue
            removed, without = state.removal(i)
            for kind, replacement in candidate_moves(
                state.genes,
                i,
                scenario,
                index
            ):
                gain = removed
                if replacement is not None:
                    gain += state.addition(replacement, without)
                if best is None or gain > best.gain:
                    best = Move(i, kind, replacement, gain)
        if best is None or best.gain <= GAIN_TOLERANCE:
            break
        logger.debug(
            'Local search %s gene %s: gain %.6g',
            best.kind,
            state.genes[best.gene_index],
            best.gain
        )
        state.apply(best)
        applied += 1

    if not applied:
        return chromosome
    evaluator = Evaluator(scenario, weights, masks, index=index)
    result = Chromosome(state.genes, fitness=evaluator.fitness(state.genes))
    logger.debug('Local search applied %d moves', applied)
    return result


def improving_moves(
    chromosome: Chromosome,
    scenario: Scenario,
    weights: FitnessWeights,
    masks: Sequence[OcclusionMask],
    *,
    index: Optional[CoverageIndex] = None,
    tolerance: float = GAIN_TOLERANCE
) -> List[Move]:
    """Every move with a gain above `tolerance`, each gain taken from a
    full fitness evaluation."""
    index = index or index_for(scenario)
    evaluator = Evaluator(scenario, weights, masks, index=index)
    genes = list(chromosome.genes)
    base = evaluator.fitness(genes)
    moves = []
    for i in range(len(genes)):
        for kind, replacement in candidate_moves(genes, i, scenario, index):
            trial = list(genes)
            if replacement is None:
                del trial[i]
            else:
                trial[i] = replacement
            gain = evaluator.fitness(trial) - base
            if gain > tolerance:
                moves.append(Move(i, kind, replacement, gain))
    return moves


def genes_near(
    cells: Set[Cell],
    radius_cells: float
) -> Callable[[Gene], bool]:
    """Predicate selecting genes within `radius_cells` of any of `cells`."""
    points = np.array(sorted(cells), dtype=float).reshape(-1, 2)
    limit = radius_cells * radius_cells

    def near(gene: Gene) -> bool:
        if not len(points):
            return False
        d2 = (points[:, 0] - gene.x) ** 2 + (points[:, 1] - gene.y) ** 2
        return bool(np.any(d2 <= limit))

    return near
