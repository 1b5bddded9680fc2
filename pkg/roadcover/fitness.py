import concurrent.futures

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .exceptions import EmptyStreetSet, InvalidWeights, NoOcclusionMasks
from .gridworld import OcclusionMask, Scenario
from .visibility import CoverageIndex, Gene, _suffix_counts, index_for


@dataclass(frozen=True)
class FitnessWeights:
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        if self.beta != self.alpha - self.delta:
            raise InvalidWeights(self, 'beta = alpha - delta')
        if not self.alpha > self.gamma:
            raise InvalidWeights(self, 'alpha > gamma')
        if not self.gamma > self.delta:
            raise InvalidWeights(self, 'gamma > delta')


@dataclass(frozen=True)
class CoverageMetrics:
    c: float
    c_eff: Optional[float]
    n_sens: int
    priority: float = 1.0

    def to_dict(self):
        return {
            'c': self.c,
            'c_eff': self.c_eff,
            'n_sens': self.n_sens,
            'priority': self.priority,
        }


def default_weights(n_road: int) -> FitnessWeights:
    if n_road < 1:
        raise EmptyStreetSet()
    return FitnessWeights(2 * n_road, 2 * n_road - 1, n_road, 1)


def score_counts(
    counts: np.ndarray,
    priority: np.ndarray,
    weights: FitnessWeights,
    n_sens: int
) -> float:
    """Fitness of one coverage realization.

    The overlap sum runs up to the largest n with N_cov(n) > 0, which
    equals the sum up to N_sens.
    """
    n_cov = _suffix_counts(counts)
    covered = int(n_cov[1]) if len(n_cov) > 1 else 0
    n_prio = int(np.count_nonzero(priority & (counts >= 2)))
    overlap = 0.0
    if len(n_cov) > 2:
        overlap = float(np.sum(n_cov[2:] / np.arange(1, len(n_cov) - 1)))
    return float(
        weights.alpha * covered
        + weights.beta * n_prio
        - weights.gamma * n_sens
        + weights.delta * overlap
    )


class ContributionTable:
    """
    Per cell share of the fitness. A cell covered k times contributes
    alpha [k >= 1] + beta [prio and k >= 2] + delta H(k - 1), so moving one
    sensor only touches the cells it leaves or enters.
    """

    def __init__(self, weights: FitnessWeights, size: int = 16):
        self.weights = weights
        self._grow(size)

    def _grow(self, size: int):
        k = np.arange(size)
        harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, size))])
        w = self.weights
        overlap = np.where(k >= 2, harmonic[np.maximum(k - 1, 0)], 0.0)
        self.plain = w.alpha * (k >= 1) + w.delta * overlap
        self.prio = w.beta * (k >= 2)
        self.size = size

    def reserve(self, top: int):
        """Make counts up to `top` - 1 addressable."""
        if top > self.size:
            self._grow(max(top, 2 * self.size))

    def __call__(self, counts: np.ndarray, priority: np.ndarray) -> float:
        self.reserve(int(counts.max()) + 1 if counts.size else 1)
        return float(np.sum(self.plain[counts] + self.prio[counts] * priority))


class Evaluator:
    """
    Fitness and metrics of gene lists over a fixed set of occlusion masks.

    Args:
        scenario (Scenario): The scenario.
        weights (FitnessWeights): Weights of the fitness function.
        masks (Sequence[OcclusionMask]): Realizations averaged over.
        index (Optional[CoverageIndex], optional):
            Shared coverage index. Defaults to the scenario's index.
        workers (int, optional):
            Threads used by `evaluate_many`. Results never depend on it.
            Defaults to 1.
    """

    def __init__(
        self,
        scenario: Scenario,
        weights: FitnessWeights,
        masks: Sequence[OcclusionMask],
        *,
        index: Optional[CoverageIndex] = None,
        workers: int = 1
    ):
        if not masks:
            raise NoOcclusionMasks()
        self.scenario = scenario
        self.weights = weights
        self.masks = list(masks)
        self.index = index or index_for(scenario)
        self.workers = max(1, workers)

    def counts(self, genes: Iterable[Gene], mask: OcclusionMask) -> np.ndarray:
        counts = np.zeros(self.scenario.n_road, dtype=np.int64)
        for gene in genes:
            counts[self.index.covered(gene, mask)] += 1
        return counts

    def fitness(self, genes: Sequence[Gene]) -> float:
        priority = self.scenario.priority_mask
        total = 0.0
        for mask in self.masks:
            total += score_counts(
                self.counts(genes, mask),
                priority,
                self.weights,
                len(genes)
            )
        return total / len(self.masks)

    def evaluate_many(self, gene_lists: Sequence[Sequence[Gene]]) -> List[float]:
        if self.workers == 1 or len(gene_lists) < 2:
            return [self.fitness(genes) for genes in gene_lists]
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=self.workers
        ) as executor:
            return list(executor.map(self.fitness, gene_lists))

    def metrics(self, genes: Sequence[Gene]) -> CoverageMetrics:
        return coverage_metrics(genes, self.scenario, self.masks, self.index)


def evaluate_fitness(
    genes: Sequence[Gene],
    scenario: Scenario,
    weights: FitnessWeights,
    masks: Sequence[OcclusionMask],
    index: Optional[CoverageIndex] = None
) -> float:
    return Evaluator(scenario, weights, masks, index=index).fitness(genes)


def coverage_metrics(
    genes: Sequence[Gene],
    scenario: Scenario,
    masks: Sequence[OcclusionMask],
    index: Optional[CoverageIndex] = None
) -> CoverageMetrics:
    """Coverage ratio averaged over masks and wedge-area efficiency.

    `c_eff` is None for an empty gene list.
    """
    if scenario.n_road < 1:
        raise EmptyStreetSet()
    if not masks:
        raise NoOcclusionMasks()
    index = index or index_for(scenario)
    priority = scenario.priority_mask
    n_prio = int(priority.sum())
    c = 0.0
    prio = 0.0
    for mask in masks:
        counts = np.zeros(scenario.n_road, dtype=np.int64)
        for gene in genes:
            counts[index.covered(gene, mask)] += 1
        c += np.count_nonzero(counts) / scenario.n_road
        if n_prio:
            prio += np.count_nonzero(priority & (counts >= 2)) / n_prio
    c /= len(masks)
    prio = prio / len(masks) if n_prio else 1.0

    n_sens = len(genes)
    c_eff = None
    if n_sens:
        street_area = scenario.n_road * scenario.grid_len ** 2
        c_eff = street_area / (n_sens * scenario.sensor_spec.wedge_area)
    return CoverageMetrics(c=c, c_eff=c_eff, n_sens=n_sens, priority=prio)
