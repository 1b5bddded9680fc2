import math

import numpy as np
import pytest

from roadcover.exceptions import (
    EmptyStreetSet,
    InvalidWeights,
    NoOcclusionMasks,
    RoadcoverError,
)
from roadcover.fitness import (
    ContributionTable,
    Evaluator,
    FitnessWeights,
    coverage_metrics,
    default_weights,
    evaluate_fitness,
    score_counts,
)
from roadcover.gridworld import OcclusionMask, sample_occlusion_masks
from roadcover.visibility import Gene, coverage_counts

from .conftest import random_scenario


NO_MASK = OcclusionMask(frozenset(), 0)


def direct_score(counts, priority, weights, n_sens):
    covered = sum(1 for k in counts if k >= 1)
    n_prio = sum(1 for k, p in zip(counts, priority) if p and k >= 2)
    overlap = 0.0
    for n in range(2, n_sens + 1):
        overlap += sum(1 for k in counts if k >= n) / (n - 1)
    return (
        weights.alpha * covered
        + weights.beta * n_prio
        - weights.gamma * n_sens
        + weights.delta * overlap
    )


class TestWeights:

    def test_default_weights(self):
        weights = default_weights(10)
        assert weights == FitnessWeights(20, 19, 10, 1)

    def test_single_street_cell_is_rejected(self):
        with pytest.raises(InvalidWeights):
            default_weights(1)

    def test_empty_street_set(self):
        with pytest.raises(EmptyStreetSet):
            default_weights(0)

    @pytest.mark.parametrize('values', [
        (10, 8, 5, 1),
        (5, 4, 6, 1),
        (10, 5, 5, 5),
    ])
    def test_ordering_is_enforced(self, values):
        with pytest.raises(InvalidWeights):
            FitnessWeights(*values)


class TestScore:

    def test_hand_computed(self):
        weights = FitnessWeights(8, 7, 4, 1)
        counts = np.array([0, 1, 2, 3])
        priority = np.array([False, False, True, True])
        # alpha * 3 + beta * 2 - gamma * 3 + delta * (2 + 1 / 2)
        expected = 24 + 14 - 12 + 2.5
        assert score_counts(counts, priority, weights, 3) == expected

    def test_no_sensors(self):
        weights = default_weights(4)
        counts = np.zeros(4, dtype=np.int64)
        assert score_counts(counts, np.zeros(4, dtype=bool), weights, 0) == 0.0

    @pytest.mark.parametrize('seed', range(5))
    def test_matches_direct_formula(self, seed):
        rng = np.random.default_rng(seed)
        scenario = random_scenario(rng, 15)
        free = scenario.free_cells
        picks = rng.choice(len(free), size=6, replace=False)
        genes = [
            Gene(*free[int(i)], float(rng.uniform(-math.pi, math.pi)))
            for i in picks
        ]
        weights = default_weights(scenario.n_road)
        masks = sample_occlusion_masks(scenario, seed, 3)
        expected = np.mean([
            direct_score(
                coverage_counts(genes, scenario, mask).counts.tolist(),
                scenario.priority_mask.tolist(),
                weights,
                len(genes)
            )
            for mask in masks
        ])
        actual = evaluate_fitness(genes, scenario, weights, masks)
        assert actual == pytest.approx(expected, rel=1e-9)


class TestContributionTable:

    @pytest.mark.parametrize('seed', range(4))
    def test_sum_matches_score_without_sensor_term(self, seed):
        rng = np.random.default_rng(seed)
        counts = rng.integers(0, 40, size=50)
        priority = rng.random(50) < 0.3
        weights = default_weights(50)
        table = ContributionTable(weights)
        n_sens = int(counts.max())
        expected = score_counts(counts, priority, weights, n_sens)
        expected += weights.gamma * n_sens
        assert table(counts, priority) == pytest.approx(expected, rel=1e-12)
        assert table.size > counts.max()

    def test_reserve_grows(self):
        table = ContributionTable(default_weights(4), size=4)
        table.reserve(10)
        assert table.size >= 10
        assert len(table.plain) == table.size


class TestEvaluator:

    def test_requires_masks(self, corridor):
        with pytest.raises(NoOcclusionMasks):
            Evaluator(corridor, default_weights(corridor.n_road), [])

    def test_parallel_equals_serial(self, plaza):
        rng = np.random.default_rng(3)
        free = plaza.free_cells
        gene_lists = []
        for _ in range(12):
            picks = rng.choice(len(free), size=3, replace=False)
            gene_lists.append([
                Gene(*free[int(i)], float(rng.uniform(-math.pi, math.pi)))
                for i in picks
            ])
        weights = default_weights(plaza.n_road)
        masks = [NO_MASK]
        serial = Evaluator(plaza, weights, masks).evaluate_many(gene_lists)
        parallel = Evaluator(
            plaza,
            weights,
            masks,
            workers=4
        ).evaluate_many(gene_lists)
        assert serial == parallel

    def test_covering_sensor_pays_for_itself(self, corridor):
        weights = default_weights(corridor.n_road)
        evaluator = Evaluator(corridor, weights, [NO_MASK])
        assert evaluator.fitness([]) == 0.0
        assert evaluator.fitness([Gene(0, 0, 0.5)]) > 0.0


class TestMetrics:

    def test_efficiency(self, make_scenario):
        rows = ['.' + 'S' * 10] + ['#' * 11]
        scenario = make_scenario(rows, sensor_range=20.0, fov_deg=40.0)
        metrics = coverage_metrics([Gene(0, 0, 0.0)], scenario, [NO_MASK])
        expected = 10 / (400 * math.radians(40.0) / 2)
        assert metrics.c_eff == pytest.approx(expected)
        assert metrics.c == 1.0
        assert metrics.n_sens == 1

    def test_efficiency_inverse_in_sensor_count(self, corridor):
        genes = [Gene(0, 0, 0.5), Gene(9, 0, 2.5)]
        one = coverage_metrics(genes[:1], corridor, [NO_MASK])
        two = coverage_metrics(genes, corridor, [NO_MASK])
        assert one.c_eff == pytest.approx(2 * two.c_eff)

    def test_no_sensors(self, corridor):
        metrics = coverage_metrics([], corridor, [NO_MASK])
        assert metrics.c == 0.0
        assert metrics.c_eff is None

    def test_priority_needs_double_coverage(self, plaza):
        masks = [NO_MASK]
        genes = [Gene(4, 0, math.pi / 2)]
        assert coverage_metrics(genes, plaza, masks).priority == 0.0
        single = coverage_metrics([], plaza, masks)
        assert single.priority == 0.0

    def test_no_priority_cells(self, corridor):
        metrics = coverage_metrics([], corridor, [NO_MASK])
        assert metrics.priority == 1.0

    def test_no_masks(self, corridor):
        with pytest.raises(RoadcoverError) as info:
            coverage_metrics([Gene(0, 0, 0.5)], corridor, [])
        assert isinstance(info.value, NoOcclusionMasks)
        assert info.value.exit_code == 2
