import math

import pytest

from roadcover.evolve import Chromosome
from roadcover.exceptions import SymmetryError
from roadcover.fitness import Evaluator, default_weights
from roadcover.gridworld import OcclusionMask
from roadcover.symmetry import (
    MIRROR,
    ROTATION,
    TRANSLATION,
    SymmetryGroup,
    augment_with_symmetry,
    default_pattern_breaks,
    map_gene,
    motif_window,
    motif_windows,
    multiplicity,
    optimize_translation,
    parse_symmetry,
    scan_translations,
    symmetrize,
    symmetry_eliminate,
    tile_motif,
)
from roadcover.visibility import CoverageIndex, Gene


NO_MASK = OcclusionMask(frozenset(), 0)

CROSS = [
    '###.S.###',
    '###.S.###',
    '###.S.###',
    '....S....',
    'SSSSSSSSS',
    '....S....',
    '###.S.###',
    '###.S.###',
    '###.S.###',
]


@pytest.fixture(scope='function')
def cross(make_scenario):
    return make_scenario(
        CROSS,
        sensor_range=5.0,
        fov_deg=90.0,
        extra=['symmetry=c4:4,4']
    )


@pytest.fixture(scope='function')
def c4() -> SymmetryGroup:
    return parse_symmetry('c4:4,4')


def orbit(scenario, group):
    index = CoverageIndex(scenario)
    seed = Gene(3, 3, float(index.angles((3, 3))[0]))
    return augment_with_symmetry(Chromosome([seed]), group, scenario, index)


def keys(genes):
    return {(gene.x, gene.y, gene.phi) for gene in genes}


class TestParse:

    @pytest.mark.parametrize('text', [
        'c4:14,14',
        'c2:3.5,2',
        'mirror:x=4.5',
        'mirror:y=3',
        'translation:y',
    ])
    def test_round_trip(self, text):
        assert parse_symmetry(text).to_text() == text

    @pytest.mark.parametrize('text', [None, '', 'none'])
    def test_no_group(self, text):
        assert parse_symmetry(text) is None

    @pytest.mark.parametrize('text', [
        'c3:1,1',
        'c4:1',
        'c4:0.3,1',
        'mirror:z=1',
        'translation:q',
        'spiral',
    ])
    def test_invalid(self, text):
        with pytest.raises(SymmetryError):
            parse_symmetry(text)

    def test_kinds(self):
        assert parse_symmetry('c2:1,1').kind == ROTATION
        assert parse_symmetry('mirror:x=1').kind == MIRROR
        assert parse_symmetry('translation:x').kind == TRANSLATION


class TestGroup:

    def test_elements(self, c4):
        assert c4.elements == [0, 1, 2, 3]
        assert parse_symmetry('mirror:x=2').elements == [0, 1]
        translation = parse_symmetry('translation:x')
        assert translation.elements == [0]
        assert translation.with_period(3, 2).elements == [0, 1, -1, 2, -2]

    def test_rotation_orbit(self, c4):
        images = {c4.map_cell(element, (5, 4)) for element in c4.elements}
        assert images == {(5, 4), (4, 5), (3, 4), (4, 3)}
        assert {c4.map_cell(e, (4, 4)) for e in c4.elements} == {(4, 4)}

    def test_rotation_turns_angles_with_cells(self, c4):
        assert c4.map_cell(1, (5, 4)) == (4, 5)
        assert c4.map_angle(1, 0.0) == pytest.approx(math.pi / 2)

    def test_half_cell_center(self):
        group = parse_symmetry('c4:0.5,0.5')
        assert group.map_cell(1, (0, 0)) == (1, 0)
        assert parse_symmetry('c4:0.5,0').map_cell(1, (0, 0)) is None

    def test_mirror(self):
        group = parse_symmetry('mirror:x=3.5')
        assert group.map_cell(1, (0, 2)) == (7, 2)
        assert group.map_angle(1, 0.0) == pytest.approx(math.pi)
        assert parse_symmetry('mirror:y=2').map_angle(1, 1.0) == -1.0

    def test_invariance(self, cross, c4, corridor, intersection):
        assert c4.is_invariant(cross)
        assert parse_symmetry(intersection.symmetry).is_invariant(intersection)
        assert not c4.is_invariant(corridor)

    def test_validate(self, corridor):
        with pytest.raises(SymmetryError):
            parse_symmetry('c4:20,1').validate(corridor)
        with pytest.raises(SymmetryError):
            parse_symmetry('mirror:y=7').validate(corridor)
        parse_symmetry('mirror:x=4.5').validate(corridor)


class TestAugment:

    def test_orbit(self, cross, c4):
        augmented = orbit(cross, c4)
        assert len(augmented) == 4
        assert augmented.genes[0].pos == (3, 3)
        assert augmented.positions == {(3, 3), (5, 3), (5, 5), (3, 5)}

    def test_images_on_blocked_cells_dropped(self, corridor):
        group = parse_symmetry('mirror:y=1.5')
        gene = Gene(2, 0, math.pi / 2)
        image = map_gene(group, 1, gene, corridor)
        assert image.pos == (2, 3)
        assert image.phi == pytest.approx(-math.pi / 2)
        assert map_gene(group, 1, Gene(2, 1, 0.0), corridor) is None

    def test_closure(self, cross, c4):
        augmented = orbit(cross, c4)
        for element in c4.elements:
            images = [map_gene(c4, element, gene, cross) for gene in augmented]
            assert keys(images) == keys(augmented.genes)

    def test_multiplicity(self, cross, c4):
        augmented = orbit(cross, c4)
        present = keys(augmented.genes)
        for gene in augmented:
            assert multiplicity(gene, present, c4, cross) == 4
        lonely = Gene(0, 3, 0.5)
        assert multiplicity(lonely, present, c4, cross) == 0


class TestEliminate:

    def test_symmetric_input_has_no_breaks(self, cross, c4):
        augmented = orbit(cross, c4)
        reduced, report = symmetry_eliminate(
            augmented,
            cross,
            NO_MASK,
            c4,
            max_pattern_breaks=0
        )
        assert report.pattern_breaks == 0
        assert not report.broken
        assert len(reduced) >= 1
        assert set(reduced.genes) <= set(augmented.genes)

    def test_multiplicity_wins_over_gain(self, cross, c4):
        index = CoverageIndex(cross)
        augmented = orbit(cross, c4)
        greedy = Gene(0, 3, index.snap((0, 3), math.pi / 4))
        pool = Chromosome(augmented.genes + (greedy,))
        reduced, _ = symmetry_eliminate(
            pool,
            cross,
            NO_MASK,
            c4,
            max_pattern_breaks=10,
            index=index
        )
        assert reduced.genes[0] in augmented.genes

    def test_break_budget(self, cross, c4):
        index = CoverageIndex(cross)
        genes = [
            Gene(0, 3, index.snap((0, 3), math.pi / 4)),
            Gene(8, 3, index.snap((8, 3), 3 * math.pi / 4)),
        ]
        reduced, report = symmetry_eliminate(
            Chromosome(genes),
            cross,
            NO_MASK,
            c4,
            max_pattern_breaks=0,
            index=index
        )
        assert report.pattern_breaks == 1
        assert report.broken
        assert len(reduced) == 1

    def test_priority_keeps_its_second_cover(self, make_scenario):
        scenario = make_scenario(['.SPS.'])
        group = parse_symmetry('mirror:x=2')
        genes = [Gene(0, 0, 0.0), Gene(4, 0, math.pi)]
        reduced, report = symmetry_eliminate(
            Chromosome(genes),
            scenario,
            NO_MASK,
            group,
            max_pattern_breaks=0
        )
        assert reduced.positions == {(0, 0), (4, 0)}
        assert report.pattern_breaks == 0


class TestPatternBreaks:

    def test_cross(self, cross):
        assert default_pattern_breaks(cross) == 5

    def test_corridor(self, corridor):
        assert default_pattern_breaks(corridor) == 3


class TestSymmetrize:

    def test_never_worse(self, cross, c4):
        weights = default_weights(cross.n_road)
        chromosome = Chromosome([Gene(0, 3, 0.5), Gene(5, 0, 2.0)])
        result, report = symmetrize(
            chromosome,
            cross,
            weights,
            [NO_MASK],
            c4
        )
        evaluator = Evaluator(cross, weights, [NO_MASK])
        assert result.fitness >= evaluator.fitness(chromosome.genes)
        assert report.pattern_breaks >= 0


class TestTranslation:

    def test_tile(self, corridor):
        tiled = tile_motif([Gene(1, 0, 0.5)], corridor, 'x', 3)
        assert [gene.pos for gene in tiled] == [(1, 0), (4, 0), (7, 0)]
        assert len({gene.phi for gene in tiled}) == 1

    def test_single_tile(self, corridor):
        tiled = tile_motif([Gene(1, 0, 0.5)], corridor, 'x', 10)
        assert [gene.pos for gene in tiled] == [(1, 0)]

    def test_motif_window(self):
        assert motif_window(10, 4) == (3, 7)
        assert motif_window(3, 5) == (0, 5)

    def test_motif_windows_start_at_genes(self):
        assert motif_windows(10, 4, [8, 0, 3, 3]) == [(3, 7), (0, 4), (6, 10)]
        assert motif_windows(3, 5, [1]) == [(0, 5)]

    def test_requires_axis(self, corridor):
        weights = default_weights(corridor.n_road)
        with pytest.raises(SymmetryError):
            scan_translations(Chromosome(), corridor, weights, [NO_MASK])

    def test_scan_and_choose(self, corridor):
        weights = default_weights(corridor.n_road)
        chromosome = Chromosome([Gene(x, 0, 1.0) for x in range(0, 10, 3)])
        candidates = scan_translations(
            chromosome,
            corridor,
            weights,
            [NO_MASK],
            axis='x',
            refine=False
        )
        assert [c.step for c in candidates] == list(range(1, 13))
        for candidate in candidates:
            assert candidate.window in motif_windows(
                10,
                candidate.step,
                [0, 3, 6, 9]
            )
        best = max(c.fitness for c in candidates)
        period, tiled = optimize_translation(
            chromosome,
            corridor,
            weights,
            [NO_MASK],
            axis='x',
            refine=False
        )
        first = next(c for c in candidates if c.fitness == best)
        assert period == first.period_m
        assert tiled.fitness == best

    def test_declared_axis(self, straight_road):
        weights = default_weights(straight_road.n_road)
        candidates = scan_translations(
            Chromosome([Gene(10, 1, 1.0)]),
            straight_road,
            weights,
            [NO_MASK],
            refine=False
        )
        assert candidates
