import pytest

import roadcover.stitch

from roadcover.config import Settings
from roadcover.evolve import Chromosome
from roadcover.exceptions import LayoutError, SensorSpecMismatch
from roadcover.fitness import Evaluator, coverage_metrics, default_weights
from roadcover.gridworld import CellTag, OcclusionMask
from roadcover.registry import Registry
from roadcover.stitch import (
    Placement,
    _Assembler,
    assemble_layout,
    assemble_scenario,
    check_homogeneous,
    ensure_solutions,
    fragment_from_dict,
    layout_from_dict,
    load_layout,
    load_library,
    port_cells,
    stitch_optimize,
)
from roadcover.visibility import Gene

from .conftest import scenario_doc


NO_MASK = OcclusionMask(frozenset(), 0)


PIECE = [
    '######',
    '......',
    'SSSSSS',
    '......',
    '######',
]


def segment(fragment_id='segment', *, sensor_range=3.0, solution=None):
    return {
        'id': fragment_id,
        'kind': 'straight_segment',
        'axis': 'x',
        'scenario': scenario_doc(PIECE, sensor_range=sensor_range),
        'ports': [
            {'name': 'w', 'side': 'w', 'span': [2, 2]},
            {'name': 'e', 'side': 'e', 'span': [2, 2]},
        ],
        'solution': solution if solution is not None else [
            {'x': 1, 'y': 1, 'phi_deg': 45.0},
            {'x': 4, 'y': 3, 'phi_deg': -135.0},
        ],
    }


WIDE = [
    '#' * 12,
    '.' * 12,
    'S' * 12,
    '.' * 12,
    '#' * 12,
]


def periodic_segment():
    """Sensors repeating every 4 cells on both sidewalks."""
    data = segment('periodic')
    data['scenario'] = scenario_doc(WIDE, sensor_range=3.0)
    data['period_m'] = 4.0
    data['solution'] = [
        {'x': x, 'y': 1, 'phi_deg': 45.0} for x in (1, 5, 9)
    ] + [
        {'x': x, 'y': 3, 'phi_deg': -135.0} for x in (3, 7, 11)
    ]
    return data


def library_of(*items):
    library = Registry()
    for item in items:
        fragment = fragment_from_dict(item)
        library.register(fragment, fragment.id)
    return library


def chain(count, *, adjacency=True, step=6, fragment='segment', width=6):
    placements = [
        {'name': 'p{}'.format(i), 'fragment': fragment, 'offset': [step * i, 0]}
        for i in range(count)
    ]
    pairs = [
        ['p{}.e'.format(i), 'p{}.w'.format(i + 1)]
        for i in range(count - 1)
    ] if adjacency else []
    return layout_from_dict({
        'width': step * (count - 1) + width,
        'height': 5,
        'placements': placements,
        'adjacency': pairs,
    })


class TestPlacement:

    def test_rotation(self):
        placement = Placement('p', 'segment', offset=(10, 0), rotation=90)
        fragment = fragment_from_dict(segment())
        piece = fragment.scenario
        assert placement.dims(piece) == (5, 6)
        assert placement.cell(piece, (0, 2)) == (12, 0)
        assert placement.direction((-1, 0)) == (0, -1)
        tags = placement.tags(piece)
        assert tags.shape == (6, 5)
        assert (tags[:, 2] == CellTag.STREET).all()

    def test_mirror(self):
        placement = Placement('p', 'segment', mirror=True)
        piece = fragment_from_dict(segment()).scenario
        assert placement.cell(piece, (0, 1)) == (5, 1)
        assert placement.direction((1, 0)) == (-1, 0)

    def test_invalid_rotation(self):
        with pytest.raises(LayoutError):
            Placement('p', 'segment', rotation=45)


class TestFragment:

    def test_solution_parsed(self):
        fragment = fragment_from_dict(segment())
        assert [gene.pos for gene in fragment.solution] == [(1, 1), (4, 3)]
        assert fragment.mirror_invariant()
        assert fragment.shift_range() == 1

    def test_period(self):
        data = segment()
        data['period_m'] = 3.0
        assert fragment_from_dict(data).shift_range() == 3

    def test_period_spanning_the_segment(self):
        data = segment()
        data['period_m'] = 6.0
        assert fragment_from_dict(data).shift_range() == 1

    def test_gene_on_street(self):
        data = segment(solution=[{'x': 1, 'y': 2, 'phi_deg': 0.0}])
        with pytest.raises(LayoutError):
            fragment_from_dict(data)

    def test_missing_field(self):
        data = segment()
        del data['kind']
        with pytest.raises(LayoutError):
            fragment_from_dict(data)

    def test_segment_needs_axis(self):
        data = segment()
        del data['axis']
        with pytest.raises(LayoutError):
            fragment_from_dict(data)


class TestAssemble:

    def test_single_fragment_is_identity(self):
        library = library_of(segment())
        scenario, naive = assemble_layout(chain(1), library)
        piece = library.get('segment')
        assert (scenario.tags == piece.scenario.tags).all()
        assert naive.same_genes(piece.solution)

    def test_two_segments(self):
        scenario, naive = assemble_layout(chain(2), library_of(segment()))
        assert scenario.width == 12
        assert scenario.n_road == 12
        assert sorted(gene.pos for gene in naive) == [
            (1, 1), (4, 3), (7, 1), (10, 3)
        ]

    def test_overlap(self):
        with pytest.raises(LayoutError):
            assemble_scenario(
                chain(2, adjacency=False, step=3),
                library_of(segment())
            )

    def test_ports_must_coincide(self):
        layout = chain(2)
        layout.adjacency = [('p0.w', 'p1.e')]
        with pytest.raises(LayoutError):
            assemble_scenario(layout, library_of(segment()))

    def test_dangling_port(self):
        with pytest.raises(LayoutError):
            assemble_scenario(chain(2, adjacency=False), library_of(segment()))

    def test_leaving_the_layout(self):
        layout = chain(2)
        layout.width = 10
        with pytest.raises(LayoutError):
            assemble_scenario(layout, library_of(segment()))

    def test_sensor_spec_mismatch(self):
        library = library_of(segment(), segment('wide', sensor_range=4.0))
        layout = chain(2)
        layout.placements[1] = Placement('p1', 'wide', offset=(6, 0))
        with pytest.raises(SensorSpecMismatch) as info:
            check_homogeneous(library, layout)
        assert info.value.exit_code == 4

    def test_port_cells(self):
        cells = port_cells(chain(2), library_of(segment()))
        assert cells == {(5, 2), (6, 2)}


class TestCity:

    def test_street_count(self, data_dir, intersection):
        library = load_library(data_dir / 'city_library.json')
        layout = load_layout(data_dir / 'city_layout.json')
        scenario = assemble_scenario(layout, library)
        segment_cells = library.get('segment').scenario.n_road
        assert scenario.n_road == 4 * intersection.n_road + 4 * segment_cells
        assert scenario.tags[40, 40] == CellTag.OBSTACLE

    def test_shipped_solutions_used_unchanged(self, data_dir, monkeypatch):
        def rerun(*args, **kwargs):
            raise AssertionError('stored solution optimized again')

        monkeypatch.setattr(roadcover.stitch, 'run_pipeline', rerun)
        library = load_library(data_dir / 'city_library.json')
        stored = {
            fragment.id: fragment.solution.genes
            for fragment in library.get_all()
        }
        assert len(stored['junction']) == 12
        assert len(stored['segment']) == 4
        ensure_solutions(library, Settings())
        for fragment in library.get_all():
            assert fragment.solution.genes == stored[fragment.id]

    def test_shipped_solutions_cover_their_fragments(self, data_dir):
        library = load_library(data_dir / 'city_library.json')
        for fragment in library.get_all():
            metrics = coverage_metrics(
                fragment.solution.genes,
                fragment.scenario,
                [NO_MASK]
            )
            assert metrics.c == 1.0, fragment.id
            assert metrics.priority == 1.0, fragment.id

    def test_naive_city_is_covered(self, data_dir):
        library = load_library(data_dir / 'city_library.json')
        layout = load_layout(data_dir / 'city_layout.json')
        scenario, naive = assemble_layout(layout, library)
        assert len(naive) == 4 * 12 + 4 * 4
        metrics = coverage_metrics(naive.genes, scenario, [NO_MASK])
        assert metrics.c == 1.0
        assert metrics.priority == 1.0

    def test_missing_files(self, tmp_path):
        with pytest.raises(LayoutError):
            load_library(tmp_path / 'missing.json')
        with pytest.raises(LayoutError):
            load_layout(tmp_path / 'missing.json')


class TestStitchOptimize:

    def test_never_worse_than_naive(self):
        library = library_of(segment())
        result = stitch_optimize(chain(3), library, trials=3, mask_count=1)
        assert len(result.trial_fitness) == 3
        assert result.chromosome.fitness >= result.naive_fitness
        assert result.chromosome.fitness == max(
            max(result.trial_fitness),
            result.naive_fitness
        )
        evaluator = Evaluator(
            result.scenario,
            default_weights(result.scenario.n_road),
            result.masks
        )
        assert evaluator.fitness(result.chromosome.genes) == pytest.approx(
            result.chromosome.fitness
        )

    def test_more_trials_never_hurt(self):
        library = library_of(segment())
        few = stitch_optimize(chain(3), library, trials=2, seed=4)
        many = stitch_optimize(chain(3), library, trials=4, seed=4)
        assert many.trial_fitness[:2] == few.trial_fitness
        assert many.chromosome.fitness >= few.chromosome.fitness

    def test_parallel_trials_match_serial(self):
        library = library_of(segment())
        serial = stitch_optimize(chain(2), library, trials=3)
        parallel = stitch_optimize(chain(2), library, trials=3, workers=3)
        assert serial.trial_fitness == parallel.trial_fitness
        assert serial.chromosome.same_genes(parallel.chromosome)

    def test_empty_solutions(self):
        library = library_of(segment(solution=[]))
        result = stitch_optimize(chain(2), library, trials=1)
        assert result.naive_fitness == 0.0
        assert isinstance(result.chromosome, Chromosome)

    def test_requires_a_trial(self):
        with pytest.raises(ValueError):
            stitch_optimize(chain(1), library_of(segment()), trials=0)

    def test_full_search_moves_every_gene(self):
        library = library_of(segment(solution=[
            {'x': 0, 'y': 1, 'phi_deg': 180.0},
        ]))
        layout = chain(1)
        fixed = stitch_optimize(layout, library, trials=1)
        free = stitch_optimize(layout, library, trials=1, full_search=True)
        assert free.chromosome.fitness >= fixed.chromosome.fitness
        assert Gene(0, 1, fixed.chromosome.genes[0].phi) in \
            fixed.chromosome.genes


class TestShifts:

    def assembler(self, layout, library):
        return _Assembler(layout, library, assemble_scenario(layout, library))

    def test_single_placement_is_never_shifted(self):
        data = segment()
        data['period_m'] = 3.0
        assembler = self.assembler(chain(1), library_of(data))
        assert assembler.options(0) == [(False, 0), (True, 0)]

    def test_aperiodic_segment_is_never_shifted(self):
        assembler = self.assembler(chain(2), library_of(segment()))
        for k in range(2):
            assert {shift for _, shift in assembler.options(k)} == {0}

    def test_joined_periodic_segment_scans_one_period(self):
        layout = chain(2, fragment='periodic', step=12, width=12)
        assembler = self.assembler(layout, library_of(periodic_segment()))
        assert assembler.options(0) == [
            (toggle, shift) for toggle in (False, True) for shift in range(4)
        ]

    def test_shift_keeps_pairwise_distances(self):
        layout = chain(2, fragment='periodic', step=12, width=12)
        assembler = self.assembler(layout, library_of(periodic_segment()))
        for shift in range(4):
            genes = assembler.genes(0, False, shift)
            assert len(genes) == 6
            for y, start in ((1, 1), (3, 3)):
                xs = sorted(gene.x for gene in genes if gene.y == y)
                assert xs == sorted(
                    (start + shift) % 4 + 4 * k for k in range(3)
                )
                assert all((b - a) % 4 == 0 for a in xs for b in xs)

    def test_single_fragment_keeps_its_solution(self):
        data = segment()
        data['period_m'] = 3.0
        result = stitch_optimize(chain(1), library_of(data), trials=3)
        assert all(shift == 0 for _, shift in result.states)


@pytest.mark.slow
class TestCityStitch:

    def test_ten_trials_cover_the_city(self, data_dir):
        library = load_library(data_dir / 'city_library.json')
        layout = load_layout(data_dir / 'city_layout.json')
        one = stitch_optimize(layout, library, trials=1, mask_count=2)
        ten = stitch_optimize(layout, library, trials=10, mask_count=2)
        assert ten.chromosome.fitness >= one.chromosome.fitness
        metrics = coverage_metrics(
            ten.chromosome.genes,
            ten.scenario,
            ten.masks
        )
        assert metrics.c == 1.0
