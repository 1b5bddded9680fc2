import math

from dataclasses import dataclass, field
from typing import (
    Callable,
    Collection,
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import numpy as np

from .exceptions import (
    ConfigError,
    EmptyStreetSet,
    InfeasibleScenario,
    PopulationError,
)
from .fitness import Evaluator, FitnessWeights, default_weights
from .gridworld import OcclusionMask, Scenario, sample_occlusion_masks
from .logging import logger
from .utils import Cell
from .visibility import CoverageIndex, Gene, index_for


SHIFT_POSITION = 0
SHIFT_ANGLE = 1
DELETE = 2

# Share of the population carried over unchanged.
TOP_FRACTION = 0.1


class Chromosome:
    """An ordered set of genes with distinct positions.

    Genes repeating an already used position are dropped on construction.
    """

    def __init__(
        self,
        genes: Iterable[Gene] = (),
        *,
        fitness: Optional[float] = None
    ):
        kept = []
        seen: Set[Cell] = set()
        for gene in genes:
            if gene.pos in seen:
                continue
            seen.add(gene.pos)
            kept.append(gene)
        self.genes: Tuple[Gene, ...] = tuple(kept)
        self.fitness = fitness

    def __repr__(self):
        return '<Chromosome genes={} fitness={}>'.format(
            len(self.genes),
            self.fitness
        )

    def __len__(self) -> int:
        return len(self.genes)

    def __iter__(self) -> Iterator[Gene]:
        return iter(self.genes)

    @property
    def positions(self) -> Set[Cell]:
        return {gene.pos for gene in self.genes}

    def same_genes(self, other: 'Chromosome') -> bool:
        return sorted(self.genes, key=Gene.sort_key) == \
            sorted(other.genes, key=Gene.sort_key)


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 150
    p_mut: float = 0.1
    p_cross: float = 1.0
    p_div: float = 0.3
    stall_generations: int = 5
    max_generations: int = 500
    max_sensors: Optional[int] = None
    seed: int = 0
    mask_count: int = 4
    sigma_pos_cells: float = 2.0
    sigma_ang_rad: float = math.radians(15.0)
    p_add_gene: float = 0.1
    workers: int = 1

    def __post_init__(self):
        for key in ('p_mut', 'p_cross', 'p_div', 'p_add_gene'):
            value = getattr(self, key)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(key, 'probability outside [0, 1]')
        if self.population_size < 2:
            raise ConfigError('population_size', 'must be at least 2')
        if self.stall_generations < 1:
            raise ConfigError('stall_generations', 'must be at least 1')
        if self.max_generations < 0:
            raise ConfigError('max_generations', 'must not be negative')
        if self.max_sensors is not None and self.max_sensors < 1:
            raise ConfigError('max_sensors', 'must be at least 1')
        if self.seed < 0:
            raise ConfigError('seed', 'must be non-negative')
        if self.mask_count < 1:
            raise ConfigError('mask_count', 'must be at least 1')

    def sensor_cap(self, scenario: Scenario) -> int:
        if self.max_sensors is not None:
            return self.max_sensors
        return 4 * scenario.wedge_lower_bound()


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best: float
    mean: float


@dataclass
class CrossoverTrace:
    """Genes picked by a crossover with the owed covers each settled."""
    picks: List[Tuple[Gene, int]] = field(default_factory=list)
    conflicts: int = 0


@dataclass
class GAResult:
    best: Chromosome
    history: List[GenerationStats]
    generations_run: int
    seed: int
    stopped_by: str = 'max_generations'
    crossover_regressions: int = 0
    masks: List[OcclusionMask] = field(default_factory=list)


def _check_feasible(scenario: Scenario):
    if scenario.n_road < 1:
        raise EmptyStreetSet()
    if not scenario.free_cells:
        raise InfeasibleScenario('no free cell to place a sensor on')


def coverage_demand(scenario: Scenario) -> np.ndarray:
    """Covers still owed per street cell: two on priority cells, one
    elsewhere."""
    return np.where(scenario.priority_mask, 2, 1).astype(np.int64)


def settle_demand(demand: np.ndarray, ids: np.ndarray):
    """Book one cover on every cell in `ids`."""
    demand[ids] = np.maximum(demand[ids] - 1, 0)


def _uncovered_array(
    uncovered: Union[np.ndarray, Collection[Cell]],
    scenario: Scenario
) -> np.ndarray:
    if isinstance(uncovered, np.ndarray):
        return uncovered
    array = np.zeros(scenario.n_road, dtype=bool)
    for cell in uncovered:
        array[scenario.street_index[cell]] = True
    return array


def random_chromosome(
    scenario: Scenario,
    config: GAConfig,
    rng: np.random.Generator,
    index: Optional[CoverageIndex] = None
) -> Chromosome:
    index = index or index_for(scenario)
    free = scenario.free_cells
    upper = min(
        3 * scenario.wedge_lower_bound(),
        config.sensor_cap(scenario),
        len(free)
    )
    count = int(rng.integers(1, upper + 1))
    picks = rng.choice(len(free), size=count, replace=False)
    genes = []
    for i in picks:
        pos = free[int(i)]
        angles = index.angles(pos)
        genes.append(Gene(pos[0], pos[1], float(angles[rng.integers(len(angles))])))
    return Chromosome(genes)


def init_population(
    scenario: Scenario,
    config: GAConfig,
    rng: np.random.Generator,
    index: Optional[CoverageIndex] = None
) -> List[Chromosome]:
    _check_feasible(scenario)
    index = index or index_for(scenario)
    return [
        random_chromosome(scenario, config, rng, index)
        for _ in range(config.population_size)
    ]


def gene_rank_key(
    gene: Gene,
    demand: np.ndarray,
    mask: OcclusionMask,
    index: CoverageIndex
) -> Tuple[int, int, int, int, float]:
    """Sort key: cells still owed a cover that the gene covers, then
    street cells in range, then (y, x, phi)."""
    gain = int(np.count_nonzero(demand[index.covered(gene, mask)]))
    return -gain, -index.in_range(gene.pos), gene.y, gene.x, gene.phi


def rank_genes(
    genes: Iterable[Gene],
    uncovered: Union[np.ndarray, Collection[Cell]],
    scenario: Scenario,
    mask: OcclusionMask,
    index: Optional[CoverageIndex] = None
) -> List[Gene]:
    """Order genes by owed cells covered, then by street cells in range,
    then by (y, x, phi). `uncovered` is a demand array or a set of cells
    owed one cover each."""
    index = index or index_for(scenario)
    uncovered = _uncovered_array(uncovered, scenario)
    return sorted(
        genes,
        key=lambda gene: gene_rank_key(gene, uncovered, mask, index)
    )


def crossover_with_trace(
    parent_a: Chromosome,
    parent_b: Chromosome,
    scenario: Scenario,
    mask: OcclusionMask,
    index: Optional[CoverageIndex] = None
) -> Tuple[Chromosome, CrossoverTrace]:
    index = index or index_for(scenario)
    pool = list(dict.fromkeys(parent_a.genes + parent_b.genes))
    demand = coverage_demand(scenario)
    placed: Set[Cell] = set()
    trace = CrossoverTrace()
    child = []

    while pool:
        best_key = None
        best = None
        for gene in pool:
            if gene.pos in placed:
                continue
            key = gene_rank_key(gene, demand, mask, index)
            if best_key is None or key < best_key:
                best_key = key
                best = gene
        if best is None or best_key[0] == 0:
            break
        child.append(best)
        trace.picks.append((best, -best_key[0]))
        settle_demand(demand, index.covered(best, mask))
        placed.add(best.pos)
        pool.remove(best)

    trace.conflicts = sum(
        1 for gene in pool
        if gene.pos in placed
        and np.count_nonzero(demand[index.covered(gene, mask)])
    )
    return Chromosome(child), trace


def crossover(
    parent_a: Chromosome,
    parent_b: Chromosome,
    scenario: Scenario,
    mask: OcclusionMask,
    index: Optional[CoverageIndex] = None
) -> Chromosome:
    """Breed a child by sequential gene ranking.

    The best ranked gene of the combined parent pool moves to the child and
    every cell it covers is owed one cover less, priority cells starting at
    two, until no remaining gene covers an owed cell. Genes on an already
    used position are skipped.
    """
    child, _ = crossover_with_trace(parent_a, parent_b, scenario, mask, index)
    return child


def mutation_plan(
    n_genes: int,
    config: GAConfig,
    rng: np.random.Generator
) -> List[Optional[int]]:
    """Per gene mutation operator, None for untouched genes."""
    draws = rng.random(n_genes)
    ops = rng.integers(0, 3, size=n_genes)
    return [
        int(op) if draw < config.p_mut else None
        for draw, op in zip(draws, ops)
    ]


def _nearest_free(
    scenario: Scenario,
    target: Cell,
    occupied: Set[Cell]
) -> Optional[Cell]:
    xy = scenario.free_xy
    d2 = ((xy[:, 0] - target[0]) ** 2 + (xy[:, 1] - target[1]) ** 2)
    d2 = d2.astype(float)
    for cell in occupied:
        i = scenario.free_index.get(cell)
        if i is not None:
            d2[i] = np.inf
    i = int(np.argmin(d2))
    if not np.isfinite(d2[i]):
        return None
    return scenario.free_cells[i]


def mutate(
    chromosome: Chromosome,
    scenario: Scenario,
    config: GAConfig,
    rng: np.random.Generator,
    index: Optional[CoverageIndex] = None
) -> Chromosome:
    """Gaussian mutation.

    Each gene mutates with probability p_mut by a position shift, an angle
    shift or deletion, chosen uniformly. With probability p_add_gene a
    random gene is appended, up to the sensor cap.
    """
    index = index or index_for(scenario)
    plan = mutation_plan(len(chromosome), config, rng)
    occupied = set(chromosome.positions)
    genes = []
    changed = False

    for gene, op in zip(chromosome.genes, plan):
        if op is None:
            genes.append(gene)
            continue
        changed = True
        if op == DELETE:
            occupied.discard(gene.pos)
            continue
        if op == SHIFT_POSITION:
            offset = rng.normal(0.0, config.sigma_pos_cells, size=2)
            target = (
                min(max(int(np.rint(gene.x + offset[0])), 0), scenario.width - 1),
                min(max(int(np.rint(gene.y + offset[1])), 0), scenario.height - 1),
            )
            occupied.discard(gene.pos)
            pos = _nearest_free(scenario, target, occupied) or gene.pos
            occupied.add(pos)
            genes.append(Gene(pos[0], pos[1], index.snap(pos, gene.phi)))
        else:
            phi = gene.phi + rng.normal(0.0, config.sigma_ang_rad)
            genes.append(Gene(gene.x, gene.y, index.snap(gene.pos, phi)))

    if rng.random() < config.p_add_gene \
            and len(genes) < config.sensor_cap(scenario):
        vacant = [cell for cell in scenario.free_cells if cell not in occupied]
        if vacant:
            pos = vacant[int(rng.integers(len(vacant)))]
            angles = index.angles(pos)
            genes.append(
                Gene(pos[0], pos[1], float(angles[rng.integers(len(angles))]))
            )
            changed = True

    if not changed:
        return chromosome
    return Chromosome(genes)


def select_next_generation(
    pool: Sequence[Chromosome],
    scenario: Scenario,
    config: GAConfig,
    rng: np.random.Generator,
    index: Optional[CoverageIndex] = None
) -> List[Chromosome]:
    """Resize an evaluated pool to the population size.

    The fittest tenth (the best chromosome included) is carried over,
    p_div * N fresh random chromosomes are injected and a roulette wheel on
    shifted fitness fills the remaining slots.

    Raises:
        PopulationError: If the pool is smaller than the population size.
    """
    size = config.population_size
    if len(pool) < size:
        raise PopulationError(len(pool), size)
    if any(chromosome.fitness is None for chromosome in pool):
        raise ValueError('every pool chromosome must be evaluated')

    fitness = np.array([chromosome.fitness for chromosome in pool])
    order = sorted(range(len(pool)), key=lambda i: (-fitness[i], i))
    n_top = max(1, int(round(TOP_FRACTION * size)))
    n_div = min(int(round(config.p_div * size)), size - n_top)
    n_wheel = size - n_top - n_div

    survivors = [pool[i] for i in order[:n_top]]
    fresh = [
        random_chromosome(scenario, config, rng, index)
        for _ in range(n_div)
    ]
    shifted = fitness - fitness.min() + 1.0
    picks = rng.choice(len(pool), size=n_wheel, p=shifted / shifted.sum())
    return survivors + fresh + [pool[int(i)] for i in picks]


def _evaluate(chromosomes: Sequence[Chromosome], evaluator: Evaluator):
    pending = [c for c in chromosomes if c.fitness is None]
    if not pending:
        return
    scores = evaluator.evaluate_many([c.genes for c in pending])
    for chromosome, score in zip(pending, scores):
        chromosome.fitness = score


def _best(chromosomes: Sequence[Chromosome]) -> Chromosome:
    best = chromosomes[0]
    for chromosome in chromosomes[1:]:
        if chromosome.fitness > best.fitness:
            best = chromosome
    return best


def run_ga(
    scenario: Scenario,
    config: GAConfig,
    *,
    weights: Optional[FitnessWeights] = None,
    masks: Optional[Sequence[OcclusionMask]] = None,
    index: Optional[CoverageIndex] = None,
    callback: Optional[Callable[[int, List[Chromosome]], None]] = None
) -> GAResult:
    """Run the genetic optimization.

    Stops once the best fitness stayed exactly equal for
    `stall_generations` generations or after `max_generations`.
    """
    _check_feasible(scenario)
    index = index or index_for(scenario)
    weights = weights or default_weights(scenario.n_road)
    masks = list(masks or sample_occlusion_masks(
        scenario,
        config.seed,
        config.mask_count
    ))
    evaluator = Evaluator(
        scenario,
        weights,
        masks,
        index=index,
        workers=config.workers
    )
    seed = config.seed

    population = init_population(
        scenario,
        config,
        np.random.default_rng([seed, 0]),
        index
    )
    _evaluate(population, evaluator)
    elite = _best(population)
    history = [GenerationStats(
        0,
        elite.fitness,
        float(np.mean([c.fitness for c in population]))
    )]
    if callback:
        callback(0, population)

    stall = 0
    regressions = 0
    generation = 0
    stopped_by = 'max_generations'
    while generation < config.max_generations:
        generation += 1
        rng = np.random.default_rng([seed, generation])
        mask = masks[generation % len(masks)]

        order = rng.permutation(len(population))
        pairs = order[:2 * (len(order) // 2)].reshape(-1, 2)
        breed = rng.random(len(pairs)) < config.p_cross
        children = []
        for (i, j), bred in zip(pairs, breed):
            if not bred:
                continue
            parent_a = population[int(i)]
            parent_b = population[int(j)]
            child = crossover(parent_a, parent_b, scenario, mask, index)
            children.append((child, parent_a, parent_b))

        _evaluate([child for child, _, _ in children], evaluator)
        for child, parent_a, parent_b in children:
            if child.fitness < max(parent_a.fitness, parent_b.fitness):
                regressions += 1
                logger.debug(
                    'Generation %d: crossover child %.6g below parents '
                    '%.6g / %.6g',
                    generation,
                    child.fitness,
                    parent_a.fitness,
                    parent_b.fitness
                )

        pool = list(population) + [child for child, _, _ in children]
        mutated = [
            mutate(
                chromosome,
                scenario,
                config,
                np.random.default_rng([seed, generation, k, 1]),
                index
            )
            for k, chromosome in enumerate(pool)
        ]
        pool = [elite] + mutated
        _evaluate(pool, evaluator)

        population = select_next_generation(pool, scenario, config, rng, index)
        _evaluate(population, evaluator)
        best = _best(population)
        if best.fitness > elite.fitness:
            elite = best

        mean = float(np.mean([c.fitness for c in population]))
        history.append(GenerationStats(generation, elite.fitness, mean))
        logger.debug(
            'Generation %d: best %.6g mean %.6g sensors %d',
            generation,
            elite.fitness,
            mean,
            len(elite)
        )
        if callback:
            callback(generation, population)

        if history[-1].best == history[-2].best:
            stall += 1
        else:
            stall = 0
        if stall >= config.stall_generations:
            stopped_by = 'stall'
            break

    logger.info(
        'Genetic search stopped by %s after %d generations: '
        'fitness %.6g with %d sensors',
        stopped_by,
        generation,
        elite.fitness,
        len(elite)
    )
    return GAResult(
        best=elite,
        history=history,
        generations_run=generation,
        seed=seed,
        stopped_by=stopped_by,
        crossover_regressions=regressions,
        masks=masks,
    )


def greedy_baseline(
    scenario: Scenario,
    mask: OcclusionMask,
    index: Optional[CoverageIndex] = None
) -> Chromosome:
    """Deterministic greedy placement.

    Every step adds the (free cell, candidate angle) gene covering the most
    cells still owed a cover, ties broken by street cells in range and then
    by (y, x, phi), until no gene covers an owed cell. Priority cells are
    owed two covers, as in crossover.
    """
    index = index or index_for(scenario)
    demand = coverage_demand(scenario)
    placed: Set[Cell] = set()
    genes = []

    while True:
        best = None
        best_key = (0, 0)
        owed = (demand > 0).astype(np.int64)
        for pos in scenario.free_cells:
            if pos in placed:
                continue
            phis = index.angles(pos)
            if not len(phis):
                continue
            counts = index.wedge_counts(pos, phis, mask, owed)
            i = int(np.argmax(counts))
            key = (int(counts[i]), index.in_range(pos))
            if best is None or key > best_key:
                best = Gene(pos[0], pos[1], float(phis[i]))
                best_key = key
        if best is None or best_key[0] == 0:
            break
        genes.append(best)
        placed.add(best.pos)
        settle_demand(demand, index.covered(best, mask))

    logger.info('Greedy baseline placed %d sensors', len(genes))
    return Chromosome(genes)
