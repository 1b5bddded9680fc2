from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

from .config import Settings
from .evolve import Chromosome, greedy_baseline, run_ga
from .fitness import CoverageMetrics, Evaluator, FitnessWeights, default_weights
from .gridworld import OcclusionMask, Scenario, sample_occlusion_masks
from .logging import logger
from .refine import local_search
from .registry import Registry
from .symmetry import (
    TRANSLATION,
    SymmetryGroup,
    optimize_translation,
    symmetrize,
)
from .visibility import CoverageIndex, index_for


Stage = Callable[['RunContext'], Chromosome]


@dataclass(frozen=True)
class StageRecord:
    stage: str
    fitness: float
    n_sens: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'stage': self.stage,
            'fitness': self.fitness,
            'n_sens': self.n_sens,
        }


class RunContext:
    """
    Everything the stages of one optimization share.

    Args:
        scenario (Scenario): The scenario being optimized.
        settings (Settings): GA parameters and pipeline options.
        group (Optional[SymmetryGroup], optional):
            Symmetry used by the symmetry stages. Defaults to None.
        weights (Optional[FitnessWeights], optional):
            Fitness weights. Defaults to the weights derived from the
            street cell count.
        masks (Optional[Sequence[OcclusionMask]], optional):
            Occlusion realizations. Defaults to `mask_count` masks drawn
            from the configured seed.
        index (Optional[CoverageIndex], optional):
            Coverage index. Defaults to the scenario's shared index.
    """

    def __init__(
        self,
        scenario: Scenario,
        settings: Settings,
        *,
        group: Optional[SymmetryGroup] = None,
        weights: Optional[FitnessWeights] = None,
        masks: Optional[Sequence[OcclusionMask]] = None,
        index: Optional[CoverageIndex] = None
    ):
        self.scenario = scenario
        self.settings = settings
        self.group = group
        self.index = index or index_for(scenario)
        self.weights = weights or default_weights(scenario.n_road)
        self.masks = list(masks or sample_occlusion_masks(
            scenario,
            settings.ga.seed,
            settings.ga.mask_count
        ))
        self.evaluator = Evaluator(
            scenario,
            self.weights,
            self.masks,
            index=self.index,
            workers=settings.ga.workers
        )
        self.chromosome: Optional[Chromosome] = None
        self.baseline: Optional[Chromosome] = None
        self.trace: List[StageRecord] = []
        self.extras: Dict[str, Any] = {}

    def fitness(self, chromosome: Chromosome) -> float:
        if chromosome.fitness is None:
            chromosome.fitness = self.evaluator.fitness(chromosome.genes)
        return chromosome.fitness

    def metrics(self) -> CoverageMetrics:
        return self.evaluator.metrics(self.chromosome.genes)

    def record(self, stage: str):
        self.trace.append(StageRecord(
            stage,
            self.fitness(self.chromosome),
            len(self.chromosome)
        ))


class Pipeline:
    """Stages run in registration order, each replacing the context's
    chromosome."""

    def __init__(self):
        self._stages = Registry[Stage]()

    def register(self, stage: Stage, *, key: str, force: bool = False):
        self._stages.register(stage, key, force=force)

    @property
    def stages(self) -> List[str]:
        return self._stages.keys()

    def run(self, context: RunContext) -> Chromosome:
        for key, stage in self._stages.items():
            logger.info('Running stage %s', key)
            context.chromosome = stage(context)
            context.record(key)
        return context.chromosome


def ga_stage(context: RunContext) -> Chromosome:
    result = run_ga(
        context.scenario,
        context.settings.ga,
        weights=context.weights,
        masks=context.masks,
        index=context.index
    )
    context.extras['generations'] = result.generations_run
    context.extras['stopped_by'] = result.stopped_by
    context.extras['crossover_regressions'] = result.crossover_regressions
    return result.best


def refine_stage(context: RunContext) -> Chromosome:
    return local_search(
        context.chromosome,
        context.scenario,
        context.weights,
        context.masks,
        index=context.index,
        max_iterations=context.settings.refine_max_iterations
    )


def symmetrize_stage(context: RunContext) -> Chromosome:
    chromosome, report = symmetrize(
        context.chromosome,
        context.scenario,
        context.weights,
        context.masks,
        context.group,
        max_pattern_breaks=context.settings.max_pattern_breaks,
        index=context.index,
        max_iterations=context.settings.refine_max_iterations
    )
    context.extras['pattern_breaks'] = report.pattern_breaks
    context.extras['pattern_broken'] = report.broken
    context.extras['symmetry_kept_input'] = report.kept_input
    return chromosome


def translation_stage(context: RunContext) -> Chromosome:
    period, tiled = optimize_translation(
        context.chromosome,
        context.scenario,
        context.weights,
        context.masks,
        axis=context.group.axis,
        refine=context.settings.translation_refine,
        index=context.index,
        max_iterations=context.settings.refine_max_iterations
    )
    context.extras['period_m'] = period
    if context.fitness(tiled) < context.fitness(context.chromosome):
        logger.warning('Translated solution is less fit, keeping the input')
        return context.chromosome
    return tiled


def baseline_stage(context: RunContext) -> Chromosome:
    """Keep the refined greedy placement when it beats the pipeline."""
    context.baseline = greedy_baseline(
        context.scenario,
        context.masks[0],
        context.index
    )
    refined = local_search(
        context.baseline,
        context.scenario,
        context.weights,
        context.masks,
        index=context.index,
        max_iterations=context.settings.refine_max_iterations
    )
    kept = context.fitness(refined) > context.fitness(context.chromosome)
    context.extras['baseline_kept'] = kept
    if kept:
        logger.warning(
            'Refined greedy placement is fitter (%.6g > %.6g), keeping it',
            refined.fitness,
            context.chromosome.fitness
        )
        return refined
    return context.chromosome


def build_pipeline(
    settings: Settings,
    group: Optional[SymmetryGroup] = None
) -> Pipeline:
    """GA, local search and, with a symmetry group, symmetrization or
    translation search followed by a final local search. The greedy guard
    closes the run unless switched off."""
    pipeline = Pipeline()
    pipeline.register(ga_stage, key='ga')
    pipeline.register(refine_stage, key='refine')
    if group is not None:
        if group.kind == TRANSLATION:
            pipeline.register(translation_stage, key='translation')
        else:
            pipeline.register(symmetrize_stage, key='symmetrize')
        pipeline.register(refine_stage, key='final_refine')
    if settings.greedy_guard:
        pipeline.register(baseline_stage, key='greedy_guard')
    return pipeline


def run_pipeline(
    scenario: Scenario,
    settings: Settings,
    *,
    weights: Optional[FitnessWeights] = None,
    masks: Optional[Sequence[OcclusionMask]] = None
) -> RunContext:
    group = settings.group(scenario.symmetry)
    if group is not None:
        group.validate(scenario)
    context = RunContext(
        scenario,
        settings,
        group=group,
        weights=weights,
        masks=masks
    )
    build_pipeline(settings, group).run(context)
    return context
