__all__ = [
    'Chromosome',
    'CoverageIndex',
    'FitnessWeights',
    'GAConfig',
    'Gene',
    'LOGGER_NAME',
    'Pipeline',
    'RunContext',
    'Scenario',
    'SensorSpec',
    'Settings',
    'SymmetryGroup',
    'assemble_layout',
    'build_pipeline',
    'coverage_counts',
    'crossover',
    'evaluate_fitness',
    'greedy_baseline',
    'local_search',
    'logger',
    'parse_scenario',
    'run_ga',
    'stitch_optimize',
    'symmetrize',
]

from .config import Settings
from .evolve import Chromosome, GAConfig, crossover, greedy_baseline, run_ga
from .fitness import FitnessWeights, evaluate_fitness
from .gridworld import Scenario, SensorSpec, parse_scenario
from .logging import LOGGER_NAME, logger
from .pipeline import Pipeline, RunContext, build_pipeline
from .refine import local_search
from .stitch import assemble_layout, stitch_optimize
from .symmetry import SymmetryGroup, symmetrize
from .visibility import CoverageIndex, Gene, coverage_counts
