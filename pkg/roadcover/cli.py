import argparse
import logging

from pathlib import Path
from typing import Any, Dict, List, Optional

from .config import Settings, load_config
from .evolve import greedy_baseline
from .exceptions import RoadcoverError
from .fitness import Evaluator, coverage_metrics, default_weights
from .gridworld import (
    load_scenario,
    sample_occlusion_masks,
    serialize_scenario,
)
from .logging import logger
from .pipeline import run_pipeline
from .render import render_svg
from .results import (
    dump_result,
    evaluate_result,
    load_result,
    result_document,
    write_result,
)
from .stitch import (
    check_homogeneous,
    ensure_solutions,
    load_layout,
    load_library,
    stitch_optimize,
)


def _settings(args: argparse.Namespace) -> Settings:
    settings = load_config(args.config)
    return settings.override(
        seed=args.seed,
        mask_count=args.masks,
        trials=getattr(args, 'trials', None),
    )


def _write_svg(path: Optional[str], svg: str):
    if path:
        Path(path).write_text(svg)
        logger.info('Wrote %s', path)


def _summary(metrics, fitness: float) -> Dict[str, Any]:
    summary = metrics.to_dict()
    summary['fitness'] = fitness
    return summary


def cmd_optimize(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    settings = _settings(args)
    context = run_pipeline(scenario, settings)
    chromosome = context.chromosome
    metrics = context.metrics()
    document = result_document(
        serialize_scenario(scenario),
        chromosome.genes,
        context.fitness(chromosome),
        metrics,
        seed=settings.ga.seed,
        mask_count=settings.ga.mask_count,
        config=settings.echo(),
        trace=[record.to_dict() for record in context.trace],
        extras=context.extras,
    )
    write_result(document, args.output)
    _write_svg(args.svg, render_svg(scenario, chromosome.genes, metrics))
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    settings = _settings(args)
    context = run_pipeline(scenario, settings)
    pipeline_metrics = context.metrics()

    greedy = context.baseline
    if greedy is None:
        greedy = greedy_baseline(scenario, context.masks[0], context.index)
    greedy_metrics = coverage_metrics(
        greedy.genes,
        scenario,
        context.masks,
        context.index
    )
    gain = None
    if pipeline_metrics.c_eff and greedy_metrics.c_eff:
        gain = pipeline_metrics.c_eff / greedy_metrics.c_eff - 1.0

    document = {
        'pipeline': _summary(
            pipeline_metrics,
            context.fitness(context.chromosome)
        ),
        'greedy': _summary(
            greedy_metrics,
            context.evaluator.fitness(greedy.genes)
        ),
        'c_eff_gain': gain,
        'seed': settings.ga.seed,
        'mask_count': settings.ga.mask_count,
        'config': settings.echo(),
    }
    write_result(document, args.output)
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    stored = load_result(args.result)
    metrics = None
    if all(scenario.in_bounds(gene.pos) for gene in stored.genes):
        masks = sample_occlusion_masks(scenario, stored.seed, stored.mask_count)
        metrics = coverage_metrics(stored.genes, scenario, masks)
    svg = render_svg(scenario, stored.genes, metrics)
    Path(args.svg_output).write_text(svg)
    return 0


def cmd_stitch(args: argparse.Namespace) -> int:
    layout = load_layout(args.layout)
    library = load_library(args.library)
    settings = _settings(args)
    check_homogeneous(library, layout)
    ensure_solutions(library, settings)

    result = stitch_optimize(
        layout,
        library,
        trials=settings.trials,
        seed=settings.ga.seed,
        mask_count=settings.ga.mask_count,
        full_search=settings.stitch_full_search,
        workers=settings.ga.workers,
        max_iterations=settings.refine_max_iterations
    )
    evaluator = Evaluator(
        result.scenario,
        default_weights(result.scenario.n_road),
        result.masks
    )
    metrics = evaluator.metrics(result.chromosome.genes)
    document = result_document(
        serialize_scenario(result.scenario),
        result.chromosome.genes,
        result.chromosome.fitness,
        metrics,
        seed=settings.ga.seed,
        mask_count=settings.ga.mask_count,
        config=settings.echo(),
        extras={
            'naive_fitness': result.naive_fitness,
            'trial_fitness': result.trial_fitness,
            'placements': [
                {
                    'name': placement.name,
                    'mirror_toggled': toggle,
                    'shift': shift,
                }
                for placement, (toggle, shift) in zip(
                    layout.placements,
                    result.states
                )
            ],
        },
    )
    write_result(document, args.output)
    _write_svg(
        args.svg,
        render_svg(result.scenario, result.chromosome.genes, metrics)
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    stored = load_result(args.result)
    values = evaluate_result(stored)
    values['consistent'] = all(
        stored.document.get(key) == values[key]
        for key in ('fitness', 'c', 'c_eff')
        if key in stored.document
    )
    print(dump_result(values), end='')
    return 0


def _add_run_options(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help='key=value configuration file')
    parser.add_argument('--seed', type=int, help='override the config seed')
    parser.add_argument(
        '--masks',
        type=int,
        help='number of occlusion realizations averaged over'
    )
    parser.add_argument(
        '-o', '--output',
        help='result document path, stdout when omitted'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='roadcover',
        description='Directional sensor placement along roads'
    )
    parser.add_argument(
        '-v', '--verbose',
        action='store_true',
        help='log debug messages'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    optimize = commands.add_parser('optimize', help='optimize a scenario')
    optimize.add_argument('scenario')
    _add_run_options(optimize)
    optimize.add_argument('--svg', help='also render the result')
    optimize.set_defaults(handler=cmd_optimize)

    compare = commands.add_parser(
        'compare',
        help='compare the pipeline with the greedy baseline'
    )
    compare.add_argument('scenario')
    _add_run_options(compare)
    compare.set_defaults(handler=cmd_compare)

    render = commands.add_parser('render', help='draw a result as SVG')
    render.add_argument('scenario')
    render.add_argument('result')
    render.add_argument('svg_output')
    render.set_defaults(handler=cmd_render)

    stitch = commands.add_parser('stitch', help='stitch fragment solutions')
    stitch.add_argument('layout')
    stitch.add_argument('library')
    _add_run_options(stitch)
    stitch.add_argument('--trials', type=int, help='number of stitch trials')
    stitch.add_argument('--svg', help='also render the result')
    stitch.set_defaults(handler=cmd_stitch)

    evaluate = commands.add_parser(
        'evaluate',
        help='recompute the metrics of a result'
    )
    evaluate.add_argument('result')
    evaluate.set_defaults(handler=cmd_evaluate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(levelname)s %(name)s: %(message)s'
    )
    try:
        return args.handler(args)
    except RoadcoverError as exc:
        logger.error('%s', exc)
        return exc.exit_code
