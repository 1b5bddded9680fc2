import json
import math

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from .exceptions import ResultError, RoadcoverError
from .fitness import CoverageMetrics, Evaluator, default_weights
from .gridworld import Scenario, parse_scenario, sample_occlusion_masks
from .visibility import Gene


def gene_to_dict(gene: Gene) -> Dict[str, Any]:
    return {
        'x': gene.x,
        'y': gene.y,
        'phi': gene.phi,
        'phi_deg': gene.phi_deg,
    }


def gene_from_dict(data: Dict[str, Any]) -> Gene:
    if 'phi' in data:
        phi = float(data['phi'])
    else:
        phi = math.radians(float(data['phi_deg']))
    return Gene(int(data['x']), int(data['y']), phi)


def result_document(
    scenario_doc: str,
    genes: Sequence[Gene],
    fitness: float,
    metrics: CoverageMetrics,
    *,
    seed: int,
    mask_count: int,
    config: Optional[Dict[str, Any]] = None,
    trace: Sequence[Dict[str, Any]] = (),
    extras: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """Self-contained result: the scenario document travels along so the
    stored genes can be re-evaluated."""
    return {
        'scenario': scenario_doc,
        'genes': [
            gene_to_dict(gene) for gene in sorted(genes, key=Gene.sort_key)
        ],
        'fitness': fitness,
        'c': metrics.c,
        'c_eff': metrics.c_eff,
        'n_sens': metrics.n_sens,
        'priority': metrics.priority,
        'priority_satisfied': metrics.priority >= 1.0,
        'seed': seed,
        'mask_count': mask_count,
        'config': dict(config or {}),
        'trace': list(trace),
        'extras': dict(extras or {}),
    }


def dump_result(document: Dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + '\n'


def write_result(document: Dict[str, Any], path: Union[str, Path, None]):
    text = dump_result(document)
    if path is None or str(path) == '-':
        print(text, end='')
        return
    Path(path).write_text(text)


@dataclass
class StoredResult:
    scenario: Scenario
    genes: List[Gene]
    seed: int
    mask_count: int
    document: Dict[str, Any] = field(repr=False)


def parse_result(text: str) -> StoredResult:
    try:
        document = json.loads(text)
    except ValueError as exc:
        raise ResultError('not JSON: {}'.format(exc))
    if not isinstance(document, dict):
        raise ResultError('top level must be an object')
    for key in ('scenario', 'genes', 'seed', 'mask_count'):
        if key not in document:
            raise ResultError('missing "{}"'.format(key))
    try:
        genes = [gene_from_dict(item) for item in document['genes']]
        seed = int(document['seed'])
        mask_count = int(document['mask_count'])
    except (KeyError, TypeError, ValueError) as exc:
        raise ResultError('malformed field: {}'.format(exc))
    try:
        scenario = parse_scenario(document['scenario'])
    except RoadcoverError as exc:
        raise ResultError('embedded scenario: {}'.format(exc))
    return StoredResult(scenario, genes, seed, mask_count, document)


def load_result(path: Union[str, Path]) -> StoredResult:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ResultError('cannot read {}: {}'.format(path, exc))
    return parse_result(text)


def evaluate_result(stored: StoredResult) -> Dict[str, Any]:
    """Recompute fitness and metrics of stored genes."""
    for gene in stored.genes:
        if not stored.scenario.is_free(gene.pos):
            raise ResultError('gene {} is not on a free cell'.format(gene.pos))
    scenario = stored.scenario
    masks = sample_occlusion_masks(scenario, stored.seed, stored.mask_count)
    evaluator = Evaluator(scenario, default_weights(scenario.n_road), masks)
    metrics = evaluator.metrics(stored.genes)
    return {
        'fitness': evaluator.fitness(stored.genes),
        'c': metrics.c,
        'c_eff': metrics.c_eff,
        'n_sens': metrics.n_sens,
        'priority': metrics.priority,
        'priority_satisfied': metrics.priority >= 1.0,
    }
