from pathlib import Path
from typing import Callable

import numpy as np
import pytest

import roadcover

from roadcover.evolve import GAConfig
from roadcover.gridworld import Scenario, load_scenario, parse_scenario


DATA_DIR = Path(roadcover.__file__).parent / 'data'


def scenario_doc(
    rows,
    *,
    grid_len=1.0,
    sensor_range=5.0,
    fov_deg=90.0,
    extra=()
) -> str:
    header = [
        f'grid_len={grid_len}',
        f'sensor_range={sensor_range}',
        f'sensor_fov_deg={fov_deg}',
    ]
    return '\n'.join(header + list(extra) + list(rows)) + '\n'


def random_scenario(
    rng: np.random.Generator,
    size: int = 20,
    *,
    fov_deg: float = 60.0,
    sensor_range: float = 8.0,
    opacity: bool = True
) -> Scenario:
    draws = rng.random((size, size))
    rows = []
    for y in range(size):
        row = ''
        for x in range(size):
            if draws[y, x] < 0.12:
                row += '#'
            elif draws[y, x] < 0.55:
                row += 'S'
            else:
                row += '.'
        rows.append(row)
    extra = []
    if opacity:
        for y in range(size):
            for x in range(size):
                if rows[y][x] == 'S' and rng.random() < 0.1:
                    extra.append(f'opacity {x} {y} {rng.random():.3f}')
    return parse_scenario(scenario_doc(
        rows,
        sensor_range=sensor_range,
        fov_deg=fov_deg,
        extra=extra
    ))


@pytest.fixture(scope='function')
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope='function')
def make_scenario() -> Callable[..., Scenario]:
    def factory(rows, **kwargs) -> Scenario:
        return parse_scenario(scenario_doc(rows, **kwargs))
    return factory


@pytest.fixture(scope='function')
def corridor() -> Scenario:
    return parse_scenario(scenario_doc([
        '..........',
        'SSSSSSSSSS',
        'SSSSSSSSSS',
        '..........',
    ], sensor_range=6.0, fov_deg=60.0))


@pytest.fixture(scope='function')
def plaza() -> Scenario:
    return parse_scenario(scenario_doc([
        '.........',
        '.SSSSSSS.',
        '.SSS#SSS.',
        '.SSSPSSS.',
        '.SSS#SSS.',
        '.SSSSSSS.',
        '.........',
    ], sensor_range=5.0, fov_deg=90.0))


@pytest.fixture(scope='function')
def intersection() -> Scenario:
    return load_scenario(DATA_DIR / 'intersection.scn')


@pytest.fixture(scope='function')
def straight_road() -> Scenario:
    return load_scenario(DATA_DIR / 'straight_road.scn')


@pytest.fixture(scope='function')
def parking() -> Scenario:
    return load_scenario(DATA_DIR / 'parking.scn')


@pytest.fixture(scope='function')
def highway() -> Scenario:
    return load_scenario(DATA_DIR / 'highway.scn')


@pytest.fixture(scope='function')
def fast_config() -> GAConfig:
    return GAConfig(
        population_size=16,
        max_generations=12,
        stall_generations=3,
        mask_count=2,
        seed=7,
    )
