import math

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

from .evolve import GAConfig
from .exceptions import ConfigError, SymmetryError
from .symmetry import SymmetryGroup, parse_symmetry


def _optional_int(value: str) -> Optional[int]:
    if value.lower() in ('', 'none'):
        return None
    return int(value)


def _boolean(value: str) -> bool:
    lowered = value.lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(value)


def _symmetry(value: str) -> Optional[str]:
    group = parse_symmetry(value)
    return group.to_text() if group else 'none'


GA_KEYS: Dict[str, Callable[[str], Any]] = {
    'population_size': int,
    'p_mut': float,
    'p_cross': float,
    'p_div': float,
    'stall_generations': int,
    'max_generations': int,
    'max_sensors': _optional_int,
    'seed': int,
    'mask_count': int,
    'sigma_pos_cells': float,
    'sigma_ang_deg': float,
    'p_add_gene': float,
    'workers': int,
}

PIPELINE_KEYS: Dict[str, Callable[[str], Any]] = {
    'symmetry': _symmetry,
    'trials': int,
    'max_pattern_breaks': _optional_int,
    'refine_max_iterations': _optional_int,
    'translation_refine': _boolean,
    'stitch_full_search': _boolean,
    'greedy_guard': _boolean,
}


@dataclass(frozen=True)
class Settings:
    """GA parameters and pipeline options of one run.

    `symmetry` is None when the scenario's declaration applies, 'none' to
    switch symmetrization off.
    """
    ga: GAConfig = field(default_factory=GAConfig)
    symmetry: Optional[str] = None
    trials: int = 10
    max_pattern_breaks: Optional[int] = None
    refine_max_iterations: Optional[int] = None
    translation_refine: bool = True
    stitch_full_search: bool = False
    greedy_guard: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError('trials', 'must be at least 1')
        if self.max_pattern_breaks is not None and self.max_pattern_breaks < 0:
            raise ConfigError('max_pattern_breaks', 'must not be negative')

    def group(self, declared: Optional[str] = None) -> Optional[SymmetryGroup]:
        """Symmetry group of a run; the settings win over `declared`."""
        text = self.symmetry if self.symmetry is not None else declared
        try:
            return parse_symmetry(text)
        except SymmetryError as exc:
            raise ConfigError('symmetry', exc.reason)

    def override(self, **values: Any) -> 'Settings':
        """Copy with the given non-None GA or pipeline values replaced."""
        ga_values = {}
        own_values = {}
        for key, value in values.items():
            if value is None:
                continue
            if key in GA_KEYS or key == 'sigma_ang_rad':
                ga_values[key] = value
            elif key in PIPELINE_KEYS:
                own_values[key] = value
            else:
                raise ConfigError(key, 'unknown key')
        if 'sigma_ang_deg' in ga_values:
            ga_values['sigma_ang_rad'] = math.radians(
                ga_values.pop('sigma_ang_deg')
            )
        return replace(self, ga=replace(self.ga, **ga_values), **own_values)

    def echo(self) -> Dict[str, Any]:
        echo = asdict(self.ga)
        echo['sigma_ang_deg'] = math.degrees(echo.pop('sigma_ang_rad'))
        for key in PIPELINE_KEYS:
            echo[key] = getattr(self, key)
        return dict(sorted(echo.items()))


def parse_config(doc: str) -> Settings:
    """Parse a flat `key=value` config document. `#` starts a comment.

    Raises:
        ConfigError: On unknown keys or malformed values.
    """
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(doc.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        value = value.strip()
        if not sep:
            raise ConfigError(key, f'expected key=value on line {lineno}')
        convert = GA_KEYS.get(key) or PIPELINE_KEYS.get(key)
        if convert is None:
            raise ConfigError(key, 'unknown key')
        try:
            values[key] = convert(value)
        except (ValueError, SymmetryError):
            raise ConfigError(key, 'malformed value "{}"'.format(value))
    return Settings().override(**values)


def load_config(path: Union[str, Path, None]) -> Settings:
    if path is None:
        return Settings()
    try:
        doc = Path(path).read_text()
    except OSError as exc:
        raise ConfigError('config', 'cannot read {}: {}'.format(path, exc))
    return parse_config(doc)
