from typing import Any, Optional, Tuple


class RoadcoverError(Exception):
    exit_code = 1


class ScenarioError(RoadcoverError):
    exit_code = 2

    def __init__(self, reason: str, *, line: Optional[int] = None):
        msg = reason
        if line is not None:
            msg = f'{msg} (line {line})'
        super().__init__(msg)
        self.reason = reason
        self.line = line


class ConfigError(RoadcoverError):
    exit_code = 2

    def __init__(self, key: str, reason: str):
        super().__init__(
            'Invalid configuration for "{}": {}'.format(key, reason)
        )
        self.key = key
        self.reason = reason


class ResultError(RoadcoverError):
    exit_code = 2

    def __init__(self, reason: str):
        super().__init__('Malformed result document: {}'.format(reason))
        self.reason = reason


class InvalidWeights(RoadcoverError):

    def __init__(self, weights: Any, reason: str):
        super().__init__(
            'Fitness weights {} violate {}.'.format(weights, reason)
        )
        self.weights = weights
        self.reason = reason


class EmptyStreetSet(RoadcoverError):
    exit_code = 3

    def __init__(self):
        super().__init__('empty street set')


class NoOcclusionMasks(RoadcoverError):
    exit_code = 2

    def __init__(self):
        super().__init__('At least one occlusion mask is required.')


class InfeasibleScenario(RoadcoverError):
    exit_code = 3

    def __init__(self, reason: str):
        super().__init__('Infeasible scenario: {}'.format(reason))
        self.reason = reason


class PopulationError(RoadcoverError):

    def __init__(self, size: int, expected: int):
        super().__init__(
            'Selection pool holds {} chromosomes, '
            'at least {} are required.'.format(size, expected)
        )
        self.size = size
        self.expected = expected


class SymmetryError(RoadcoverError):
    exit_code = 2

    def __init__(self, reason: str):
        super().__init__('Invalid symmetry: {}'.format(reason))
        self.reason = reason


class LayoutError(RoadcoverError):
    exit_code = 2

    def __init__(self, reason: str, *, cell: Optional[Tuple[int, int]] = None):
        msg = reason
        if cell is not None:
            msg = f'{msg} at cell {cell}'
        super().__init__(msg)
        self.reason = reason
        self.cell = cell


class SensorSpecMismatch(RoadcoverError):
    exit_code = 4

    def __init__(self, expected: Any, found: Any, *, fragment: str):
        super().__init__(
            'Fragment "{}" uses sensor spec {} but {} was expected. '
            'Stitched fragments must be homogeneous.'.format(
                fragment,
                found,
                expected
            )
        )
        self.expected = expected
        self.found = found
        self.fragment = fragment


class ItemExists(RoadcoverError):

    def __init__(self, key: str):
        super().__init__(
            'An item is already registered under that key: {}. '
            'Use force=True to override'.format(key)
        )
        self.key = key


class ItemNotFound(RoadcoverError):

    def __init__(self, key: str):
        super().__init__('No item found at key: {}'.format(key))
        self.key = key
