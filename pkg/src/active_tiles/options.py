"""Global options for active tiles.

Modelled on xarray's options https://github.com/pydata/xarray/blob/main/xarray/core/options.py
"""

from collections.abc import Callable
from typing import Any, TypedDict

__all__ = ['OPTIONS', 'set_options']


class Options(TypedDict):
    tile_size: int
    preselect_fraction: float
    dropout_passes: int
    pool_grid: int
    outlier_budget: int
    positive_ratio: float
    pairwise_limit: int
    threshold_steps: int
    progress: bool
    workers: int


OPTIONS: Options = {
    'tile_size': 512,
    'preselect_fraction': 0.05,
    'dropout_passes': 10,
    'pool_grid': 8,
    'outlier_budget': 0,
    'positive_ratio': 0.9,
    'pairwise_limit': 2000,
    'threshold_steps': 99,
    'progress': False,
    'workers': 1,
}


def _positive_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value > 0


def _non_negative_int(value: Any) -> bool:
    return (
        isinstance(value, int) and not isinstance(value, bool) and value >= 0
    )


def _unit_fraction(value: Any) -> bool:
    return isinstance(value, (int, float)) and 0 < value <= 1


_VALIDATORS: dict[str, Callable[[Any], bool]] = {
    'tile_size': _positive_int,
    'preselect_fraction': _unit_fraction,
    'dropout_passes': lambda value: _positive_int(value) and value >= 2,
    'pool_grid': _positive_int,
    'outlier_budget': _non_negative_int,
    'positive_ratio': _unit_fraction,
    'pairwise_limit': _positive_int,
    'threshold_steps': _positive_int,
    'progress': lambda value: isinstance(value, bool),
    'workers': _positive_int,
}


class set_options:
    """Set options for :py:mod:`active_tiles` in a controlled context."""

    def __init__(self, **kwargs):
        self.old = {}
        for k, v in kwargs.items():
            if k not in OPTIONS:
                raise ValueError(
                    f'argument name {k!r} is not in the set of valid options {set(OPTIONS)!r}'
                )
            if not _VALIDATORS[k](v):
                raise ValueError(f'invalid value for option {k!r}: {v!r}')
            self.old[k] = OPTIONS[k]
        self._apply_update(kwargs)

    def _apply_update(self, options_dict):
        OPTIONS.update(options_dict)

    def __enter__(self):
        return

    def __exit__(self, type, value, traceback):
        self._apply_update(self.old)
