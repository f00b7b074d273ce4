"""Helper functions for active-tiles.

These functions are used internally by the package and are generally not intended
for public use.
"""

from __future__ import annotations

import json
import math
import sys
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
from tqdm import tqdm

from active_tiles.errors import ManifestError, StorageError, ValidationError
from active_tiles.options import OPTIONS

__all__ = [
    'iter_jsonl',
    'map_ordered',
    'progress_bar',
    'require_field',
    'validate_fraction',
    'validate_probabilities',
    'validate_threshold',
    'write_jsonl',
]

T = TypeVar('T')
R = TypeVar('R')


def validate_fraction(fraction: float, name: str = 'fraction') -> float:
    """Return ``fraction`` if it lies in ``(0, 1]``."""
    if not (
        isinstance(fraction, (int, float))
        and math.isfinite(fraction)
        and 0 < fraction <= 1
    ):
        raise ValidationError(f'{name} must lie in (0, 1], got {fraction!r}')
    return float(fraction)


def validate_threshold(threshold: float) -> float:
    """Return ``threshold`` if it lies in the open interval ``(0, 1)``."""
    if not (
        isinstance(threshold, (int, float, np.floating))
        and 0 < threshold < 1
    ):
        raise ValidationError(
            f'threshold must lie in (0, 1), got {threshold!r}'
        )
    return float(threshold)


def validate_probabilities(values: np.ndarray, name: str = 'map') -> None:
    """Raise if any value of ``values`` is outside ``[0, 1]`` or not finite."""
    if values.size and not (
        np.isfinite(values).all() and values.min() >= 0 and values.max() <= 1
    ):
        raise ValidationError(
            f'{name} values must lie in [0, 1], got range '
            f'[{np.nanmin(values)!r}, {np.nanmax(values)!r}]'
        )


def progress_bar(iterable: Iterable[T], **tqdm_kwargs) -> Iterable[T]:
    """Wrap ``iterable`` in a tqdm bar when the ``progress`` option is on."""
    tqdm_kwargs.setdefault('disable', not OPTIONS['progress'])
    tqdm_kwargs.setdefault('file', sys.stderr)
    tqdm_kwargs.setdefault('dynamic_ncols', True)
    tqdm_kwargs.setdefault('leave', False)
    return tqdm(iterable, **tqdm_kwargs)


def map_ordered(
    func: Callable[[T], R],
    items: Sequence[T],
    *,
    workers: int | None = None,
    desc: str | None = None,
) -> list[R]:
    """Apply ``func`` to ``items`` and return the results in input order.

    Parameters
    ----------
    func : callable
        A pure per-item function.
    items : sequence
        The items to map over.
    workers : int, optional
        Number of worker threads. Defaults to the ``workers`` option.
    desc : str, optional
        Label of the progress bar.

    Returns
    -------
    list
        ``[func(item) for item in items]``, whatever the schedule.
    """
    workers = OPTIONS['workers'] if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in progress_bar(items, desc=desc)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(
            progress_bar(
                executor.map(func, items), total=len(items), desc=desc
            )
        )


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield ``(line_number, record)`` for each non-blank line of a JSONL file.

    Raises
    ------
    StorageError
        If the file cannot be read.
    ManifestError
        If a line is not UTF-8 or not a JSON object.
    """
    try:
        handle = open(path, 'rb')
    except OSError as error:
        raise StorageError(path, f'cannot open: {error.strerror}') from error
    with handle:
        for number, raw in enumerate(handle, start=1):
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as error:
                raise ManifestError(
                    path, number, f'invalid UTF-8 at byte {error.start}'
                ) from error
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as error:
                raise ManifestError(
                    path, number, f'invalid JSON: {error.msg}'
                ) from error
            if not isinstance(record, dict):
                raise ManifestError(path, number, 'record is not an object')
            yield number, record


def write_jsonl(
    path: str | Path, records: Iterable[Mapping[str, Any]]
) -> None:
    """Write one compact, key-sorted JSON object per line."""
    try:
        with open(path, 'w', encoding='utf-8', newline='\n') as handle:
            for record in records:
                handle.write(
                    json.dumps(
                        record,
                        sort_keys=True,
                        ensure_ascii=False,
                        separators=(',', ':'),
                    )
                )
                handle.write('\n')
    except OSError as error:
        raise StorageError(path, f'cannot write: {error.strerror}') from error


def require_field(
    record: Mapping[str, Any],
    key: str,
    kind: type | tuple[type, ...],
    *,
    path: str | Path | None,
    line: int,
) -> Any:
    """Return ``record[key]`` if present and of type ``kind``."""
    if key not in record:
        raise ManifestError(path, line, f'missing required field {key!r}')
    value = record[key]
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if not isinstance(value, kinds) or (
        isinstance(value, bool) and bool not in kinds
    ):
        raise ManifestError(
            path, line, f'field {key!r} has unexpected value {value!r}'
        )
    return value
