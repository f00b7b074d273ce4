"""Exceptions raised by :py:mod:`active_tiles`.

Value-like failures also subclass :py:class:`ValueError` so that callers
can catch either the builtin or the package-specific class.
"""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path

__all__ = [
    'ActiveTilesError',
    'BudgetError',
    'DimensionError',
    'FormatError',
    'GeometryError',
    'ManifestError',
    'MissingArtifactsError',
    'PoolExhaustedError',
    'RunLockedError',
    'StorageError',
    'ValidationError',
]


class ActiveTilesError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ActiveTilesError, ValueError):
    """An input violates a documented precondition."""


class FormatError(ValidationError):
    """An array file does not follow the ALF1 layout."""

    def __init__(self, path: str | Path, field: str, message: str) -> None:
        self.path = Path(path)
        self.field = field
        super().__init__(f'{self.path}: invalid {field}: {message}')


class ManifestError(ValidationError):
    """A JSONL manifest record is malformed."""

    def __init__(
        self, path: str | Path | None, line: int, message: str
    ) -> None:
        self.path = None if path is None else Path(path)
        self.line = line
        where = '<memory>' if path is None else str(path)
        super().__init__(f'{where}:{line}: {message}')


class GeometryError(ValidationError):
    """Spatial sizes are incompatible with the requested operation."""


class DimensionError(ValidationError):
    """Vectors or arrays have mismatched dimensions."""


class BudgetError(ActiveTilesError, ValueError):
    """A labelling budget cannot be satisfied by the candidates."""


class PoolExhaustedError(BudgetError):
    """Fewer unselected tiles remain in the pool than the budget."""


class MissingArtifactsError(ActiveTilesError, FileNotFoundError):
    """Per-tile artifacts required by a run are absent.

    Attributes
    ----------
    missing : list of tuple[str, str]
        Sorted ``(tile_id, role)`` pairs for every missing artifact.
    """

    def __init__(self, missing: Iterable[tuple[str, str]]) -> None:
        self.missing = sorted(set(missing))
        self.tile_ids = sorted({tile_id for tile_id, _ in self.missing})
        listing = ', '.join(f'{t} ({r})' for t, r in self.missing)
        super().__init__(
            f'{len(self.missing)} missing artifact(s) for '
            f'{len(self.tile_ids)} tile(s): {listing}'
        )


class StorageError(ActiveTilesError, OSError):
    """Reading or writing a file failed."""

    def __init__(self, path: str | Path, message: str) -> None:
        self.path = Path(path)
        super().__init__(f'{self.path}: {message}')


class RunLockedError(ActiveTilesError):
    """Another process holds the run directory."""
