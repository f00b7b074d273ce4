"""Bit-exact array artifacts and line-oriented manifests.

Array files (``ALF1``) have a 24-byte little-endian header followed by the
values in row-major, channel-last order::

    bytes  0-3   magic  b'ALF1'
    bytes  4-7   format version, u32 = 1
    bytes  8-11  height, u32
    bytes 12-15  width, u32
    bytes 16-19  channels, u32
    bytes 20-23  dtype tag, u32 (0 = F32, 1 = U32)
    bytes 24-    height * width * channels values (binary32 or u32)

Manifests are UTF-8 JSONL files, one object per line.
"""

from __future__ import annotations

import logging
import struct
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Self

import numpy as np
import xarray as xr

from active_tiles._helpers import (
    iter_jsonl,
    require_field,
    validate_probabilities,
    write_jsonl,
)
from active_tiles.errors import (
    FormatError,
    ManifestError,
    MissingArtifactsError,
    StorageError,
    ValidationError,
)
from active_tiles.types import (
    DType,
    SelectionStrategy,
    Strategy,
    is_float_array,
    is_integer_array,
)

__all__ = [
    'ALF_MAGIC',
    'ALF_VERSION',
    'ArrayContainer',
    'PoolManifest',
    'PoolRecord',
    'SelectionEntry',
    'SelectionManifest',
    'load_array',
    'read_feature_matrix',
    'read_manifest',
    'read_selection',
    'store_array',
    'write_feature_matrix',
    'write_manifest',
    'write_selection',
]

logger = logging.getLogger(__name__)

ALF_MAGIC = b'ALF1'
ALF_VERSION = 1
_HEADER = struct.Struct('<4sIIIII')


@dataclass(frozen=True, eq=False)
class ArrayContainer:
    """A dense ``height x width x channels`` grid with a dtype tag.

    The container houses probability maps (F32, one channel), dropout stacks
    (F32, one channel per stochastic prediction), decoder feature maps (F32)
    and ground-truth instance maps (U32, 0 is background).

    This class is not normally instantiated directly. Use
    :py:meth:`ArrayContainer.from_numpy` or :py:func:`load_array`.

    Attributes
    ----------
    data : np.ndarray
        A read-only, C-contiguous array of shape ``(height, width, channels)``
        with dtype ``float32`` or ``uint32``.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        data = self.data
        if data.ndim != 3:
            raise ValidationError(
                f'data must be 3-dimensional, got {data.ndim} dimensions'
            )
        if 0 in data.shape:
            raise ValidationError(
                f'all dimensions must be positive, got shape {data.shape}'
            )
        if data.dtype not in (np.float32, np.uint32):
            raise ValidationError(
                f'data must be float32 or uint32, got {data.dtype}'
            )
        data = np.array(data, order='C', copy=True)
        data.flags.writeable = False
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_numpy(
        cls, array: np.ndarray | Sequence, dtype: DType | None = None
    ) -> Self:
        """Build a container from a 2D ``(H, W)`` or 3D ``(H, W, C)`` array.

        Parameters
        ----------
        array : array-like
            The values. A 2D array gains a single channel.
        dtype : DType, optional
            The element type. Inferred from ``array`` when omitted.

        Returns
        -------
        ArrayContainer
        """
        array = np.asarray(array)
        if array.ndim == 2:
            array = array[:, :, np.newaxis]
        tag = DType.from_numpy(array.dtype) if dtype is None else dtype
        if tag is DType.U32 and array.size:
            if is_integer_array(array) and array.min() < 0:
                raise ValidationError('U32 arrays cannot hold negative values')
            if is_float_array(array) and not (
                np.isfinite(array).all()
                and (array >= 0).all()
                and (array == np.floor(array)).all()
            ):
                raise ValidationError(
                    'U32 arrays need non-negative whole numbers'
                )
        return cls(array.astype(tag.numpy.newbyteorder('='), copy=True))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.channels)

    @property
    def dtype(self) -> DType:
        return DType.from_numpy(self.data.dtype)

    def to_numpy(self) -> np.ndarray:
        """Return a writeable copy of the values."""
        return self.data.copy()

    def to_dataarray(self, name: str | None = None) -> xr.DataArray:
        """Return the values as a ``(y, x, channel)`` :py:class:`~xarray.DataArray`."""
        return xr.DataArray(
            data=self.data,
            dims=('y', 'x', 'channel'),
            coords={'channel': np.arange(self.channels)},
            name=name,
            attrs={'dtype': self.dtype.name},
        )

    def require_probability(self, channels: int | None = None) -> Self:
        """Check the container is an F32 map with values in ``[0, 1]``."""
        if self.dtype is not DType.F32:
            raise ValidationError(
                f'expected an F32 array, got {self.dtype.name}'
            )
        if channels is not None and self.channels != channels:
            raise ValidationError(
                f'expected {channels} channel(s), got {self.channels}'
            )
        validate_probabilities(self.data)
        return self

    def require_instances(self) -> Self:
        """Check the container is a single-channel U32 instance map."""
        if self.dtype is not DType.U32 or self.channels != 1:
            raise ValidationError(
                'expected a single-channel U32 instance map, got '
                f'{self.channels} channel(s) of {self.dtype.name}'
            )
        return self

    def equals(self, other: object) -> bool:
        """Return True if ``other`` holds bit-identical values."""
        return (
            isinstance(other, ArrayContainer)
            and self.shape == other.shape
            and self.dtype is other.dtype
            and self.data.tobytes() == other.data.tobytes()
        )

    def __repr__(self) -> str:
        h, w, c = self.shape
        return f'<ArrayContainer {h}x{w}x{c} {self.dtype.name}>'


def store_array(array: ArrayContainer, path: str | Path) -> None:
    """Write a container to ``path`` in the ALF1 layout.

    Parameters
    ----------
    array : ArrayContainer
        The container to write.
    path : str or Path
        Destination file; its parent directory must exist.

    Raises
    ------
    StorageError
        If the file cannot be written.
    """
    header = _HEADER.pack(
        ALF_MAGIC,
        ALF_VERSION,
        array.height,
        array.width,
        array.channels,
        int(array.dtype),
    )
    payload = array.data.astype(array.dtype.numpy, copy=False).tobytes()
    try:
        with open(path, 'wb') as handle:
            handle.write(header)
            handle.write(payload)
    except OSError as error:
        raise StorageError(path, f'cannot write: {error.strerror}') from error


def load_array(path: str | Path) -> ArrayContainer:
    """Read an ALF1 file.

    Parameters
    ----------
    path : str or Path
        The file to read.

    Returns
    -------
    ArrayContainer

    Raises
    ------
    StorageError
        If the file cannot be read.
    FormatError
        If the magic, version, a dimension, the dtype tag or the payload
        length is invalid. The error names the offending field.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as error:
        raise StorageError(path, f'cannot read: {error.strerror}') from error

    if len(raw) < _HEADER.size:
        raise FormatError(
            path, 'header', f'expected {_HEADER.size} bytes, got {len(raw)}'
        )
    magic, version, height, width, channels, tag = _HEADER.unpack_from(raw)
    if magic != ALF_MAGIC:
        raise FormatError(path, 'magic', f'{magic!r} != {ALF_MAGIC!r}')
    if version != ALF_VERSION:
        raise FormatError(path, 'version', f'unsupported version {version}')
    for name, value in (
        ('height', height),
        ('width', width),
        ('channels', channels),
    ):
        if value == 0:
            raise FormatError(path, name, 'dimension is zero')
    try:
        dtype = DType(tag)
    except ValueError:
        raise FormatError(path, 'dtype', f'unknown tag {tag}') from None

    count = height * width * channels
    expected = count * dtype.numpy.itemsize
    found = len(raw) - _HEADER.size
    if found < expected:
        raise FormatError(
            path,
            'payload',
            f'truncated payload: expected {expected} bytes, found {found}',
        )
    if found > expected:
        raise FormatError(
            path,
            'payload',
            f'{found - expected} trailing bytes after the payload',
        )

    values = np.frombuffer(
        raw, dtype=dtype.numpy, count=count, offset=_HEADER.size
    )
    native = values.astype(dtype.numpy.newbyteorder('='))
    return ArrayContainer(native.reshape(height, width, channels))


# ------------------------------------------------------------------ manifests
@dataclass(frozen=True)
class PoolRecord:
    """One candidate tile of a pool.

    Attributes
    ----------
    tile_id : str
        Unique tile identifier.
    source_image_id : str
        Identifier of the raster the tile was cut from.
    artifact_paths : Mapping[str, str]
        Mapping of artifact role (``probmap``, ``dropout_stack``,
        ``features``, ``gt``) to a file path, absolute or relative to an
        artifact root.
    positive : bool, optional
        Whether the tile is known to contain objects. Only the ``unlimited``
        baseline reads it.
    """

    tile_id: str
    source_image_id: str
    artifact_paths: Mapping[str, str] = field(default_factory=dict)
    positive: bool | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, 'artifact_paths', MappingProxyType(dict(self.artifact_paths))
        )

    def artifact_path(
        self, role: str, root: str | Path | None = None
    ) -> Path | None:
        """Return the resolved path of an artifact, or None if undeclared."""
        value = self.artifact_paths.get(str(role))
        if value is None:
            return None
        path = Path(value)
        if root is not None and not path.is_absolute():
            path = Path(root) / path
        return path

    def to_dict(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            'tile_id': self.tile_id,
            'source_image_id': self.source_image_id,
            'artifact_paths': dict(self.artifact_paths),
        }
        if self.positive is not None:
            record['positive'] = self.positive
        return record


@dataclass(frozen=True)
class PoolManifest:
    """The pool of unlabelled candidate tiles.

    Records are kept in the canonical lexicographic order of ``tile_id``
    whatever order they are given in; duplicate identifiers are rejected.
    """

    records: tuple[PoolRecord, ...] = ()

    def __post_init__(self) -> None:
        records = tuple(sorted(self.records, key=lambda r: r.tile_id))
        for previous, current in zip(records, records[1:]):
            if previous.tile_id == current.tile_id:
                raise ValidationError(
                    f'duplicate tile_id {current.tile_id!r} in pool'
                )
        object.__setattr__(self, 'records', records)
        object.__setattr__(
            self, '_index', {r.tile_id: r for r in records}
        )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PoolRecord]:
        return iter(self.records)

    def __contains__(self, tile_id: object) -> bool:
        return tile_id in self._index  # type: ignore[attr-defined]

    def __getitem__(self, tile_id: str) -> PoolRecord:
        try:
            return self._index[tile_id]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f'No tile found for tile_id {tile_id!r}.')

    @property
    def tile_ids(self) -> list[str]:
        """Tile identifiers in canonical order."""
        return [record.tile_id for record in self.records]

    def subset(self, tile_ids: Iterable[str]) -> PoolManifest:
        """Return a manifest holding only ``tile_ids``."""
        return PoolManifest(tuple(self[tile_id] for tile_id in set(tile_ids)))

    def exclude(self, tile_ids: Iterable[str]) -> PoolManifest:
        """Return a manifest without ``tile_ids``."""
        dropped = set(tile_ids)
        return PoolManifest(
            tuple(r for r in self.records if r.tile_id not in dropped)
        )

    def require_artifacts(
        self, roles: Iterable[str], root: str | Path | None = None
    ) -> dict[str, dict[str, Path]]:
        """Resolve the ``roles`` artifacts of every tile.

        Returns
        -------
        dict
            ``{tile_id: {role: path}}`` in canonical tile order.

        Raises
        ------
        MissingArtifactsError
            Listing every tile and role whose artifact is undeclared or
            absent, not only the first.
        """
        roles = [str(role) for role in roles]
        resolved: dict[str, dict[str, Path]] = {}
        missing: list[tuple[str, str]] = []
        for record in self.records:
            paths = {}
            for role in roles:
                path = record.artifact_path(role, root)
                if path is None or not path.is_file():
                    missing.append((record.tile_id, role))
                else:
                    paths[role] = path
            resolved[record.tile_id] = paths
        if missing:
            raise MissingArtifactsError(missing)
        return resolved


def read_manifest(path: str | Path) -> PoolManifest:
    """Read a pool manifest and return it in canonical order.

    Each line holds ``{"tile_id", "source_image_id", "artifact_paths",
    "positive"}``; the last two are optional.

    Raises
    ------
    ManifestError
        On a duplicate ``tile_id`` (reported at its second occurrence) or a
        missing or malformed field, with the line number.
    """
    records: list[PoolRecord] = []
    seen: dict[str, int] = {}
    for line, raw in iter_jsonl(path):
        tile_id = require_field(raw, 'tile_id', str, path=path, line=line)
        source = require_field(
            raw, 'source_image_id', str, path=path, line=line
        )
        paths = raw.get('artifact_paths', {})
        if not isinstance(paths, dict) or not all(
            isinstance(v, str) for v in paths.values()
        ):
            raise ManifestError(
                path, line, "field 'artifact_paths' must map roles to paths"
            )
        positive = raw.get('positive')
        if positive is not None and not isinstance(positive, bool):
            raise ManifestError(
                path, line, f"field 'positive' must be boolean: {positive!r}"
            )
        if tile_id in seen:
            raise ManifestError(
                path,
                line,
                f'duplicate tile_id {tile_id!r} (first seen on line '
                f'{seen[tile_id]})',
            )
        seen[tile_id] = line
        records.append(PoolRecord(tile_id, source, paths, positive))
    logger.debug('read %d pool records from %s', len(records), path)
    return PoolManifest(tuple(records))


def write_manifest(pool: PoolManifest, path: str | Path) -> None:
    """Write a pool manifest in canonical order."""
    write_jsonl(path, (record.to_dict() for record in pool))


@dataclass(frozen=True)
class SelectionEntry:
    """A ranked member of a selection."""

    rank: int
    tile_id: str
    score: float | None = None


@dataclass(frozen=True)
class SelectionManifest:
    """The budgeted selection ``B*`` produced by a strategy.

    Attributes
    ----------
    strategy : Strategy
        The strategy that produced the selection.
    budget : int
        The labelling budget.
    entries : tuple of SelectionEntry
        Entries sorted by rank; ranks run ``1..len(entries)``.
    """

    strategy: Strategy
    budget: int
    entries: tuple[SelectionEntry, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, 'strategy', Strategy(self.strategy))
        object.__setattr__(self, 'entries', tuple(self.entries))
        if self.budget < 0:
            raise ValidationError(
                f'budget must be non-negative, got {self.budget}'
            )
        ranks = [entry.rank for entry in self.entries]
        if ranks != list(range(1, len(ranks) + 1)):
            raise ValidationError('ranks must run 1..n in order')
        if (
            self.strategy is not Strategy.UNLIMITED
            and len(self.entries) > self.budget
        ):
            raise ValidationError(
                f'{len(self.entries)} entries exceed the budget '
                f'{self.budget}'
            )
        ids = self.tile_ids
        if len(set(ids)) != len(ids):
            raise ValidationError('a tile_id appears twice in the selection')

    @classmethod
    def from_ranked(
        cls,
        strategy: Strategy | SelectionStrategy,
        budget: int,
        ranked: Iterable[tuple[str, float | None]],
    ) -> SelectionManifest:
        """Build a manifest from ``(tile_id, score)`` pairs in rank order."""
        entries = tuple(
            SelectionEntry(
                rank, tile_id, None if score is None else float(score)
            )
            for rank, (tile_id, score) in enumerate(ranked, start=1)
        )
        return cls(Strategy(strategy), budget, entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def tile_ids(self) -> list[str]:
        """Selected tile identifiers in rank order."""
        return [entry.tile_id for entry in self.entries]

    def validate_against(self, pool: PoolManifest) -> None:
        """Raise if a selected tile is not in ``pool``."""
        unknown = [t for t in self.tile_ids if t not in pool]
        if unknown:
            raise ValidationError(
                f'selected tiles not in the pool: {sorted(unknown)!r}'
            )


def write_selection(manifest: SelectionManifest, path: str | Path) -> None:
    """Write a selection: a header line, then one line per entry."""
    header = {
        'kind': 'selection',
        'strategy': manifest.strategy.value,
        'budget': manifest.budget,
        'count': len(manifest),
    }
    entries = (
        {'rank': e.rank, 'tile_id': e.tile_id, 'score': e.score}
        for e in manifest.entries
    )
    write_jsonl(path, [header, *entries])


def read_selection(path: str | Path) -> SelectionManifest:
    """Read a selection written by :py:func:`write_selection`."""
    lines = iter_jsonl(path)
    try:
        line, header = next(lines)
    except StopIteration:
        raise ManifestError(path, 1, 'empty selection file') from None
    if header.get('kind') != 'selection':
        raise ManifestError(path, line, 'missing selection header')
    strategy = require_field(header, 'strategy', str, path=path, line=line)
    budget = require_field(header, 'budget', int, path=path, line=line)
    entries = []
    for line, raw in lines:
        rank = require_field(raw, 'rank', int, path=path, line=line)
        tile_id = require_field(raw, 'tile_id', str, path=path, line=line)
        score = raw.get('score')
        if score is not None and (
            isinstance(score, bool) or not isinstance(score, (int, float))
        ):
            raise ManifestError(path, line, f'invalid score {score!r}')
        entries.append(
            SelectionEntry(
                rank, tile_id, None if score is None else float(score)
            )
        )
    entries.sort(key=lambda entry: entry.rank)
    try:
        return SelectionManifest(Strategy(strategy), budget, tuple(entries))
    except ValueError as error:
        raise ManifestError(path, 1, str(error)) from error


def _rows_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(f'{path.stem}.rows.jsonl')


def write_feature_matrix(
    matrix: np.ndarray, tile_ids: Sequence[str], path: str | Path
) -> Path:
    """Write an ``N x C`` feature matrix as an ALF1 ``N x C x 1`` array.

    A sidecar ``<stem>.rows.jsonl`` maps each row to its tile.

    Returns
    -------
    Path
        The sidecar path.
    """
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(tile_ids):
        raise ValidationError(
            f'matrix of shape {matrix.shape} does not match '
            f'{len(tile_ids)} tile(s)'
        )
    store_array(ArrayContainer(matrix[:, :, np.newaxis]), path)
    rows = _rows_path(path)
    write_jsonl(
        rows,
        (
            {'row': row, 'tile_id': tile_id}
            for row, tile_id in enumerate(tile_ids)
        ),
    )
    return rows


def read_feature_matrix(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a feature matrix and its row map.

    Returns
    -------
    tuple[list[str], np.ndarray]
        Tile identifiers by row and the ``N x C`` float64 matrix.
    """
    array = load_array(path)
    rows = _rows_path(path)
    tile_ids: list[str] = []
    for line, raw in iter_jsonl(rows):
        row = require_field(raw, 'row', int, path=rows, line=line)
        if row != len(tile_ids):
            raise ManifestError(rows, line, f'unexpected row {row}')
        tile_ids.append(
            require_field(raw, 'tile_id', str, path=rows, line=line)
        )
    if len(tile_ids) != array.height or array.channels != 1:
        raise FormatError(
            path,
            'height',
            f'{array.height} rows for {len(tile_ids)} row records',
        )
    return tile_ids, array.data[:, :, 0].astype(np.float64)
