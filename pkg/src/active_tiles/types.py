from enum import IntEnum, StrEnum
from typing import Literal, TypeAlias, TypeIs

import numpy as np

__all__ = [
    'ArtifactRole',
    'DType',
    'SelectionStrategy',
    'Strategy',
    'is_float_array',
    'is_integer_array',
]

SelectionStrategy: TypeAlias = Literal[
    'random', 'uncertainty', 'coreset', 'unlimited'
]
"""Options for the selection strategy. Values are members of the Strategy enum."""


class Strategy(StrEnum):
    """Options for the selection strategy"""

    RANDOM = 'random'
    UNCERTAINTY = 'uncertainty'
    CORESET = 'coreset'
    UNLIMITED = 'unlimited'


class ArtifactRole(StrEnum):
    """Roles of the per-tile artifacts produced by the external model"""

    PROBMAP = 'probmap'
    DROPOUT_STACK = 'dropout_stack'
    FEATURES = 'features'
    GT = 'gt'


class DType(IntEnum):
    """Element types of an ALF1 array, valued by their on-disk tag"""

    F32 = 0
    U32 = 1

    @property
    def numpy(self) -> np.dtype:
        """Little-endian numpy dtype used on disk."""
        return np.dtype('<f4') if self is DType.F32 else np.dtype('<u4')

    @classmethod
    def from_numpy(cls, dtype: np.dtype) -> 'DType':
        """Return the tag matching a numpy dtype."""
        if np.issubdtype(dtype, np.floating):
            return cls.F32
        if np.issubdtype(dtype, np.integer) or np.issubdtype(dtype, np.bool_):
            return cls.U32
        raise TypeError(f'unsupported array dtype {dtype!r}')


def is_float_array(obj: object) -> TypeIs[np.ndarray]:
    """Check if the object is a floating point numpy array."""
    return isinstance(obj, np.ndarray) and np.issubdtype(
        obj.dtype, np.floating
    )


def is_integer_array(obj: object) -> TypeIs[np.ndarray]:
    """Check if the object is an integer numpy array."""
    return isinstance(obj, np.ndarray) and np.issubdtype(
        obj.dtype, np.integer
    )
