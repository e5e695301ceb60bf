"""
Array Field Types

Annotated numpy types for pydantic models. Values are coerced to float64
and frozen so records stay immutable after construction.
"""

from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def freeze(value: Any) -> np.ndarray:
    """
    Coerce a value to a read-only float64 array.

    Arrays that are already frozen float64 are returned as-is; everything
    else is copied so callers cannot mutate the stored data afterwards.
    """
    if isinstance(value, np.ndarray) and value.dtype == np.float64:
        if not value.flags.writeable:
            return value
        arr = value.copy()
    else:
        arr = np.array(value, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _as_list(value: np.ndarray) -> list[Any]:
    return value.tolist()  # type: ignore[no-any-return]


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(freeze),
    PlainSerializer(_as_list, when_used="json"),
]
