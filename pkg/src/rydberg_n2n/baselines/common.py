from __future__ import annotations

import numpy as np

from ..dataio import Trace, TraceSet


def values_of(obj) -> np.ndarray:
    if isinstance(obj, Trace):
        return obj.values
    if isinstance(obj, TraceSet):
        return obj.data
    return np.asarray(obj, dtype=np.float64)


def like(original, values: np.ndarray):
    """Wrap ``values`` in the container type of ``original``."""
    if isinstance(original, Trace):
        return Trace(values, original.axis)
    if isinstance(original, TraceSet):
        return TraceSet(values, original.axis)
    return values
