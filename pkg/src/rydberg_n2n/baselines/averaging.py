from __future__ import annotations

import numpy as np

from ..dataio import Trace, TraceSet
from ..errors import DataError


def average(traces: TraceSet) -> Trace:
    """Pointwise mean over repeated measurements."""
    data = np.asarray(traces.data)
    if data.shape[0] < 1:
        raise DataError("cannot average an empty TraceSet")
    return Trace(data.mean(axis=0), traces.axis)
