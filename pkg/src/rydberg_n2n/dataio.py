"""Trace containers, persistence, the 4:4:2 split, standardization and batching.

Native trace file (extension ``.rdt``) is a :mod:`rydberg_n2n.container`
with magic ``RDTRACE`` version 1.  Its JSON header holds ``n_sets``,
``n_points``, ``dtype`` and an ``axis`` record (``kind``, ``start``,
``step``, ``unit``); the single array ``data`` has shape
``(n_sets, n_points)``.
"""

from __future__ import annotations

import csv
from collections.abc import Iterator
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import container
from .errors import (
    ConfigurationError,
    DataError,
    DegenerateTraceError,
    DimensionError,
    MalformedHeaderError,
)

TRACE_MAGIC = "RDTRACE"
TRACE_VERSION = 1


@dataclass(frozen=True)
class Axis:
    kind: str = "time"  # "time" or "frequency"
    start: float = 0.0
    step: float = 1.0
    unit: str = "s"

    def __post_init__(self):
        if self.kind not in ("time", "frequency"):
            raise ConfigurationError(f"axis kind must be 'time' or 'frequency', got {self.kind!r}")
        if not self.step > 0:
            raise ConfigurationError(f"axis step must be positive, got {self.step}")

    def values(self, n: int) -> np.ndarray:
        return self.start + self.step * np.arange(n)


@dataclass
class Trace:
    values: np.ndarray
    axis: Axis = field(default_factory=Axis)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.result_type(self.values, np.float32))
        if self.values.ndim != 1:
            raise DimensionError(f"a Trace is 1-D, got shape {self.values.shape}")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class TraceSet:
    data: np.ndarray
    axis: Axis = field(default_factory=Axis)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype.kind != "f":
            data = data.astype(np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise DimensionError(f"TraceSet data must be (n_sets, n_points), got {data.shape}")
        self.data = data

    @property
    def n_sets(self) -> int:
        return self.data.shape[0]

    @property
    def n_points(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.n_sets

    def __getitem__(self, i: int) -> Trace:
        return Trace(self.data[i], self.axis)

    def subset(self, index) -> TraceSet:
        return TraceSet(self.data[index], self.axis)

    @classmethod
    def from_traces(cls, traces: list[Trace]) -> TraceSet:
        if not traces:
            raise DataError("cannot build a TraceSet from zero traces")
        lengths = {len(t) for t in traces}
        if len(lengths) != 1:
            raise DimensionError(f"traces have differing lengths {sorted(lengths)}")
        return cls(np.stack([t.values for t in traces]), traces[0].axis)


@dataclass
class DatasetSplit:
    train_x: TraceSet
    train_y: TraceSet
    test_x: TraceSet
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.train_x.n_sets != self.train_y.n_sets:
            raise DimensionError(
                f"train_x has {self.train_x.n_sets} traces, train_y has {self.train_y.n_sets}"
            )

    def head(self, n_train: int) -> DatasetSplit:
        """First ``n_train`` training pairs; the test partition is shared."""
        prov = dict(self.provenance, n_train=n_train)
        return DatasetSplit(
            self.train_x.subset(slice(0, n_train)),
            self.train_y.subset(slice(0, n_train)),
            self.test_x,
            prov,
        )


@dataclass
class StandardizationRecord:
    mu: np.ndarray | float
    sigma: np.ndarray | float


# -- partitioning ---------------------------------------------------------------

def split_442(source: TraceSet, seed: int = 0) -> DatasetSplit:
    """Shuffle, then cut 40 % inputs / 40 % labels / 20 % test."""
    n = source.n_sets
    if n % 10:
        short = 10 - n % 10
        raise DimensionError(
            f"split_442 needs n_sets divisible by 10; got {n} (add {short} or drop {n % 10})"
        )
    order = np.random.default_rng(seed).permutation(n)
    a, b = 4 * n // 10, 8 * n // 10
    return DatasetSplit(
        source.subset(order[:a]),
        source.subset(order[a:b]),
        source.subset(order[b:]),
        {"source": "split_442", "seed": seed, "n_sets": n, "order": order.tolist()},
    )


# -- standardization ----------------------------------------------------------

def standardize_array(data: np.ndarray) -> tuple[np.ndarray, StandardizationRecord]:
    """Per-row (x - mu) / sigma with the population standard deviation."""
    data = np.asarray(data)
    if data.shape[-1] < 2:
        raise DegenerateTraceError("standardization needs at least 2 points per trace")
    mu = data.mean(axis=-1, keepdims=True)
    sigma = data.std(axis=-1, keepdims=True)
    if np.any(sigma == 0):
        bad = np.flatnonzero(sigma.reshape(-1) == 0)
        raise DegenerateTraceError(f"zero-variance trace(s) at index {bad[:10].tolist()}")
    out = (data - mu) / sigma
    return out, StandardizationRecord(mu[..., 0], sigma[..., 0])


def standardize(trace: Trace | TraceSet):
    if isinstance(trace, TraceSet):
        out, rec = standardize_array(trace.data)
        return TraceSet(out, trace.axis), rec
    out, rec = standardize_array(trace.values)
    return Trace(out, trace.axis), StandardizationRecord(float(rec.mu), float(rec.sigma))


def destandardize(trace: Trace | TraceSet, record: StandardizationRecord):
    sigma = np.asarray(record.sigma)
    if np.any(sigma <= 0):
        raise DegenerateTraceError("standardization record has non-positive sigma")
    mu = np.asarray(record.mu)
    if isinstance(trace, TraceSet):
        return TraceSet(trace.data * sigma[..., None] + mu[..., None], trace.axis)
    return Trace(trace.values * sigma + mu, trace.axis)


# -- batching -------------------------------------------------------------------

def batch_indices(n: int, batch_size: int, seed) -> list[np.ndarray]:
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be at least 1, got {batch_size}")
    order = np.random.default_rng(seed).permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def batch_iter(traces: TraceSet, batch_size: int = 32, seed=0) -> Iterator[np.ndarray]:
    """One epoch of (b, n_points) batches in seed-shuffled order, last batch partial."""
    for idx in batch_indices(traces.n_sets, batch_size, seed):
        yield traces.data[idx]


# -- persistence --------------------------------------------------------------

def _axis_meta(axis: Axis) -> dict:
    return {"kind": axis.kind, "start": axis.start, "step": axis.step, "unit": axis.unit}


def save_traceset(traces: TraceSet, path) -> Path:
    data = traces.data
    if data.dtype not in (np.float32, np.float64):
        data = data.astype(np.float64)
    meta = {
        "n_sets": traces.n_sets,
        "n_points": traces.n_points,
        "dtype": "<f4" if data.dtype == np.float32 else "<f8",
        "axis": _axis_meta(traces.axis),
    }
    return container.write(path, TRACE_MAGIC, TRACE_VERSION, meta, {"data": data})


def load_traceset(path) -> TraceSet:
    header, arrays = container.read(path, TRACE_MAGIC, TRACE_VERSION)
    try:
        axis = Axis(**header["axis"])
        data = arrays["data"]
        shape = (header["n_sets"], header["n_points"])
    except (KeyError, TypeError, ConfigurationError) as exc:
        raise MalformedHeaderError(f"bad trace header: {exc}") from None
    if data.shape != shape:
        raise MalformedHeaderError(f"payload shape {data.shape} disagrees with header {shape}")
    return TraceSet(data, axis)


def import_csv(path, axis: Axis | None = None, delimiter: str = ",") -> TraceSet:
    """Read one trace per row.  A non-numeric first row is skipped as a header."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        for i, row in enumerate(csv.reader(fh, delimiter=delimiter)):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if i == 0:
                    continue
                raise DataError(f"{path}: non-numeric value on line {i + 1}") from None
    if not rows:
        raise DataError(f"{path}: no numeric rows")
    if len({len(r) for r in rows}) != 1:
        raise DimensionError(f"{path}: rows have differing lengths")
    return TraceSet(np.array(rows, dtype=np.float64), axis or Axis())


def export_csv(traces: TraceSet, path, delimiter: str = ",") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        for row in traces.data:
            writer.writerow([repr(float(v)) for v in row])
    return path


def with_axis(traces: TraceSet, axis: Axis) -> TraceSet:
    return replace(traces, axis=axis)
