"""Exhaustive parameter search for the classical baselines."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..dataio import Trace, TraceSet, standardize_array
from ..errors import ConfigurationError, DimensionError
from .kalman import KalmanConfig, kalman_filter
from .wavelet import WaveletConfig, wavelet_denoise

METHODS = {
    "kalman": (KalmanConfig, kalman_filter),
    "wavelet": (WaveletConfig, wavelet_denoise),
}


def apply_baseline(method: str, noisy: TraceSet, cfg, standardized: bool = True) -> TraceSet:
    """Run a baseline row-wise, optionally in per-trace standardized units.

    The result is always expressed in the units of ``noisy``.
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown baseline {method!r}; expected one of {sorted(METHODS)}")
    fn = METHODS[method][1]
    if not standardized:
        return TraceSet(fn(noisy.data, cfg), noisy.axis)
    z, rec = standardize_array(noisy.data)
    out = fn(z, cfg)
    return TraceSet(out * rec.sigma[:, None] + rec.mu[:, None], noisy.axis)


@dataclass
class GridSearchSpec:
    grids: dict[str, list]
    standardized: bool = True
    base: object | None = None  # config whose unlisted fields are kept

    def __post_init__(self):
        if not self.grids or any(len(v) == 0 for v in self.grids.values()):
            raise ConfigurationError("every grid must list at least one value")

    def cells(self) -> list[dict]:
        names = list(self.grids)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.grids.values())]


@dataclass
class GridSearchResult:
    method: str
    best_config: object
    best_mse: float
    table: list[dict] = field(default_factory=list)

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        names = [k for k in self.table[0] if k != "mse"] if self.table else []
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*names, "mse"])
            for row in self.table:
                w.writerow([row[k] for k in names] + [repr(row["mse"])])
        return path


def mean_mse(outputs: np.ndarray, reference: np.ndarray) -> float:
    return float(np.mean((outputs - reference[None, :]) ** 2))


def grid_search(method: str, spec: GridSearchSpec, noisy: TraceSet, reference: Trace) -> GridSearchResult:
    """Evaluate every grid cell; the first cell attaining the minimum wins."""
    if method not in METHODS:
        raise ConfigurationError(f"unknown baseline {method!r}; expected one of {sorted(METHODS)}")
    cls = METHODS[method][0]
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(spec.grids) - known)
    if unknown:
        raise ConfigurationError(f"{method} has no parameter(s) {', '.join(unknown)}")
    ref = np.asarray(getattr(reference, "values", reference), dtype=np.float64)
    if ref.shape[-1] != noisy.n_points:
        raise DimensionError(f"reference has {ref.shape[-1]} points, traces have {noisy.n_points}")
    base = spec.base if spec.base is not None else cls()

    best_cfg, best = None, np.inf
    table = []
    for cell in spec.cells():
        cfg = replace(base, **cell)
        mse = mean_mse(apply_baseline(method, noisy, cfg, spec.standardized).data, ref)
        table.append({**cell, "mse": mse})
        if not np.isfinite(mse):
            raise ConfigurationError(f"non-finite objective for {method} cell {cell}")
        if mse < best:
            best_cfg, best = cfg, mse
    return GridSearchResult(method, best_cfg, float(best), table)


DEFAULT_GRIDS = {
    "kalman": {
        "process_noise": [0.001, 0.003, 0.01, 0.0175, 0.03, 0.1, 0.3, 1.0],
        "measurement_noise": [0.01, 0.03, 0.06, 0.1, 0.3, 1.0],
    },
    "wavelet": {
        "threshold": [0.0, 0.1, 0.2, 0.3, 0.4, 0.55, 0.7, 0.85, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0],
        "threshold_mode": ["hard", "soft"],
        "levels": [2, 3, 4, 5],
    },
}
