"""MSE against a reference, size sweeps, method comparison, latency, CSV export.

CSV schemas (all comma-separated, header row first, ``\\n`` line ends):

``report``     method, mse_mean, mse_std, mse_mean_standardized, mse_std_standardized, n_test, config
``timing``     method, seconds_total, seconds_per_trace
``sweep``      n_train, mse_mean, mse_std, epochs
``traces``     index, axis_value, then one column per named series
"""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
import time
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path

import numpy as np

from .baselines import KalmanConfig, WaveletConfig, apply_baseline, average
from .dataio import DatasetSplit, TraceSet, standardize_array
from .errors import DimensionError
from .models import ModelParams, config_to_dict, forward
from .training import TrainConfig, predict, train


def _ref_values(reference) -> np.ndarray:
    return np.asarray(getattr(reference, "values", reference), dtype=np.float64)


def mse_against_reference(outputs, reference) -> tuple[float, float, np.ndarray]:
    """Per-trace mean squared error, then mean and population std over traces."""
    data = np.asarray(getattr(outputs, "data", outputs), dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :]
    ref = _ref_values(reference)
    if data.shape[-1] != ref.shape[-1]:
        raise DimensionError(f"outputs have {data.shape[-1]} points, reference has {ref.shape[-1]}")
    per_trace = np.mean((data - ref[None, :]) ** 2, axis=1)
    return float(per_trace.mean()), float(per_trace.std()), per_trace


def fingerprint(obj) -> str:
    """Short stable hash of a JSON-able object or dataclass."""
    if is_dataclass(obj):
        obj = asdict(obj)
    text = json.dumps(obj, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class MethodResult:
    method: str
    mse_mean: float
    mse_std: float
    mse_mean_standardized: float
    mse_std_standardized: float
    n_test: int
    seconds_total: float
    config: str = ""


@dataclass
class EvalReport:
    rows: list[MethodResult] = field(default_factory=list)
    reference: str = "clean"
    metadata: dict = field(default_factory=dict)

    def row(self, method: str) -> MethodResult:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def mse(self, method: str) -> float:
        return self.row(method).mse_mean


def _result(method: str, outputs: np.ndarray, reference: np.ndarray, sigma: np.ndarray, seconds: float, config: str):
    mean, std, per = mse_against_reference(outputs, reference)
    scaled = per / sigma**2
    return MethodResult(method, mean, std, float(scaled.mean()), float(scaled.std()), len(per), seconds, config)


def _sigma_for(out: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    # an N-shot average collapses the set to one trace; use the mean input scale
    return sigma if out.shape[0] == sigma.shape[0] else np.array([float(np.mean(sigma))])


def score_outputs(
    outputs: dict[str, TraceSet | np.ndarray],
    noisy_test: TraceSet,
    reference,
    configs: dict[str, str] | None = None,
    seconds: dict[str, float] | None = None,
    reference_name: str = "clean",
) -> EvalReport:
    """Report for precomputed method outputs, in the order given.

    Standardized MSEs divide each trace's error by that input trace's
    own variance.
    """
    ref = _ref_values(reference)
    _, record = standardize_array(noisy_test.data)
    sigma = np.asarray(record.sigma)
    configs, seconds = configs or {}, seconds or {}
    report = EvalReport(reference=reference_name)
    for method, out in outputs.items():
        data = np.asarray(getattr(out, "data", out), dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        report.rows.append(
            _result(method, data, ref, _sigma_for(data, sigma), seconds.get(method, 0.0), configs.get(method, ""))
        )
    return report


def compare_methods(
    noisy_test: TraceSet,
    reference,
    trained_model: ModelParams | None = None,
    kalman_cfg: KalmanConfig | None = None,
    wavelet_cfg: WaveletConfig | None = None,
    methods: tuple[str, ...] = ("model", "kalman", "wavelet", "average"),
    reference_name: str = "clean",
    standardized_baselines: bool = True,
) -> EvalReport:
    """Run each method on every test trace and score it against one reference trace.

    "average" is the N-shot mean of the whole test partition; it yields a
    single output trace, so its row has ``n_test == 1``.
    """
    outputs, configs, seconds = {}, {}, {}
    for method in methods:
        t0 = time.perf_counter()
        if method == "model":
            if trained_model is None:
                raise ValueError("method 'model' requested without a trained model")
            outputs[method] = predict(trained_model, noisy_test)
            configs[method] = fingerprint(config_to_dict(trained_model.config))
        elif method == "kalman":
            cfg = kalman_cfg or KalmanConfig()
            outputs[method] = apply_baseline("kalman", noisy_test, cfg, standardized_baselines)
            configs[method] = fingerprint(cfg)
        elif method == "wavelet":
            cfg = wavelet_cfg or WaveletConfig()
            outputs[method] = apply_baseline("wavelet", noisy_test, cfg, standardized_baselines)
            configs[method] = fingerprint(cfg)
        elif method == "average":
            outputs[method] = average(noisy_test).values[None, :]
            configs[method] = f"n={noisy_test.n_sets}"
        else:
            raise ValueError(f"unknown method {method!r}")
        seconds[method] = time.perf_counter() - t0
    return score_outputs(outputs, noisy_test, reference, configs, seconds, reference_name)


# -- size sweep -------------------------------------------------------------------

@dataclass
class SweepRow:
    n_train: int
    mse_mean: float
    mse_std: float
    epochs: int


def size_sweep(sizes, data: DatasetSplit, reference, train_cfg: TrainConfig) -> list[SweepRow]:
    """Train a fresh model on the first n pairs of ``data`` for each n; score on its test set.

    Prefix subsets make every smaller training set a subset of the larger ones.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be sorted ascending")
    if sizes and sizes[-1] > data.train_x.n_sets:
        raise DimensionError(f"largest size {sizes[-1]} exceeds {data.train_x.n_sets} training pairs")
    rows = []
    for n in sizes:
        params, log = train(data.head(n), train_cfg)
        mean, std, _ = mse_against_reference(predict(params, data.test_x), reference)
        rows.append(SweepRow(n, mean, std, len(log.epochs)))
    return rows


# -- latency --------------------------------------------------------------------

def time_inference(trained_model: ModelParams, trace, repeats: int = 5) -> list[float]:
    """Wall-clock seconds for ``repeats`` single-trace inferences after one warm-up."""
    values = np.asarray(getattr(trace, "values", trace), dtype=np.float64)
    z, _ = standardize_array(values)
    dtype = next(iter(trained_model.arrays.values())).dtype
    x = z.astype(dtype)[:, None]
    forward(x, trained_model, "infer")
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        forward(x, trained_model, "infer")
        samples.append(time.perf_counter() - t0)
    return samples


def bench_latency(trained_model: ModelParams, trace, repeats: int = 5) -> float:
    """Median single-trace inference time in seconds (at least 5 timed runs)."""
    return statistics.median(time_inference(trained_model, trace, max(5, repeats)))


# -- CSV emission ---------------------------------------------------------------

def _writer(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = path.open("w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


REPORT_COLUMNS = [
    "method",
    "mse_mean",
    "mse_std",
    "mse_mean_standardized",
    "mse_std_standardized",
    "n_test",
    "config",
]


def write_report_csv(report: EvalReport, path) -> Path:
    fh, w = _writer(path)
    with fh:
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow(
                [r.method, repr(r.mse_mean), repr(r.mse_std), repr(r.mse_mean_standardized),
                 repr(r.mse_std_standardized), r.n_test, r.config]
            )
    return Path(path)


def write_timing_csv(report: EvalReport, path) -> Path:
    fh, w = _writer(path)
    with fh:
        w.writerow(["method", "seconds_total", "seconds_per_trace"])
        for r in report.rows:
            w.writerow([r.method, f"{r.seconds_total:.6f}", f"{r.seconds_total / max(r.n_test, 1):.6f}"])
    return Path(path)


def write_sweep_csv(rows: list[SweepRow], path) -> Path:
    fh, w = _writer(path)
    with fh:
        w.writerow(["n_train", "mse_mean", "mse_std", "epochs"])
        for r in rows:
            w.writerow([r.n_train, repr(r.mse_mean), repr(r.mse_std), r.epochs])
    return Path(path)


def write_traces_csv(series: dict[str, np.ndarray], path, axis=None) -> Path:
    """One row per sample point; columns index, axis_value, then each series."""
    names = list(series)
    arrays = [np.asarray(getattr(series[k], "values", series[k]), dtype=np.float64) for k in names]
    n = arrays[0].shape[0] if arrays else 0
    if any(a.shape != (n,) for a in arrays):
        raise DimensionError("all exported series must be 1-D with equal length")
    xs = axis.values(n) if axis is not None else np.arange(n, dtype=np.float64)
    fh, w = _writer(path)
    with fh:
        w.writerow(["index", "axis_value", *names])
        for i in range(n):
            w.writerow([i, repr(float(xs[i])), *(repr(float(a[i])) for a in arrays)])
    return Path(path)


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
