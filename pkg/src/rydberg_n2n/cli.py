"""Command-line pipeline: synth -> train -> denoise -> baseline -> eval, plus bench.

Every subcommand takes the same YAML run configuration.  The resolved
configuration (defaults, file, then flags) is hashed, and all artifacts
land under ``<out>/<fingerprint>/{traces,checkpoints,logs,reports}``, so
successive subcommands with the same configuration share one run
directory.  Dotted overrides such as ``--train.epochs_max=5`` may follow
the subcommand; values are parsed as YAML scalars or lists.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import re
import statistics
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .baselines import (
    DEFAULT_GRIDS,
    GridSearchSpec,
    KalmanConfig,
    WaveletConfig,
    apply_baseline,
    average,
    grid_search,
)
from .dataio import (
    DatasetSplit,
    Trace,
    TraceSet,
    load_traceset,
    save_traceset,
    split_442,
)
from .errors import ConfigurationError, DataError, NonFiniteError, NumericalAbort
from .evaluation import (
    fingerprint,
    score_outputs,
    size_sweep,
    time_inference,
    write_report_csv,
    write_sweep_csv,
    write_traces_csv,
)
from .models import (
    ModelParams,
    TransformerConfig,
    UNetConfig,
    config_from_dict,
    config_to_dict,
    count_params,
    init_params,
    load_checkpoint,
)
from .synth import (
    STREAM_EXTRA,
    HeterodyneConfig,
    NoiseSpec,
    SpectrumSpec,
    beat_signal,
    make_paired_dataset,
    noisy_copies,
    sigma_for_snr,
    synth_spectrum,
)
from .training import TrainConfig, predict, train

log = logging.getLogger("rydberg_n2n")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

_TRAIN_KEYS = [f.name for f in fields(TrainConfig) if f.name not in ("model", "seed")]


def default_config() -> dict:
    """The full key tree; anything not listed here is rejected."""
    het = asdict(HeterodyneConfig())
    het["weak_lines"] = []
    noise = asdict(NoiseSpec())
    noise["sigma"] = None  # None: derive from snr_db
    train_defaults = asdict(TrainConfig(model=UNetConfig()))
    return {
        "seed": 0,
        "synth": {
            "domain": "time",  # time: heterodyne beat; frequency: IF spectrum
            "heterodyne": het,
            "spectrum": asdict(SpectrumSpec()),
            "noise": noise,
            "snr_db": 0.0,
            "n_average": 10_000,
        },
        "dataset": {"mode": "paired", "n_train": 2000, "n_test": 1000, "n_sets": 5000},
        "model": {"kind": "transformer"},
        "train": {k: train_defaults[k] for k in _TRAIN_KEYS},
        "baselines": {
            "standardized": True,
            "tune": True,
            "n_tune": 200,
            "kalman": asdict(KalmanConfig()),
            "wavelet": asdict(WaveletConfig()),
            "grids": copy.deepcopy(DEFAULT_GRIDS),
        },
        "eval": {
            "reference": "clean",  # clean | average
            "methods": ["model", "kalman", "wavelet", "average"],
            "sweep_sizes": [],
            "export_index": 0,
        },
        "bench": {"repeats": 5},
    }


# sub-trees whose keys are validated by their own config types rather than by the defaults
_OPEN_TREES = {("model",), ("baselines", "grids")}


def _merge(base: dict, update: dict, path: tuple = ()) -> dict:
    if not isinstance(update, dict):
        raise ConfigurationError(f"section {'.'.join(path) or '<root>'} must be a mapping")
    out = dict(base)
    for key, value in update.items():
        here = (*path, str(key))
        if path in _OPEN_TREES:
            out[key] = value
        elif key not in base:
            raise ConfigurationError(f"unknown config key {'.'.join(here)!r}")
        elif isinstance(base[key], dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-3``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.VERBOSE,
    ),
    list("-+0123456789."),
)


def _yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def parse_overrides(items: list[str]) -> dict:
    """``--a.b=value`` tokens -> nested dict (values parsed as YAML)."""
    tree: dict = {}
    for item in items:
        if not item.startswith("--") or "=" not in item:
            raise ConfigurationError(f"unrecognised argument {item!r}; overrides look like --section.key=value")
        key, raw = item[2:].split("=", 1)
        try:
            value = _yaml(raw) if raw != "" else ""
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse value for {key!r}: {exc}") from None
        node = tree
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override {key!r} conflicts with another override")
        node[parts[-1]] = value
    return tree


@dataclass
class RunConfig:
    """Resolved, validated configuration plus the objects built from it."""

    raw: dict
    out_root: Path
    heterodyne: HeterodyneConfig
    spectrum: SpectrumSpec
    noise: NoiseSpec
    model: TransformerConfig | UNetConfig
    train: TrainConfig
    kalman: KalmanConfig
    wavelet: WaveletConfig

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.raw)

    @property
    def run_dir(self) -> Path:
        return self.out_root / self.fingerprint

    def path(self, kind: str, name: str) -> Path:
        return self.run_dir / kind / name


def _build(cls, values: dict, section: str):
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigurationError(f"bad {section} section: {exc}") from None


def _n_points(raw: dict, spectrum: SpectrumSpec, het: HeterodyneConfig) -> int:
    return len(spectrum.grid()) if raw["synth"]["domain"] == "frequency" else het.n_points


def resolve(file_data: dict | None, overrides: dict | None = None, out: str | Path = "out") -> RunConfig:
    """Merge defaults, file and overrides; validate every section before any work."""
    raw = default_config()
    raw = _merge(raw, file_data or {})
    raw = _merge(raw, overrides or {})

    seed = raw["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    synth = raw["synth"]
    if synth["domain"] not in ("time", "frequency"):
        raise ConfigurationError(f"synth.domain must be 'time' or 'frequency', got {synth['domain']!r}")

    het_values = dict(synth["heterodyne"])
    het_values["weak_lines"] = tuple(tuple(float(v) for v in pair) for pair in het_values.get("weak_lines") or [])
    het = _build(HeterodyneConfig, het_values, "synth.heterodyne")
    spectrum = _build(SpectrumSpec, synth["spectrum"], "synth.spectrum")

    noise_values = dict(synth["noise"])
    if noise_values["sigma"] is None:
        snr = float(synth["snr_db"])
        if synth["domain"] == "time":
            noise_values["sigma"] = sigma_for_snr(het, snr)
        else:
            noise_values["sigma"] = spectrum.main_amplitude / 10 ** (snr / 20)
    noise = _build(NoiseSpec, noise_values, "synth.noise")

    ds = raw["dataset"]
    if ds["mode"] not in ("paired", "split442"):
        raise ConfigurationError(f"dataset.mode must be 'paired' or 'split442', got {ds['mode']!r}")
    for key in ("n_train", "n_test", "n_sets"):
        if not isinstance(ds[key], int) or ds[key] < 1:
            raise ConfigurationError(f"dataset.{key} must be a positive integer")

    model_values = dict(raw["model"])
    if model_values.get("seq_len") is None:
        model_values["seq_len"] = _n_points(raw, spectrum, het)
    model = config_from_dict(model_values)

    train_cfg = _build(TrainConfig, {**raw["train"], "model": model, "seed": seed}, "train")

    bl = raw["baselines"]
    kalman = _build(KalmanConfig, bl["kalman"], "baselines.kalman")
    wavelet = _build(WaveletConfig, bl["wavelet"], "baselines.wavelet")
    for method, grid in bl["grids"].items():
        if method not in ("kalman", "wavelet"):
            raise ConfigurationError(f"unknown config key 'baselines.grids.{method}'")
        known = {f.name for f in fields(KalmanConfig if method == "kalman" else WaveletConfig)}
        bad = sorted(set(grid) - known)
        if bad:
            raise ConfigurationError(f"unknown config key 'baselines.grids.{method}.{bad[0]}'")
        GridSearchSpec(grid)

    ev = raw["eval"]
    if ev["reference"] not in ("clean", "average"):
        raise ConfigurationError(f"eval.reference must be 'clean' or 'average', got {ev['reference']!r}")
    unknown = sorted(set(ev["methods"]) - {"model", "kalman", "wavelet", "average"})
    if unknown:
        raise ConfigurationError(f"eval.methods has unknown method {unknown[0]!r}")
    if list(ev["sweep_sizes"]) != sorted(ev["sweep_sizes"]):
        raise ConfigurationError("eval.sweep_sizes must be sorted ascending")

    return RunConfig(raw, Path(out), het, spectrum, noise, model, train_cfg, kalman, wavelet)


def load_config_file(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = _yaml(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return data


# -- manifest -------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# artifacts whose bytes carry wall-clock measurements are listed but not hashed
_TIMED = ("logs/", "checkpoints/", "reports/timing", "reports/latency")


def update_manifest(cfg: RunConfig, command: str, written: list[Path]) -> Path:
    path = cfg.run_dir / "manifest.json"
    manifest = {"artifacts": {}, "commands": []}
    if path.exists():
        manifest = json.loads(path.read_text())
    manifest.update(
        {
            "version": __version__,
            "fingerprint": cfg.fingerprint,
            "seed": cfg.seed,
            "config": cfg.raw,
        }
    )
    if command not in manifest["commands"]:
        manifest["commands"].append(command)
    for p in written:
        rel = p.relative_to(cfg.run_dir).as_posix()
        manifest["artifacts"][rel] = None if rel.startswith(_TIMED) else _sha256(p)
    manifest["artifacts"] = dict(sorted(manifest["artifacts"].items()))
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _require(paths: list[Path], hint: str) -> None:
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise DataError("missing input file(s): " + ", ".join(missing) + f" ({hint})")


# -- subcommands ------------------------------------------------------------------

def clean_source(cfg: RunConfig) -> Trace:
    if cfg.raw["synth"]["domain"] == "frequency":
        return synth_spectrum(cfg.spectrum, NoiseSpec(sigma=0.0), cfg.seed)
    return beat_signal(cfg.heterodyne)


def cmd_synth(cfg: RunConfig, args) -> list[Path]:
    clean = clean_source(cfg)
    ds = cfg.raw["dataset"]
    if ds["mode"] == "paired":
        split = make_paired_dataset(clean, cfg.noise, ds["n_train"], ds["n_test"], cfg.seed)
        extra = {}
    else:
        noisy = noisy_copies(clean, cfg.noise, ds["n_sets"], cfg.seed, stream=0)
        split = split_442(noisy, cfg.seed)
        extra = {"noisy": noisy}
    n_avg = int(cfg.raw["synth"]["n_average"])
    shots = noisy_copies(clean, cfg.noise, n_avg, cfg.seed, stream=STREAM_EXTRA)
    written = [
        save_traceset(TraceSet(clean.values[None, :], clean.axis), cfg.path("traces", "clean.rdt")),
        save_traceset(TraceSet(average(shots).values[None, :], clean.axis), cfg.path("traces", "average.rdt")),
        save_traceset(split.train_x, cfg.path("traces", "train_x.rdt")),
        save_traceset(split.train_y, cfg.path("traces", "train_y.rdt")),
        save_traceset(split.test_x, cfg.path("traces", "test_x.rdt")),
    ]
    for name, ts in extra.items():
        written.append(save_traceset(ts, cfg.path("traces", f"{name}.rdt")))
    return written


def _load_split(cfg: RunConfig) -> DatasetSplit:
    names = ["train_x.rdt", "train_y.rdt", "test_x.rdt"]
    paths = [cfg.path("traces", n) for n in names]
    _require(paths, "run the synth subcommand first")
    return DatasetSplit(*(load_traceset(p) for p in paths), {"run": cfg.fingerprint})


def cmd_train(cfg: RunConfig, args) -> list[Path]:
    split = _load_split(cfg)
    ckpt = cfg.path("checkpoints", "model.ckpt")
    resume = None
    if getattr(args, "resume", False):
        _require([ckpt], "nothing to resume")
        resume = ckpt
    params, train_log = train(split, cfg.train, resume=resume, checkpoint_path=ckpt, stop_after=args.stop_after)
    log_path = train_log.write_csv(cfg.path("logs", "train_log.csv"))
    print(f"trained {train_log.epochs[-1].epoch if train_log.epochs else 0} epoch(s); checksum {params.checksum()}")
    return [ckpt, log_path]


def _load_model(cfg: RunConfig, path=None) -> ModelParams:
    ckpt = Path(path) if path else cfg.path("checkpoints", "model.ckpt")
    _require([ckpt], "run the train subcommand first or pass --checkpoint")
    params, _, _ = load_checkpoint(ckpt)
    return params


def cmd_denoise(cfg: RunConfig, args) -> list[Path]:
    params = _load_model(cfg, args.checkpoint)
    src = Path(args.input) if args.input else cfg.path("traces", "test_x.rdt")
    _require([src], "pass --input or run synth first")
    noisy = load_traceset(src)
    out = predict(params, noisy)
    dest = Path(args.output) if args.output else cfg.path("traces", "denoised.rdt")
    written = save_traceset(out, dest)
    return [written] if _inside(written, cfg.run_dir) else []


def _inside(path: Path, root: Path) -> bool:
    try:
        path.resolve().relative_to(root.resolve())
        return True
    except ValueError:
        return False


def _reference(cfg: RunConfig) -> tuple[Trace, str]:
    name = cfg.raw["eval"]["reference"]
    path = cfg.path("traces", f"{name}.rdt")
    _require([path], "run the synth subcommand first")
    return load_traceset(path)[0], name


def cmd_baseline(cfg: RunConfig, args) -> list[Path]:
    _require([cfg.path("traces", "test_x.rdt")], "run the synth subcommand first")
    test = load_traceset(cfg.path("traces", "test_x.rdt"))
    reference, _ = _reference(cfg)
    bl = cfg.raw["baselines"]
    chosen = {"kalman": cfg.kalman, "wavelet": cfg.wavelet}
    written = []
    if bl["tune"]:
        tune_set = test.subset(slice(0, min(int(bl["n_tune"]), test.n_sets)))
        for method in ("kalman", "wavelet"):
            spec = GridSearchSpec(bl["grids"][method], bl["standardized"], chosen[method])
            result = grid_search(method, spec, tune_set, reference)
            chosen[method] = result.best_config
            written.append(result.write_csv(cfg.path("reports", f"grid_{method}.csv")))
    for method, mcfg in chosen.items():
        out = apply_baseline(method, test, mcfg, bl["standardized"])
        written.append(save_traceset(out, cfg.path("traces", f"{method}.rdt")))
    tuned = cfg.path("reports", "baseline_configs.json")
    tuned.write_text(json.dumps({m: asdict(c) for m, c in chosen.items()}, indent=2, sort_keys=True) + "\n")
    written.append(tuned)
    return written


_OUTPUT_FILES = {"model": "denoised.rdt", "kalman": "kalman.rdt", "wavelet": "wavelet.rdt"}


def cmd_eval(cfg: RunConfig, args) -> list[Path]:
    ev = cfg.raw["eval"]
    methods = list(ev["methods"])
    needed = [cfg.path("traces", "test_x.rdt"), cfg.path("traces", f"{ev['reference']}.rdt")]
    needed += [cfg.path("traces", _OUTPUT_FILES[m]) for m in methods if m in _OUTPUT_FILES]
    _require(needed, "run synth, train+denoise and baseline first")
    test = load_traceset(needed[0])
    reference, ref_name = _reference(cfg)

    outputs, configs = {}, {}
    for m in methods:
        if m == "average":
            outputs[m] = average(test).values[None, :]
            configs[m] = f"n={test.n_sets}"
        else:
            outputs[m] = load_traceset(cfg.path("traces", _OUTPUT_FILES[m]))
            if outputs[m].data.shape != test.data.shape:
                raise DataError(f"{_OUTPUT_FILES[m]} has shape {outputs[m].data.shape}, test set {test.data.shape}")
    tuned_path = cfg.path("reports", "baseline_configs.json")
    tuned = json.loads(tuned_path.read_text()) if tuned_path.exists() else {}
    for m in ("kalman", "wavelet"):
        if m in outputs:
            configs[m] = fingerprint(tuned.get(m, asdict(cfg.kalman if m == "kalman" else cfg.wavelet)))
    if "model" in outputs:
        configs["model"] = fingerprint(config_to_dict(cfg.model))

    report = score_outputs(outputs, test, reference, configs, reference_name=ref_name)
    written = [write_report_csv(report, cfg.path("reports", "report.csv"))]

    idx = int(ev["export_index"])
    if not 0 <= idx < test.n_sets:
        raise ConfigurationError(f"eval.export_index {idx} outside the {test.n_sets} test traces")
    series = {"noisy": test.data[idx], "reference": reference.values}
    for m in methods:
        data = np.asarray(getattr(outputs[m], "data", outputs[m]))
        series[m] = data[idx if data.shape[0] > 1 else 0]
    written.append(write_traces_csv(series, cfg.path("reports", "traces.csv"), test.axis))

    if ev["sweep_sizes"]:
        rows = size_sweep(ev["sweep_sizes"], _load_split(cfg), reference, cfg.train)
        written.append(write_sweep_csv(rows, cfg.path("reports", "sweep.csv")))
    for r in report.rows:
        print(f"{r.method:8s} mse {r.mse_mean:.4e} +- {r.mse_std:.2e}  (standardized {r.mse_mean_standardized:.4e})")
    return written


def cmd_bench(cfg: RunConfig, args) -> list[Path]:
    repeats = int(cfg.raw["bench"]["repeats"])
    clean = clean_source(cfg)
    ckpt = cfg.path("checkpoints", "model.ckpt") if not args.checkpoint else Path(args.checkpoint)
    models = {}
    if ckpt.exists():
        models["trained"] = load_checkpoint(ckpt)[0]
    n = len(clean)
    # untrained reference architectures at the same length, for the complexity ordering
    models["transformer"] = init_params(TransformerConfig(seq_len=n), cfg.seed, np.float32)
    if n % 2 == 0:
        models["unet"] = init_params(UNetConfig(seq_len=n), cfg.seed, np.float32)
    path = cfg.path("reports", "latency.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["model,kind,n_params,median_seconds,max_seconds"]
    for name, params in models.items():
        samples = time_inference(params, clean, max(5, repeats))
        med = statistics.median(samples)
        lines.append(f"{name},{params.config.kind},{count_params(params)},{med:.6f},{max(samples):.6f}")
        print(f"{name:12s} {params.config.kind:12s} median {med * 1e3:.1f} ms")
    path.write_text("\n".join(lines) + "\n")
    return [path]


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "denoise": cmd_denoise,
    "baseline": cmd_baseline,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydberg-n2n", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="global seed (overrides the config)")
        p.add_argument("--out", default="out", help="output root (default: out)")
        p.add_argument("--model", choices=["transformer", "unet"], help="model architecture")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "train":
            p.add_argument("--resume", action="store_true", help="continue from the run's checkpoint")
            p.add_argument("--stop-after", type=int, default=None, help="stop after N epochs in this call")
        if name in ("denoise", "bench"):
            p.add_argument("--checkpoint", help="model checkpoint (default: the run's own)")
        if name == "denoise":
            p.add_argument("--input", help="noisy TraceSet file (default: the run's test set)")
            p.add_argument("--output", help="destination file (default: traces/denoised.rdt)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        overrides = parse_overrides(extra)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.model is not None:
            overrides.setdefault("model", {})["kind"] = args.model
        cfg = resolve(load_config_file(args.config), overrides, args.out)
        cfg.run_dir.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        written = COMMANDS[args.command](cfg, args)
        update_manifest(cfg, args.command, written)
        log.info("%s finished in %.1f s", args.command, time.perf_counter() - t0)
        print(cfg.run_dir)
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalAbort, NonFiniteError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
