"""Synthetic heterodyne IF traces and spectra with seeded noise.

The clean time-domain signal follows the ac Stark shift of the summed
signal and local-oscillator fields, -alpha |E_S + E_L|^2 / 2, whose
cross term oscillates at the intermediate frequency with an amplitude
proportional to E_S.

Every random draw comes from a generator seeded by ``(seed, stream,
index)``, so a trace's noise depends only on its own coordinates and not
on how many traces are generated or in which order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataio import Axis, DatasetSplit, Trace, TraceSet
from .errors import ConfigurationError

# seed-stream identifiers for make_paired_dataset
STREAM_TRAIN_X = 0
STREAM_TRAIN_Y = 1
STREAM_TEST_X = 2
STREAM_EXTRA = 3


class GridSnapWarning(UserWarning):
    """A spectral peak centre was moved onto the nearest grid point."""


@dataclass(frozen=True)
class HeterodyneConfig:
    sut_amplitude: float = 0.2
    lo_amplitude: float = 1.0
    polarizability_alpha: float = 1.0
    if_frequency: float = 50_000.0
    phase: float = 0.0
    sample_rate: float = 1_000_000.0
    n_points: int = 1000
    # extra weak SUT components, as (IF frequency in Hz, amplitude relative to E_S)
    weak_lines: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        nyquist = self.sample_rate / 2
        for f in (self.if_frequency, *(w[0] for w in self.weak_lines)):
            if not 0 <= f < nyquist:
                raise ConfigurationError(f"frequency {f} Hz violates Nyquist limit {nyquist} Hz")
        if self.n_points < 2:
            raise ConfigurationError(f"n_points must be at least 2, got {self.n_points}")
        if self.sut_amplitude < 0 or self.lo_amplitude < 0:
            raise ConfigurationError("field amplitudes must be non-negative")

    @property
    def beat_amplitude(self) -> float:
        """Amplitude of the IF oscillation, alpha E_S E_L."""
        return self.polarizability_alpha * self.sut_amplitude * self.lo_amplitude

    def ac_rms(self) -> float:
        """RMS of the oscillating part, counting weak lines as incoherent."""
        power = 0.5 * self.beat_amplitude**2
        power += sum(0.5 * (self.beat_amplitude * a) ** 2 for _, a in self.weak_lines)
        return math.sqrt(power)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "white"  # white | pink | burst
    sigma: float = 1.0
    pink_exponent: float = 1.0
    burst_probability: float = 0.01
    burst_amplitude: float = 5.0

    def __post_init__(self):
        if self.kind not in ("white", "pink", "burst"):
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ConfigurationError(f"sigma must be non-negative, got {self.sigma}")
        if not 0 <= self.burst_probability <= 1:
            raise ConfigurationError("burst_probability must lie in [0, 1]")


@dataclass(frozen=True)
class SpectrumSpec:
    freq_start: float = 49_000.0
    freq_stop: float = 51_000.0
    freq_step: float = 5.0
    n_points: int | None = None  # overrides freq_step when set
    main_center: float = 50_000.0
    main_amplitude: float = 1.0
    linewidth: float = 10.0  # Lorentzian half width at half maximum, Hz
    sideband_offset: float = 250.0
    sideband_amplitude: float = 0.05
    weak_center: float = 49_100.0
    weak_amplitude: float = 0.02
    floor: float = 0.0

    def __post_init__(self):
        if not self.freq_start < self.freq_stop:
            raise ConfigurationError("freq_start must be below freq_stop")
        for c in self.centers():
            if not self.freq_start <= c <= self.freq_stop:
                raise ConfigurationError(f"peak centre {c} Hz outside the sweep range")

    def centers(self) -> list[float]:
        return [
            self.main_center,
            self.main_center - self.sideband_offset,
            self.main_center + self.sideband_offset,
            self.weak_center,
        ]

    def grid(self) -> np.ndarray:
        if self.n_points is not None:
            return np.linspace(self.freq_start, self.freq_stop, self.n_points)
        n = int(round((self.freq_stop - self.freq_start) / self.freq_step)) + 1
        return self.freq_start + self.freq_step * np.arange(n)


def trace_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream), int(index)])


# -- clean signals -------------------------------------------------------------

def beat_signal(cfg: HeterodyneConfig) -> Trace:
    """s(t) = -(alpha/2) [E_S^2 + E_L^2 + 2 E_S E_L cos(2 pi f t + phi)], DC kept.

    Weak lines add LO cross terms at their own IF frequency; their
    SUT-SUT products are neglected.
    """
    t = np.arange(cfg.n_points) / cfg.sample_rate
    a, es, el = cfg.polarizability_alpha, cfg.sut_amplitude, cfg.lo_amplitude
    s = -(a / 2) * (es**2 + el**2 + 2 * es * el * np.cos(2 * np.pi * cfg.if_frequency * t + cfg.phase))
    for freq, rel in cfg.weak_lines:
        s = s - a * (es * rel) * el * np.cos(2 * np.pi * freq * t + cfg.phase)
    return Trace(s, Axis("time", 0.0, 1.0 / cfg.sample_rate, "s"))


def sigma_for_snr(cfg: HeterodyneConfig, snr_db: float) -> float:
    """White-noise sigma that puts the IF oscillation at ``snr_db`` (power ratio)."""
    return cfg.ac_rms() / 10 ** (snr_db / 20)


def attenuate(trace: Trace, factor: float) -> Trace:
    """Scale a clean trace by ``factor``; apply before :func:`add_noise`."""
    if not 0 < factor <= 1:
        raise ConfigurationError(f"attenuation factor must lie in (0, 1], got {factor}")
    return Trace(trace.values * factor, trace.axis)


# -- noise ----------------------------------------------------------------------

def _pink_filter(n: int, exponent: float) -> np.ndarray:
    """Real-FFT gain |H_k| ~ f^(-exponent/2), DC removed, unit average power."""
    k = np.arange(n // 2 + 1, dtype=np.float64)
    gain = np.zeros_like(k)
    gain[1:] = k[1:] ** (-exponent / 2)
    weights = np.full_like(k, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    power = np.sum(weights * gain**2) / n
    return gain / math.sqrt(power)


def noise_draw(shape: tuple[int, ...], spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean noise; the last axis is time (pink shaping acts along it)."""
    if spec.kind == "white":
        return spec.sigma * rng.standard_normal(shape)
    if spec.kind == "pink":
        n = shape[-1]
        white = rng.standard_normal(shape)
        spectrum = np.fft.rfft(white, axis=-1) * _pink_filter(n, spec.pink_exponent)
        return spec.sigma * np.fft.irfft(spectrum, n=n, axis=-1)
    # burst: white background plus Bernoulli-gated Gaussian spikes
    base = spec.sigma * rng.standard_normal(shape)
    gate = rng.random(shape) < spec.burst_probability
    spikes = spec.burst_amplitude * spec.sigma * rng.standard_normal(shape)
    return base + gate * spikes


def add_noise(trace: Trace, spec: NoiseSpec, seed: int, stream: int = STREAM_EXTRA, index: int = 0) -> Trace:
    if spec.sigma == 0:
        return Trace(trace.values.copy(), trace.axis)
    noise = noise_draw(trace.values.shape, spec, trace_rng(seed, stream, index))
    return Trace(trace.values + noise, trace.axis)


def noisy_copies(clean: Trace, spec: NoiseSpec, n: int, seed: int, stream: int = STREAM_EXTRA) -> TraceSet:
    """``n`` independent noisy measurements of ``clean``; row i uses (seed, stream, i)."""
    data = np.empty((n, len(clean)), dtype=np.float64)
    for i in range(n):
        data[i] = add_noise(clean, spec, seed, stream, i).values
    return TraceSet(data, clean.axis)


# -- spectra --------------------------------------------------------------------

def _lorentzian(f: np.ndarray, center: float, amplitude: float, hwhm: float) -> np.ndarray:
    return amplitude / (1.0 + ((f - center) / hwhm) ** 2)


def synth_spectrum(spec: SpectrumSpec, noise: NoiseSpec, seed: int, index: int = 0) -> Trace:
    """Floor plus Lorentzian IF peak, sideband pair and weak line, plus noise.

    Peak centres off the grid snap to the nearest grid point and emit a
    :class:`GridSnapWarning`.
    """
    f = spec.grid()
    values = np.full(f.shape, spec.floor, dtype=np.float64)
    amps = [spec.main_amplitude, spec.sideband_amplitude, spec.sideband_amplitude, spec.weak_amplitude]
    for center, amp in zip(spec.centers(), amps):
        j = int(np.argmin(np.abs(f - center)))
        if not math.isclose(f[j], center, rel_tol=0, abs_tol=1e-9 * max(1.0, abs(center))):
            warnings.warn(
                f"peak centre {center} Hz snapped to grid point {f[j]} Hz", GridSnapWarning, stacklevel=2
            )
        values += _lorentzian(f, f[j], amp, spec.linewidth)
    step = float(f[1] - f[0])
    trace = Trace(values, Axis("frequency", float(f[0]), step, "Hz"))
    if noise.sigma == 0:
        return trace
    return add_noise(trace, noise, seed, STREAM_EXTRA, index)


# -- paired datasets -------------------------------------------------------------

def make_paired_dataset(
    clean_source: Trace,
    noise: NoiseSpec,
    n_train: int,
    n_test: int,
    seed: int = 0,
) -> DatasetSplit:
    """Independent noisy measurements of one clean trace, paired by index.

    Inputs, labels and test inputs draw from disjoint seed streams.
    """
    if n_train < 1 or n_test < 1:
        raise ConfigurationError("n_train and n_test must both be at least 1")
    return DatasetSplit(
        noisy_copies(clean_source, noise, n_train, seed, STREAM_TRAIN_X),
        noisy_copies(clean_source, noise, n_train, seed, STREAM_TRAIN_Y),
        noisy_copies(clean_source, noise, n_test, seed, STREAM_TEST_X),
        {"source": "make_paired_dataset", "seed": seed, "noise": noise.kind, "sigma": noise.sigma},
    )


@dataclass(frozen=True)
class StandardTask:
    """The desk-scale benchmark: 50 kHz beat, 1000 points, white noise at a given SNR."""

    heterodyne: HeterodyneConfig = field(default_factory=HeterodyneConfig)
    snr_db: float = 0.0
    n_train: int = 2000
    n_test: int = 1000
    seed: int = 0

    def clean(self) -> Trace:
        return beat_signal(self.heterodyne)

    def noise(self) -> NoiseSpec:
        return NoiseSpec("white", sigma_for_snr(self.heterodyne, self.snr_db))

    def dataset(self) -> DatasetSplit:
        return make_paired_dataset(self.clean(), self.noise(), self.n_train, self.n_test, self.seed)
