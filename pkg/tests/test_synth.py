import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydberg_n2n.errors import ConfigurationError
from rydberg_n2n.synth import (
    GridSnapWarning,
    HeterodyneConfig,
    NoiseSpec,
    SpectrumSpec,
    StandardTask,
    add_noise,
    attenuate,
    beat_signal,
    make_paired_dataset,
    noise_draw,
    noisy_copies,
    sigma_for_snr,
    synth_spectrum,
    trace_rng,
)


def brute_dft_magnitude(x):
    n = len(x)
    k = np.arange(n)[:, None]
    t = np.arange(n)[None, :]
    return np.abs((x[None, :] * np.exp(-2j * np.pi * k * t / n)).sum(axis=1))


def ac_peak_to_peak(values):
    ac = values - values.mean()
    return ac.max() - ac.min()


def test_beat_signal_formula_pointwise():
    cfg = HeterodyneConfig(sut_amplitude=0.3, lo_amplitude=0.8, polarizability_alpha=2.0, phase=0.4, n_points=50)
    s = beat_signal(cfg)
    for i in (0, 7, 49):
        t = i / cfg.sample_rate
        expected = -(2.0 / 2) * (0.09 + 0.64 + 2 * 0.3 * 0.8 * math.cos(2 * math.pi * 50_000 * t + 0.4))
        assert s.values[i] == pytest.approx(expected, rel=1e-13)
    assert s.axis.kind == "time" and s.axis.step == pytest.approx(1e-6)


def test_zero_sut_gives_dc_only():
    s = beat_signal(HeterodyneConfig(sut_amplitude=0.0)).values
    assert np.ptp(s) == 0.0
    assert s[0] == pytest.approx(-0.5)


def test_doubling_sut_doubles_ac_amplitude():
    a = ac_peak_to_peak(beat_signal(HeterodyneConfig(sut_amplitude=0.1)).values)
    b = ac_peak_to_peak(beat_signal(HeterodyneConfig(sut_amplitude=0.2)).values)
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_spectrum_of_beat_peaks_at_if_bin():
    cfg = HeterodyneConfig()
    x = beat_signal(cfg).values
    mag = brute_dft_magnitude(x - x.mean())[: cfg.n_points // 2]
    expected_bin = round(cfg.if_frequency * cfg.n_points / cfg.sample_rate)
    assert int(np.argmax(mag)) == expected_bin == 50


def test_nyquist_and_field_validation():
    with pytest.raises(ConfigurationError):
        HeterodyneConfig(if_frequency=600_000)
    with pytest.raises(ConfigurationError):
        HeterodyneConfig(weak_lines=((500_000.0, 0.1),))
    with pytest.raises(ConfigurationError):
        HeterodyneConfig(sut_amplitude=-1)
    with pytest.raises(ConfigurationError):
        HeterodyneConfig(n_points=1)


def test_sigma_for_snr_is_power_ratio():
    cfg = HeterodyneConfig()
    assert sigma_for_snr(cfg, 0.0) == pytest.approx(0.2 / math.sqrt(2))
    assert sigma_for_snr(cfg, 20.0) == pytest.approx(sigma_for_snr(cfg, 0.0) / 10)
    x = beat_signal(cfg).values
    measured_rms = np.sqrt(np.mean((x - x.mean()) ** 2))
    assert measured_rms == pytest.approx(cfg.ac_rms(), rel=1e-12)


def test_add_noise_examples():
    clean = beat_signal(HeterodyneConfig())
    assert np.array_equal(add_noise(clean, NoiseSpec(sigma=0.0), 1).values, clean.values)
    a = add_noise(clean, NoiseSpec(sigma=0.5), 1)
    assert np.array_equal(a.values, add_noise(clean, NoiseSpec(sigma=0.5), 1).values)
    assert not np.array_equal(a.values, add_noise(clean, NoiseSpec(sigma=0.5), 2).values)
    with pytest.raises(ConfigurationError):
        NoiseSpec(kind="brown")


def test_white_noise_moments_large_sample():
    z = noise_draw((1_000_000,), NoiseSpec(sigma=1.0), trace_rng(0, 0, 0))
    assert -0.01 <= z.mean() <= 0.01
    assert 0.99 <= z.std() <= 1.01


@pytest.mark.parametrize("kind", ["white", "pink", "burst"])
def test_every_noise_kind_is_zero_mean(kind):
    spec = NoiseSpec(kind=kind, sigma=0.7, burst_probability=0.02, burst_amplitude=4.0)
    z = noise_draw((1000, 1000), spec, trace_rng(3, 0, 0))
    se = z.std() / math.sqrt(z.size)
    assert abs(z.mean()) < 4 * se + 1e-15


def test_pink_noise_has_requested_power_and_slope():
    z = noise_draw((400, 1024), NoiseSpec(kind="pink", sigma=2.0), trace_rng(1, 0, 0))
    assert z.var() == pytest.approx(4.0, rel=0.05)
    psd = np.mean(np.abs(np.fft.rfft(z, axis=-1)) ** 2, axis=0)
    k = np.arange(4, 400)
    slope = np.polyfit(np.log(k), np.log(psd[k]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.1)


def test_burst_noise_variance():
    p, a = 0.05, 6.0
    z = noise_draw((500, 1000), NoiseSpec(kind="burst", sigma=1.0, burst_probability=p, burst_amplitude=a), trace_rng(0, 1, 0))
    assert z.var() == pytest.approx(1 + p * a * a, rel=0.05)


def test_noise_independent_of_signal():
    clean = beat_signal(HeterodyneConfig()).values
    noise = noisy_copies(beat_signal(HeterodyneConfig()), NoiseSpec(sigma=1.0), 500, 9).data - clean
    c = clean - clean.mean()
    corr = (noise @ c) / (np.linalg.norm(c) * np.linalg.norm(noise, axis=1))
    # each correlation is ~ N(0, 1/n); their mean over 500 traces has SE 1/sqrt(500 n)
    assert abs(corr.mean()) < 4 / math.sqrt(500 * len(c))
    assert np.all(np.abs(corr) < 5 / math.sqrt(len(c)))


def test_spectrum_examples():
    spec = SpectrumSpec()
    assert len(spec.grid()) == 401
    flat = synth_spectrum(SpectrumSpec(main_amplitude=0, sideband_amplitude=0, weak_amplitude=0, floor=0.3), NoiseSpec(sigma=0), 0)
    assert np.all(flat.values == 0.3)
    clean = synth_spectrum(spec, NoiseSpec(sigma=0), 0)
    assert clean.axis.kind == "frequency"
    assert clean.axis.values(len(clean))[np.argmax(clean.values)] == 50_000.0
    noisy = synth_spectrum(spec, NoiseSpec(sigma=0.01), 0)
    assert not np.array_equal(noisy.values, clean.values)


def test_spectrum_snaps_off_grid_centres():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        t = synth_spectrum(SpectrumSpec(freq_step=40.0, sideband_amplitude=0, weak_amplitude=0), NoiseSpec(sigma=0), 0)
    assert any(issubclass(w.category, GridSnapWarning) for w in caught)
    assert np.isfinite(t.values).all()
    with pytest.raises(ConfigurationError):
        SpectrumSpec(weak_center=48_000)


def test_paired_dataset_examples():
    clean = beat_signal(HeterodyneConfig(n_points=100))
    same = make_paired_dataset(clean, NoiseSpec(sigma=0.0), 4, 3, 0)
    for ts in (same.train_x, same.train_y, same.test_x):
        assert np.all(ts.data == clean.values)
    noisy = make_paired_dataset(clean, NoiseSpec(sigma=0.1), 4, 3, 0)
    assert noisy.train_x.n_sets == 4 and noisy.test_x.n_sets == 3
    assert np.any(noisy.train_x.data != noisy.train_y.data)


def test_paired_dataset_rows_do_not_depend_on_sizes():
    clean = beat_signal(HeterodyneConfig(n_points=50))
    small = make_paired_dataset(clean, NoiseSpec(sigma=0.3), 3, 2, 5)
    big = make_paired_dataset(clean, NoiseSpec(sigma=0.3), 10, 7, 5)
    assert np.array_equal(small.train_x.data, big.train_x.data[:3])
    assert np.array_equal(small.test_x.data, big.test_x.data[:2])


def test_streams_are_pairwise_independent():
    clean = beat_signal(HeterodyneConfig(n_points=200))
    d = make_paired_dataset(clean, NoiseSpec(sigma=1.0), 300, 300, 0)
    nx_, ny, nt = (ts.data - clean.values for ts in (d.train_x, d.train_y, d.test_x))
    bound = 4 / math.sqrt(nx_.size)
    for a, b in ((nx_, ny), (nx_, nt), (ny, nt), (nx_, np.roll(nx_, 1, axis=0))):
        r = np.corrcoef(a.ravel(), b.ravel())[0, 1]
        assert abs(r) < bound


def test_average_of_many_shots_recovers_clean():
    clean = beat_signal(HeterodyneConfig(n_points=100))
    sigma = 0.5
    se = sigma / math.sqrt(10_000)
    dev = np.abs(noisy_copies(clean, NoiseSpec(sigma=sigma), 10_000, 2).data.mean(axis=0) - clean.values)
    # 3 SE is a 99.73% per-point envelope; allow the expected handful of excursions
    assert np.mean(dev > 3 * se) <= 0.01
    assert dev.max() <= 4.5 * se


@pytest.mark.parametrize("n", [10, 100, 1000])
def test_averaging_law(n):
    z = noise_draw((n, 4000), NoiseSpec(sigma=1.3), trace_rng(7, 0, n))
    assert z.mean(axis=0).var() == pytest.approx(1.3**2 / n, rel=0.10)


def test_attenuate_examples():
    clean = beat_signal(HeterodyneConfig())
    assert np.array_equal(attenuate(clean, 1.0).values, clean.values)
    assert np.array_equal(attenuate(clean, 0.5).values, clean.values * 0.5)
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ConfigurationError):
            attenuate(clean, bad)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.0))
def test_snr_scales_linearly_with_attenuation(factor):
    cfg = HeterodyneConfig()
    sigma = 0.1
    full = beat_signal(cfg).values
    amp = lambda v: np.ptp(v - v.mean()) / 2
    assert amp(attenuate(beat_signal(cfg), factor).values) / sigma == pytest.approx(factor * amp(full) / sigma, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 3), st.integers(0, 10_000))
def test_noise_is_a_pure_function_of_coordinates(seed, stream, index):
    clean = beat_signal(HeterodyneConfig(n_points=16))
    a = add_noise(clean, NoiseSpec(sigma=1.0), seed, stream, index).values
    b = add_noise(clean, NoiseSpec(sigma=1.0), seed, stream, index).values
    assert a.tobytes() == b.tobytes()


def test_standard_task_shape():
    task = StandardTask(n_train=5, n_test=3)
    d = task.dataset()
    assert d.train_x.n_points == 1000
    assert task.noise().sigma == pytest.approx(task.heterodyne.ac_rms())
