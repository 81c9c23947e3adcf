"""Detection-statistic tests: energy, LLR, goodness of fit, eigenvalue ratio."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specsense.features import (
    FeatureContext,
    NoiseModel,
    Normalizer,
    SignalCovariance,
    SmoothingConfig,
    energy,
    energy_batch,
    extract_sequence,
    fit_normalizer,
    frame_features,
    gof_za,
    gof_za_batch,
    llr,
    mme_asymptotic_bounds,
    mme_ratio,
    mme_ratio_batch,
    smoothed_covariance,
    za_statistic,
)
from specsense.signals import ComplexSignal, awgn_matrix, snr_gain, synth_fm
from specsense.seeding import derive_rng

FS = 228000.0


def _sig(samples):
    return ComplexSignal(np.asarray(samples, dtype=complex), FS)


# ---------------------------------------------------------------------------
# u1: energy

def test_energy_unit_samples():
    assert energy(_sig([1, 1j, -1, -1j])) == pytest.approx(4.0)


def test_energy_zero_frame():
    assert energy(_sig(np.zeros(17))) == 0.0


def test_energy_monte_carlo_mean():
    rng = derive_rng(0, 101)
    frames = awgn_matrix(rng, (10**4, 100), 1.0)
    assert 98.0 <= float(np.mean(energy_batch(frames))) <= 102.0


@given(scale_re=st.floats(-5, 5), scale_im=st.floats(-5, 5),
       seed=st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_energy_scaling_property(scale_re, scale_im, seed):
    rng = derive_rng(seed)
    y = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    c = scale_re + 1j * scale_im
    assert energy_batch(c * y) == pytest.approx(abs(c) ** 2 * energy_batch(y),
                                                rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# u2: log-likelihood ratio

def test_llr_zero_covariance_is_zero():
    cov = SignalCovariance(np.zeros((6, 6)))
    noise = NoiseModel(1.3)
    rng = derive_rng(1)
    y = _sig(rng.standard_normal(6) + 1j * rng.standard_normal(6))
    assert llr(y, cov, noise) == pytest.approx(0.0, abs=1e-10)


def test_llr_isotropic_covariance_closed_form():
    n, sig_s2, sig_v2 = 8, 0.7, 1.4
    cov = SignalCovariance(sig_s2 * np.eye(n))
    noise = NoiseModel(sig_v2)
    rng = derive_rng(2)
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    e = float(np.sum(np.abs(y) ** 2))
    expected = (-n * np.log(1.0 + sig_s2 / sig_v2)
                + sig_s2 / (sig_v2 * (sig_s2 + sig_v2)) * e)
    assert llr(_sig(y), cov, noise) == pytest.approx(expected, rel=1e-10)


def _log_complex_gaussian(y, c):
    """Independent density oracle: log N_C(y; 0, C)."""
    n = y.size
    sign, logdet = np.linalg.slogdet(c)
    assert sign.real > 0
    quad = float(np.real(y.conj() @ np.linalg.solve(c, y)))
    return -n * math.log(math.pi) - float(logdet.real) - quad


def test_llr_matches_density_ratio_oracle():
    n, sig_v2 = 4, 0.9
    rng = derive_rng(3)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    cov_mat = a @ a.conj().T / n
    cov = SignalCovariance(cov_mat)
    noise = NoiseModel(sig_v2)
    for _ in range(20):
        y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        oracle = (_log_complex_gaussian(y, cov.matrix + sig_v2 * np.eye(n))
                  - _log_complex_gaussian(y, sig_v2 * np.eye(n)))
        assert llr(_sig(y), cov, noise) == pytest.approx(oracle, abs=1e-9)


def test_llr_rejects_dimension_mismatch():
    cov = SignalCovariance(np.eye(4))
    with pytest.raises(ValueError):
        llr(_sig(np.ones(5)), cov, NoiseModel(1.0))


def test_signal_covariance_validation():
    bad = np.array([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        SignalCovariance(bad)                       # not Hermitian
    with pytest.raises(ValueError):
        SignalCovariance(-np.eye(3))                # not PSD


# ---------------------------------------------------------------------------
# u3: goodness of fit

def _phi(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def test_za_three_point_oracle():
    # independent hand evaluation of the weighted order-statistic sum
    xs = sorted([-1.0, 0.0, 1.0])
    n = len(xs)
    expected = -sum(math.log(_phi(x)) / (n - i + 0.5) + math.log(1 - _phi(x)) / (i - 0.5)
                    for i, x in enumerate(xs, start=1))
    value = za_statistic(np.array([-1.0, 0.0, 1.0]))
    assert value == pytest.approx(expected, abs=1e-9)
    assert value == pytest.approx(3.0880, abs=1e-3)


def test_gof_negation_symmetry_exact():
    rng = derive_rng(4)
    y = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    noise = NoiseModel(1.0)
    assert gof_za(_sig(y), noise) == gof_za(_sig(-y), noise)


@given(seed=st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_za_permutation_invariance(seed):
    rng = derive_rng(seed)
    vals = rng.standard_normal(40)
    shuffled = rng.permutation(vals)
    assert za_statistic(vals) == za_statistic(shuffled)


def test_za_finite_under_extreme_values():
    assert math.isfinite(za_statistic(np.array([-50.0, 0.0, 50.0])))


def test_gof_separates_signal_from_noise():
    noise = NoiseModel(1.0)
    rng = derive_rng(5)
    n_trials, n = 1000, 100
    h0 = awgn_matrix(rng, (n_trials, n), 1.0)
    tone = synth_fm(1000.0, 5000.0, FS, n, seed=6).samples
    h = snr_gain(1.0, 1.0, 10.0)
    h1 = h * tone[None, :] + awgn_matrix(rng, (n_trials, n), 1.0)
    assert (np.median(gof_za_batch(h1, noise))
            > np.median(gof_za_batch(h0, noise)))


def test_gof_rejects_empty():
    with pytest.raises(ValueError):
        za_statistic(np.array([]))


# ---------------------------------------------------------------------------
# u4: smoothed covariance and eigenvalue ratio

def test_smoothed_covariance_constant_signal():
    cfg = SmoothingConfig(L=5, Ns=50)
    r = smoothed_covariance(_sig(np.ones(54)), cfg)
    assert np.allclose(r, np.ones((5, 5)), atol=1e-12)


def test_smoothed_covariance_white_noise():
    cfg = SmoothingConfig(L=4, Ns=10**5)
    rng = derive_rng(7)
    x = awgn_matrix(rng, (cfg.Ns + cfg.L - 1,), 1.0)
    r = smoothed_covariance(_sig(x), cfg)
    diag = np.real(np.diag(r))
    assert np.all((0.98 <= diag) & (diag <= 1.02))
    off = np.abs(r - np.diag(np.diag(r)))
    assert np.max(off) < 0.02


def test_smoothed_covariance_exactly_hermitian():
    cfg = SmoothingConfig(L=6, Ns=200)
    rng = derive_rng(8)
    x = awgn_matrix(rng, (cfg.Ns + cfg.L - 1,), 2.0)
    r = smoothed_covariance(_sig(x), cfg)
    assert np.max(np.abs(r - r.conj().T)) < 1e-12


def test_smoothed_covariance_rejects_short_input():
    with pytest.raises(ValueError):
        smoothed_covariance(_sig(np.ones(10)), SmoothingConfig(L=4, Ns=10))


def test_smoothing_config_rejects_rank_deficient():
    with pytest.raises(ValueError):
        SmoothingConfig(L=10, Ns=10)


def test_mme_ratio_white_noise_near_one():
    cfg = SmoothingConfig(L=4, Ns=10**5)
    rng = derive_rng(9)
    x = awgn_matrix(rng, (1, cfg.Ns + cfg.L - 1), 1.0)
    assert float(mme_ratio_batch(x, cfg)[0]) < 1.1


def test_mme_ratio_correlated_signal_large():
    n = 100
    cfg = SmoothingConfig.for_frame(n, L=10)
    tone = synth_fm(1000.0, 5000.0, FS, n, seed=10).samples
    rng = derive_rng(10)
    h = snr_gain(1.0, 1.0, 20.0)
    x = h * tone[None, :] + awgn_matrix(rng, (1, n), 1.0)
    assert float(mme_ratio_batch(x, cfg)[0]) > 10.0


@given(theta=st.floats(0.0, 2.0 * math.pi), seed=st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_mme_ratio_phase_rotation_invariance(theta, seed):
    cfg = SmoothingConfig(L=4, Ns=40)
    rng = derive_rng(seed)
    x = rng.standard_normal(43) + 1j * rng.standard_normal(43)
    a = mme_ratio(_sig(x), cfg)
    b = mme_ratio(_sig(np.exp(1j * theta) * x), cfg)
    assert a >= 1.0 and b >= 1.0
    assert b == pytest.approx(a, rel=1e-9)


def test_mme_asymptotic_bounds_frozen_values():
    bounds = mme_asymptotic_bounds(NoiseModel(1.0), SmoothingConfig(L=10, Ns=10**4))
    assert bounds[0] == pytest.approx(1.06424, abs=1e-5)
    assert bounds[1] == pytest.approx(0.93775, abs=1e-5)
    assert bounds[0] / bounds[1] == pytest.approx(1.13489, abs=1e-5)


def test_mme_asymptotic_bounds_degenerate_smoothing_limit():
    lam_max, lam_min = mme_asymptotic_bounds(NoiseModel(2.0),
                                             SmoothingConfig(L=1, Ns=10**8))
    assert lam_max == pytest.approx(2.0, rel=1e-3)
    assert lam_min == pytest.approx(2.0, rel=1e-3)


# ---------------------------------------------------------------------------
# sequence assembly

def _context(n):
    cov = SignalCovariance(0.5 * np.eye(n))
    return FeatureContext(cov, NoiseModel(1.0), SmoothingConfig.for_frame(n, L=5))


def test_extract_sequence_composition_identity():
    n = 40
    ctx = _context(n)
    rng = derive_rng(11)
    x = awgn_matrix(rng, (n,), 1.0)
    seq = extract_sequence(ComplexSignal(x, FS), n, 1, ctx.sig_cov, ctx.noise,
                           ctx.smoothing)
    assert seq.shape == (1, 4)
    frame = ComplexSignal(x, FS)
    assert seq[0, 0] == pytest.approx(energy(frame))
    assert seq[0, 1] == pytest.approx(llr(frame, ctx.sig_cov, ctx.noise))
    assert seq[0, 2] == pytest.approx(gof_za(frame, ctx.noise))
    assert seq[0, 3] == pytest.approx(mme_ratio(frame, ctx.smoothing))


def test_extract_sequence_zscore_fixed_point():
    n, t = 30, 6
    ctx = _context(n)
    rng = derive_rng(12)
    seqs = [extract_sequence(ComplexSignal(awgn_matrix(rng, (n * t,), 1.0), FS),
                             n, t, ctx.sig_cov, ctx.noise, ctx.smoothing)
            for _ in range(8)]
    norm = fit_normalizer(seqs)
    stacked = np.concatenate([norm.apply(s) for s in seqs], axis=0)
    assert np.allclose(stacked.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(stacked.std(axis=0), 1.0, atol=1e-9)


def test_extract_sequence_determinism_and_length_check():
    n = 30
    ctx = _context(n)
    rng = derive_rng(13)
    x = ComplexSignal(awgn_matrix(rng, (n * 3,), 1.0), FS)
    a = extract_sequence(x, n, 3, ctx.sig_cov, ctx.noise, ctx.smoothing)
    b = extract_sequence(x, n, 3, ctx.sig_cov, ctx.noise, ctx.smoothing)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        extract_sequence(x, n, 4, ctx.sig_cov, ctx.noise, ctx.smoothing)


def test_feature_vector_invariants():
    n = 50
    ctx = _context(n)
    rng = derive_rng(14)
    frames = awgn_matrix(rng, (64, n), 1.0)
    feats = frame_features(frames, ctx)
    assert np.all(np.isfinite(feats))
    assert np.all(feats[:, 0] >= 0)        # energy
    assert np.all(feats[:, 3] >= 1)        # eigenvalue ratio


def test_fit_normalizer_examples():
    v = np.array([[1.0, 2.0, 3.0, 4.0]])
    norm = fit_normalizer([v, v, v])
    assert np.allclose(norm.mean, v[0])
    assert np.allclose(norm.std, 1e-9)

    a = np.array([[0.0, 0.0, 1.0, 1.0]])
    b = np.array([[2.0, 2.0, 1.0, 1.0]])
    norm = fit_normalizer([a, b])
    assert np.allclose(norm.mean, [1, 1, 1, 1])
    assert np.allclose(norm.std, [1, 1, 1e-9, 1e-9])

    with pytest.raises(ValueError):
        fit_normalizer([v[:1][:0]])
    with pytest.raises(ValueError):
        fit_normalizer([v])


def test_normalizer_validation():
    with pytest.raises(ValueError):
        Normalizer(np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        Normalizer(np.zeros(3), np.ones(3))
