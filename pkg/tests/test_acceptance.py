"""End-to-end acceptance gate.

Each test prints one PASS/FAIL line for its numbered check. The heavy
Monte-Carlo checks (6-9) share module-scoped trained models; the whole
module is deterministic, every random draw being derived from fixed
seeds.
"""

import math

import numpy as np
import pytest

from specsense.baselines import (
    EnergyFrameDetector,
    GofFrameDetector,
    MmeFrameDetector,
    energy_threshold,
    gnb_fit,
    gnb_predict,
    mlp_fit,
    mlp_forward,
)
from specsense.cli import EXIT_OK, main
from specsense.dataset import DatasetConfig, default_feature_context, make_dataset
from specsense.evaluate import (
    FmTone,
    LstmSequenceDetector,
    autocorrelation,
    detector_roc,
    h0_trials,
    h1_trials,
    snr_sweep,
)
from specsense.features import (
    NoiseModel,
    SmoothingConfig,
    eig_extremes_batch,
    gof_za,
    mme_asymptotic_bounds,
)
from specsense.lstm import (
    DenseHead,
    LstmParams,
    LstmState,
    TrainHyperparams,
    accuracy,
    grad_check,
    lstm_step,
    param_count,
    train,
)
from specsense.signals import ChannelConfig, ComplexSignal, awgn_matrix, synth_awgn, synth_fm
from specsense.seeding import derive_rng

NOISE = NoiseModel(1.0)
TONE = FmTone()
SNR_GRID = tuple(float(s) for s in range(-20, 1, 2))


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------------------
# shared trained models

@pytest.fixture(scope="module")
def full_grid_model():
    """Sequence classifier trained over the full SNR grid (desk scale)."""
    cfg = DatasetConfig(frame_len_N=100, seq_len_T=32, snr_grid_db=SNR_GRID,
                        instances_per_class=240, master_seed=0)
    channel = ChannelConfig()
    ctx = default_feature_context(cfg, channel)
    dataset = make_dataset(cfg, channel, ctx)
    hp = TrainHyperparams(epochs=12, batch_size=64, seed=0)
    model = train(dataset, hp, hidden_dim=25)
    return {"model": model, "ctx": ctx, "cfg": cfg}


def _lstm_detector(bundle) -> LstmSequenceDetector:
    return LstmSequenceDetector(bundle["model"], bundle["ctx"],
                                bundle["cfg"].frame_len_N, bundle["cfg"].seq_len_T)


# ---------------------------------------------------------------------------
# criteria

def test_criterion_01_parameter_count():
    counted = param_count(25, 4)
    params = LstmParams.init(25, 4, derive_rng(0))
    ok = counted == 3000 and params.scalar_count() == 3000
    _report(1, ok, f"param_count(25, 4) = {counted}, "
                   f"allocated scalars = {params.scalar_count()} (expected 3000)")


def test_criterion_02_bptt_gradient_check():
    errors = [grad_check(4, 4, 5, seed=seed, eps=1e-5) for seed in (0, 1, 2)]
    ok = all(e < 1e-4 for e in errors)
    _report(2, ok, "BPTT vs central differences, max relative errors "
                   + ", ".join(f"{e:.2e}" for e in errors) + " (< 1e-4 required)")


def test_criterion_03_lstm_forward_oracle():
    h, i = 3, 2
    rng = derive_rng(3)
    params = LstmParams.init(h, i, rng)
    x = rng.standard_normal(i)
    prev = LstmState(rng.standard_normal(h), rng.standard_normal(h))
    state = lstm_step(params, x, prev)
    worst = 0.0
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    for r in range(h):
        z = {g: params.b[g][r]
             + sum(params.w_x[g][r, c] * x[c] for c in range(i))
             + sum(params.w_h[g][r, c] * prev.output[c] for c in range(h))
             for g in ("f", "g", "i", "o")}
        s = sig(z["f"]) * prev.cell[r] + sig(z["i"]) * math.tanh(z["g"])
        hh = sig(z["o"]) * math.tanh(s)
        worst = max(worst, abs(state.cell[r] - s), abs(state.output[r] - hh))
    ok = worst < 1e-12
    _report(3, ok, f"per-scalar gate recurrence max deviation {worst:.2e} (< 1e-12 required)")


def test_criterion_04_energy_detector_calibration():
    trials, n = 20000, 100
    rng = derive_rng(0, 0xAC4)
    frames = awgn_matrix(rng, (trials, n), 1.0)
    energies = np.sum(np.abs(frames) ** 2, axis=1)
    details = []
    ok = True
    for target in (0.01, 0.1):
        thr = energy_threshold(NOISE, n, target)
        pf = float(np.mean(energies > thr))
        tol = 3.0 * math.sqrt(target * (1 - target) / trials)
        ok = ok and abs(pf - target) <= tol
        details.append(f"Pf target {target}: measured {pf:.4f} (tol {tol:.4f})")
    _report(4, ok, "; ".join(details))


def test_criterion_05_mme_asymptotics():
    cfg = SmoothingConfig(L=10, M=1, Ns=10**4)
    lam_max_ref, lam_min_ref = mme_asymptotic_bounds(NOISE, cfg)
    rng = derive_rng(0, 0xAC5)
    frames = awgn_matrix(rng, (100, cfg.L - 1 + cfg.Ns), 1.0)
    lam_min, lam_max = eig_extremes_batch(frames, cfg)
    max_dev = float(np.max(np.abs(lam_max / lam_max_ref - 1.0)))
    min_dev = float(np.max(np.abs(lam_min / lam_min_ref - 1.0)))
    ok = (abs(lam_max_ref - 1.06424) < 1e-5 and abs(lam_min_ref - 0.93775) < 1e-5
          and max_dev < 0.15 and min_dev < 0.15)
    _report(5, ok, f"bounds ({lam_max_ref:.5f}, {lam_min_ref:.5f}); empirical extreme "
                   f"eigenvalues deviate at most {max_dev:.1%} / {min_dev:.1%} "
                   "over 100 trials (15% allowed)")


def test_criterion_06_pd_vs_snr_trend(full_grid_model):
    trials = 5000
    tol = 3.0 * math.sqrt(0.25 / trials)
    detectors = [EnergyFrameDetector(NOISE), _lstm_detector(full_grid_model)]
    rows = snr_sweep(detectors, list(SNR_GRID), [100, 1000], trials=trials,
                     master_seed=0, noise=NOISE, tone=TONE, target_pf=0.1)
    by_key = {}
    for r in rows:
        by_key.setdefault((r.detector, r.N), []).append((r.snr_db, r.pd))
    ok = True
    details = []
    for key, pts in by_key.items():
        pds = [pd for _, pd in sorted(pts)]
        mono = all(b >= a - tol for a, b in zip(pds, pds[1:]))
        ok = ok and mono
        details.append(f"{key[0]}@N={key[1]} monotone={mono}")
    e100 = [pd for _, pd in sorted(by_key[("energy", 100)])]
    e1000 = [pd for _, pd in sorted(by_key[("energy", 1000)])]
    gain = all(b >= a - tol for a, b in zip(e100, e1000))
    ok = ok and gain
    details.append(f"energy Pd(N=1000) >= Pd(N=100) pointwise={gain}")
    _report(6, ok, f"{trials} trials/point, 3-sigma tol {tol:.3f}: " + "; ".join(details))


def test_criterion_07_roc_above_diagonal(full_grid_model):
    instances = 2000
    tol = 3.0 * math.sqrt(0.25 / instances)
    detectors = [EnergyFrameDetector(NOISE), MmeFrameDetector(NOISE, L=10),
                 GofFrameDetector(NOISE), _lstm_detector(full_grid_model)]
    ok = True
    details = []
    for idx, det in enumerate(detectors):
        points = detector_roc(det, -10.0, 100, instances, NOISE, tone=TONE,
                              master_seed=idx)
        endpoints = ((points[0].pf, points[0].pd) == (0.0, 0.0)
                     and (points[-1].pf, points[-1].pd) == (1.0, 1.0))
        above = all(p.pd >= p.pf - tol for p in points)
        worst = min(p.pd - p.pf for p in points)
        ok = ok and endpoints and above
        details.append(f"{det.name}: endpoints={endpoints}, min(pd-pf)={worst:+.3f}")
    _report(7, ok, f"ROC at -10 dB, {instances}/class, 3-sigma tol {tol:.3f}: "
                   + "; ".join(details))


def test_criterion_08_low_snr_ordering():
    accs = {"lstm": [], "gnb": [], "energy": []}
    for seed in (0, 1, 2):
        cfg = DatasetConfig(frame_len_N=100, seq_len_T=32, snr_grid_db=(-12.0,),
                            instances_per_class=2000, master_seed=seed)
        channel = ChannelConfig()
        dataset = make_dataset(cfg, channel)
        hp = TrainHyperparams(epochs=20, batch_size=64, seed=seed)
        model = train(dataset, hp, hidden_dim=25)
        x_test, y_test = dataset.sequences_and_labels("test")
        accs["lstm"].append(accuracy(model.params, model.head, x_test, y_test))

        frames_train, labels_train = dataset.frames_and_labels("train")
        gnb = gnb_fit(frames_train, labels_train)
        frames_test, labels_test = dataset.frames_and_labels("test")
        pred = np.argmax(gnb_predict(gnb, frames_test), axis=1)
        accs["gnb"].append(float(np.mean(pred == labels_test)))

        # Pf-matched single-frame energy detector on fresh raw frames
        thr = energy_threshold(NOISE, 100, 0.1)
        rng1 = derive_rng(seed, 0xAC8, 1)
        rng0 = derive_rng(seed, 0xAC8, 0)
        e1 = np.sum(np.abs(h1_trials(20000, 100, -12.0, 1.0, TONE, rng1)) ** 2, axis=1)
        e0 = np.sum(np.abs(h0_trials(20000, 100, 1.0, rng0)) ** 2, axis=1)
        pd = float(np.mean(e1 > thr))
        pf = float(np.mean(e0 > thr))
        accs["energy"].append(0.5 * (pd + 1.0 - pf))

    means = {k: float(np.mean(v)) for k, v in accs.items()}
    ok = (means["lstm"] >= means["energy"] + 0.03
          and means["lstm"] >= means["gnb"] + 0.03)
    _report(8, ok, f"-12 dB mean accuracy over 3 seeds: lstm {means['lstm']:.3f}, "
                   f"gnb {means['gnb']:.3f}, energy {means['energy']:.3f} "
                   "(lstm must lead both by >= 0.03)")


def test_criterion_09_high_snr_sanity():
    cfg = DatasetConfig(frame_len_N=100, seq_len_T=32, snr_grid_db=(10.0,),
                        instances_per_class=200, master_seed=0)
    dataset = make_dataset(cfg, ChannelConfig())
    hp = TrainHyperparams(epochs=8, batch_size=64, seed=0)
    model = train(dataset, hp, hidden_dim=25)
    x_test, y_test = dataset.sequences_and_labels("test")
    lstm_acc = accuracy(model.params, model.head, x_test, y_test)

    frames_train, labels_train = dataset.frames_and_labels("train")
    frames_test, labels_test = dataset.frames_and_labels("test")
    gnb = gnb_fit(frames_train, labels_train)
    gnb_acc = float(np.mean(np.argmax(gnb_predict(gnb, frames_test), axis=1)
                            == labels_test))
    mlp = mlp_fit(frames_train, labels_train, hidden=25,
                  hp=TrainHyperparams(epochs=20, batch_size=64, dropout_rate=0.0, seed=0))
    mlp_acc = float(np.mean(np.argmax(mlp_forward(mlp, frames_test), axis=1)
                            == labels_test))
    ok = lstm_acc >= 0.95 and gnb_acc >= 0.95 and mlp_acc >= 0.95
    _report(9, ok, f"+10 dB test accuracy: lstm {lstm_acc:.3f}, mlp {mlp_acc:.3f}, "
                   f"gnb {gnb_acc:.3f} (>= 0.95 required)")


def test_criterion_10_autocorrelation():
    fm = synth_fm(TONE.message_freq_hz, TONE.deviation_hz, TONE.sample_rate_hz,
                  100000, seed=0)
    rho_fm = autocorrelation(fm, 1)
    noise = synth_awgn(1.0, 100000, seed=0)
    rho_w = autocorrelation(noise, 50)
    ok = (rho_fm[0] == 1.0 and rho_fm[1] > 0.9 and bool(np.all(rho_w[1:] < 0.02)))
    _report(10, ok, f"FM rho(0)={rho_fm[0]:.6f}, rho(1)={rho_fm[1]:.4f} (> 0.9); "
                    f"white-noise max rho(k>=1)={float(np.max(rho_w[1:])):.4f} (< 0.02)")


def test_criterion_11_gof_oracle():
    # the fixed three normalized order statistics {-1, 0, +1}
    from specsense.features import za_statistic
    value = za_statistic(np.array([-1.0, 0.0, 1.0]))
    rng = derive_rng(0, 0xACB)
    y = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    sym = gof_za(ComplexSignal(y, 1.0), NOISE) == gof_za(ComplexSignal(-y, 1.0), NOISE)
    ok = abs(value - 3.0880) <= 1e-3 and sym
    _report(11, ok, f"3-sample statistic {value:.4f} (3.0880 +/- 1e-3); "
                    f"negation symmetry exact={sym}")


def test_criterion_12_cli_determinism(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text("""
master_seed = 11

[dataset]
frame_len_n = 100
seq_len_t = 8
snr_grid_db = [-10, 0]
instances_per_class = 40

[train]
epochs = 2
hidden_dim = 8

[eval]
snr_grid_db = [-10, 0]
n_values = [100]
trials = 100

[output]
figures = false
""")
    artifacts = ("dataset/manifest.json", "dataset/features.bin", "lstm.bin",
                 "gnb.bin", "mlp.bin", "training_log.csv", "sweep.csv")
    outs = []
    for run in ("one", "two"):
        out = tmp_path / run
        for cmd in ("simulate", "train", "sweep"):
            code = main([cmd, "--config", str(config), "--out", str(out)])
            assert code == EXIT_OK, f"{cmd} exited {code}"
        outs.append(out)
    mismatched = [name for name in artifacts
                  if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes()]
    ok = not mismatched
    _report(12, ok, "simulate -> train -> sweep twice with a fixed seed: "
                    + ("all artifacts byte-identical" if ok
                       else f"mismatched files: {mismatched}"))
