"""Classical threshold detectors and simple learned per-frame classifiers.

Each detector turns a frame statistic into a busy/idle decision against
a threshold calibrated for a target false-alarm probability: the energy
detector analytically (Gamma null distribution), the eigenvalue-ratio
and goodness-of-fit detectors by Monte Carlo on noise-only frames.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv

from .seeding import derive_rng
from .signals import ComplexSignal, Hypothesis, awgn_matrix
from .features import (
    NoiseModel,
    SmoothingConfig,
    energy_batch,
    gof_za_batch,
    mme_asymptotic_bounds,
    mme_ratio_batch,
)
from .lstm import AdamOptimizer, TrainHyperparams, _sigmoid, _softmax  # noqa: F401


@dataclass(frozen=True)
class Decision:
    declared: Hypothesis
    statistic: float
    threshold: float


def _decide(statistic: float, threshold: float) -> Decision:
    declared = Hypothesis.H1 if statistic > threshold else Hypothesis.H0
    return Decision(declared, float(statistic), float(threshold))


# ---------------------------------------------------------------------------
# energy detection

def energy_threshold(noise: NoiseModel, N: int, target_pf: float) -> float:
    """Energy threshold for a target Pf under H0.

    The noise-only energy of N complex samples is Gamma(N, sigma^2)
    distributed; the threshold is its (1 - Pf) quantile via the inverse
    regularized incomplete gamma function.
    """
    if not 0.0 < target_pf < 1.0:
        raise ValueError(f"target_pf must lie in (0, 1), got {target_pf}")
    if N < 1:
        raise ValueError("N must be >= 1")
    return float(noise.noise_variance * gammaincinv(N, 1.0 - target_pf))


def energy_detect(frame: ComplexSignal, threshold: float) -> Decision:
    return _decide(float(energy_batch(frame.samples)), threshold)


# ---------------------------------------------------------------------------
# eigenvalue-ratio detection

def mme_default_gamma(cfg: SmoothingConfig) -> float:
    """Asymptotic max/min eigenvalue ratio for pure noise (no Pf knob)."""
    lam_max, lam_min = mme_asymptotic_bounds(NoiseModel(1.0), cfg)
    return lam_max / lam_min


def calibrate_mme_gamma(cfg: SmoothingConfig, noise: NoiseModel, target_pf: float,
                        trials: int = 20000, seed: int = 0) -> float:
    """Monte-Carlo threshold: the (1 - Pf) quantile of the noise-only ratio."""
    if not 0.0 < target_pf < 1.0:
        raise ValueError(f"target_pf must lie in (0, 1), got {target_pf}")
    rng = derive_rng(seed, 0x33E)
    n = cfg.L - 1 + cfg.Ns
    ratios = np.empty(trials)
    chunk = 2000
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        frames = awgn_matrix(rng, (stop - start, n), noise.noise_variance)
        ratios[start:stop] = mme_ratio_batch(frames, cfg)
    return float(np.quantile(ratios, 1.0 - target_pf))


def mme_detect(frame: ComplexSignal, cfg: SmoothingConfig, gamma: float) -> Decision:
    return _decide(float(mme_ratio_batch(frame.samples, cfg)[0]), gamma)


# ---------------------------------------------------------------------------
# goodness-of-fit detection

def calibrate_gof_threshold(noise: NoiseModel, N: int, target_pf: float,
                            trials: int = 20000, seed: int = 0) -> float:
    """Empirical (1 - Pf) quantile of the noise-only statistic; no closed form."""
    if not 0.0 < target_pf < 1.0:
        raise ValueError(f"target_pf must lie in (0, 1), got {target_pf}")
    rng = derive_rng(seed, 0x60F)
    stats = np.empty(trials)
    chunk = 2000
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        frames = awgn_matrix(rng, (stop - start, N), noise.noise_variance)
        stats[start:stop] = gof_za_batch(frames, noise)
    return float(np.quantile(stats, 1.0 - target_pf))


def gof_detect(frame: ComplexSignal, noise: NoiseModel, threshold: float) -> Decision:
    return _decide(float(gof_za_batch(frame.samples, noise)[0]), threshold)


# ---------------------------------------------------------------------------
# detector objects for the Monte-Carlo harness

class FrameDetector:
    """Single-frame statistic-vs-threshold detector."""

    name: str

    def __init__(self, noise: NoiseModel):
        self.noise = noise
        self.threshold = np.inf

    def samples_per_trial(self, N: int) -> int:
        return N

    def calibrate(self, N: int, target_pf: float, seed: int = 0, trials: int = 20000):
        raise NotImplementedError

    def scores(self, received: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decide(self, received: np.ndarray) -> np.ndarray:
        return self.scores(received) > self.threshold


class EnergyFrameDetector(FrameDetector):
    name = "energy"

    def calibrate(self, N, target_pf, seed=0, trials=20000):
        self.threshold = energy_threshold(self.noise, N, target_pf)

    def scores(self, received):
        return energy_batch(received)


class MmeFrameDetector(FrameDetector):
    name = "mme"

    def __init__(self, noise: NoiseModel, L: int = 10):
        super().__init__(noise)
        self.L = L
        self.cfg = None

    def prepare(self, N):
        self.cfg = SmoothingConfig.for_frame(N, L=self.L)

    def calibrate(self, N, target_pf, seed=0, trials=20000):
        self.prepare(N)
        self.threshold = calibrate_mme_gamma(self.cfg, self.noise, target_pf,
                                             trials=trials, seed=seed)

    def scores(self, received):
        if self.cfg is None:
            self.prepare(received.shape[1])
        return mme_ratio_batch(received, self.cfg)


class GofFrameDetector(FrameDetector):
    name = "gof"

    def calibrate(self, N, target_pf, seed=0, trials=20000):
        self.threshold = calibrate_gof_threshold(self.noise, N, target_pf,
                                                 trials=trials, seed=seed)

    def scores(self, received):
        return gof_za_batch(received, self.noise)


# ---------------------------------------------------------------------------
# Gaussian Naive Bayes

@dataclass
class GnbModel:
    """Per-class per-feature Gaussian model with floored variances."""

    means: np.ndarray        # (2, d)
    variances: np.ndarray    # (2, d)
    log_priors: np.ndarray   # (2,)
    variance_smoothing: float


def gnb_fit(features: np.ndarray, labels: np.ndarray,
            variance_smoothing: float = 1e-8) -> GnbModel:
    """Fit class-conditional normals; variances floored at
    variance_smoothing times the largest overall feature variance."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    if not np.array_equal(classes, [0, 1]):
        raise ValueError("gnb_fit needs samples from both classes (labels 0 and 1)")
    floor = variance_smoothing * float(features.var(axis=0).max())
    means = np.stack([features[labels == c].mean(axis=0) for c in (0, 1)])
    variances = np.stack([np.maximum(features[labels == c].var(axis=0), floor)
                          for c in (0, 1)])
    priors = np.array([np.mean(labels == c) for c in (0, 1)])
    return GnbModel(means, variances, np.log(priors), variance_smoothing)


def gnb_log_joint(model: GnbModel, features: np.ndarray) -> np.ndarray:
    """(B, 2) unnormalized class log-probabilities."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    out = np.empty((x.shape[0], 2))
    for c in (0, 1):
        mu, var = model.means[c], model.variances[c]
        ll = -0.5 * np.sum(np.log(2.0 * np.pi * var) + (x - mu) ** 2 / var, axis=1)
        out[:, c] = model.log_priors[c] + ll
    return out

def gnb_predict(model: GnbModel, features: np.ndarray) -> np.ndarray:
    """Normalized class posteriors, shape (B, 2) (or (2,) for one vector)."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    probs = _softmax(gnb_log_joint(model, x))
    return probs[0] if single else probs


# ---------------------------------------------------------------------------
# one-hidden-layer softmax network on per-frame features

@dataclass
class MlpModel:
    w1: np.ndarray    # (hidden, d)
    b1: np.ndarray
    w2: np.ndarray    # (2, hidden)
    b2: np.ndarray

    def arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]


def mlp_forward(model: MlpModel, features: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    hidden = np.tanh(x @ model.w1.T + model.b1)
    probs = _softmax(hidden @ model.w2.T + model.b2)
    return probs[0] if np.asarray(features).ndim == 1 else probs


def mlp_loss_and_gradients(model: MlpModel, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and analytic gradients for the per-frame network."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    b = x.shape[0]
    a1 = np.tanh(x @ model.w1.T + model.b1)
    probs = _softmax(a1 @ model.w2.T + model.b2)
    loss = float(-np.mean(np.log(np.clip(probs[np.arange(b), y], 1e-300, None))))
    dlogits = probs.copy()
    dlogits[np.arange(b), y] -= 1.0
    dlogits /= b
    gw2 = dlogits.T @ a1
    gb2 = dlogits.sum(axis=0)
    da1 = (dlogits @ model.w2) * (1.0 - a1 ** 2)
    gw1 = da1.T @ x
    gb1 = da1.sum(axis=0)
    return loss, [gw1, gb1, gw2, gb2]


def mlp_fit(features: np.ndarray, labels: np.ndarray, hidden: int = 25,
            hp: TrainHyperparams | None = None) -> MlpModel:
    """Train the per-frame network with the same optimizer defaults as the
    sequence classifier; 20 epochs by default."""
    hp = hp or TrainHyperparams(dropout_rate=0.0)
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    d = x.shape[1]
    rng = derive_rng(hp.seed, 0x3147)
    bound1 = np.sqrt(6.0 / (d + hidden))
    bound2 = np.sqrt(6.0 / (hidden + 2))
    model = MlpModel(rng.uniform(-bound1, bound1, (hidden, d)), np.zeros(hidden),
                     rng.uniform(-bound2, bound2, (2, hidden)), np.zeros(2))
    opt = AdamOptimizer(model.arrays(), hp)
    n = x.shape[0]
    for _ in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            idx = order[start:start + hp.batch_size]
            loss, grads = mlp_loss_and_gradients(model, x[idx], y[idx])
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss during MLP training: {loss}")
            opt.step(grads)
    return model
