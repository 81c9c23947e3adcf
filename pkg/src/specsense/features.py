"""The four detection statistics and feature-sequence assembly.

Per received frame of N samples the feature vector is
  u1 = energy, u2 = Gaussian log-likelihood ratio, u3 = goodness-of-fit
  statistic against the known noise CDF, u4 = max/min eigenvalue ratio of
  a smoothed sample covariance.
Batch variants (suffix ``_batch``) operate on an (F, N) frame matrix and
are what the dataset builder and Monte-Carlo harness call; the scalar
functions are thin wrappers over the same code paths.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr

from .signals import ComplexSignal

_CDF_CLAMP = 1e-12
_RATIO_CAP = 1e15


@dataclass(frozen=True)
class NoiseModel:
    """Known (or calibrated) total complex noise variance."""

    noise_variance: float

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError(f"noise_variance must be positive, got {self.noise_variance}")

    @classmethod
    def from_calibration(cls, noise_only: ComplexSignal) -> "NoiseModel":
        """Empirical variance from a noise-only calibration buffer."""
        return cls(float(np.mean(np.abs(noise_only.samples) ** 2)))


@dataclass(frozen=True)
class SmoothingConfig:
    """Covariance smoothing: L consecutive samples stacked per vector, M receivers."""

    L: int = 10
    M: int = 1
    Ns: int = 91

    def __post_init__(self):
        if self.L < 1 or self.M < 1 or self.Ns < 1:
            raise ValueError("L, M, Ns must all be positive")
        if self.Ns <= self.M * self.L:
            raise ValueError(
                f"Ns must exceed M*L (got Ns={self.Ns}, M*L={self.M * self.L}): "
                "the covariance estimate would be rank-deficient")

    @classmethod
    def for_frame(cls, frame_len: int, L: int = 10, M: int = 1) -> "SmoothingConfig":
        """Use every sample of an N-sample frame exactly once: Ns = N - L + 1."""
        return cls(L=L, M=M, Ns=frame_len - L + 1)


class SignalCovariance:
    """Hermitian PSD covariance of the primary-signal component.

    Backs the log-likelihood ratio; the solve against (cov + sigma^2 I) is
    Cholesky-factored once per noise variance and cached.
    """

    def __init__(self, matrix: np.ndarray, shrinkage_epsilon: float = 0.0):
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"covariance must be square, got shape {matrix.shape}")
        if shrinkage_epsilon < 0:
            raise ValueError("shrinkage_epsilon must be >= 0")
        herm_err = np.max(np.abs(matrix - matrix.conj().T)) if matrix.size else 0.0
        if herm_err > 1e-10:
            raise ValueError(f"covariance is not Hermitian (max deviation {herm_err:.3e})")
        matrix = 0.5 * (matrix + matrix.conj().T)
        if shrinkage_epsilon > 0:
            matrix = matrix + shrinkage_epsilon * np.eye(matrix.shape[0])
        eigs = np.linalg.eigvalsh(matrix)
        if eigs.size and eigs[0] < -1e-10:
            raise ValueError(f"covariance is not PSD (min eigenvalue {eigs[0]:.3e})")
        self.matrix = matrix
        self.shrinkage_epsilon = float(shrinkage_epsilon)
        self._llr_cache: dict[float, tuple] = {}

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_frames(cls, frames: np.ndarray, shrinkage_scale: float = 1e-6) -> "SignalCovariance":
        """Sample covariance of calibration frames plus trace-scaled shrinkage."""
        frames = np.asarray(frames, dtype=np.complex128)
        if frames.ndim != 2 or frames.shape[0] < 2:
            raise ValueError("need a (num_frames >= 2, frame_len) calibration matrix")
        cov = frames.conj().T @ frames / frames.shape[0]
        cov = 0.5 * (cov + cov.conj().T)
        eps = shrinkage_scale * float(np.real(np.trace(cov))) / cov.shape[0]
        return cls(cov, shrinkage_epsilon=eps)

    def _llr_kernel(self, noise_variance: float):
        """(constant term, Cholesky factor of cov + sigma^2 I) for the LLR."""
        key = float(noise_variance)
        if key not in self._llr_cache:
            n = self.dim
            c1 = self.matrix + key * np.eye(n)
            factor = cho_factor(c1, lower=True)
            # log det via the Cholesky diagonal; subtract the noise-only det
            logdet_c1 = 2.0 * float(np.sum(np.log(np.real(np.diag(factor[0])))))
            const = -(logdet_c1 - n * np.log(key))
            self._llr_cache[key] = (const, factor)
        return self._llr_cache[key]


@dataclass(frozen=True)
class Normalizer:
    """Per-feature z-score parameters fitted on training data."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        if mean.shape != (4,) or std.shape != (4,):
            raise ValueError("normalizer mean/std must each have 4 entries")
        if not np.all(std > 0):
            raise ValueError("normalizer standard deviations must be positive")

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std


@dataclass(frozen=True)
class FeatureContext:
    """Everything extract_sequence needs besides the samples."""

    sig_cov: SignalCovariance
    noise: NoiseModel
    smoothing: SmoothingConfig


# ---------------------------------------------------------------------------
# u1: energy

def energy_batch(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames)
    return np.sum(np.abs(frames) ** 2, axis=-1).astype(np.float64)


def energy(frame: ComplexSignal) -> float:
    """Sum of squared magnitudes over the frame."""
    return float(energy_batch(frame.samples))


# ---------------------------------------------------------------------------
# u2: log-likelihood ratio

def llr_batch(frames: np.ndarray, sig_cov: SignalCovariance, noise: NoiseModel) -> np.ndarray:
    frames = np.atleast_2d(np.asarray(frames, dtype=np.complex128))
    n = frames.shape[1]
    if n != sig_cov.dim:
        raise ValueError(f"frame length {n} does not match covariance dimension {sig_cov.dim}")
    const, factor = sig_cov._llr_kernel(noise.noise_variance)
    solved = cho_solve(factor, frames.T)                     # (n, F)
    quad_c1 = np.real(np.sum(frames.conj().T * solved, axis=0))
    quad_c0 = np.sum(np.abs(frames) ** 2, axis=1) / noise.noise_variance
    return const + quad_c0 - quad_c1


def llr(frame: ComplexSignal, sig_cov: SignalCovariance, noise: NoiseModel) -> float:
    """Gaussian log-likelihood ratio, positive-under-busy sign convention.

    L(y) = -log det(I + cov/sigma^2) + y* [sigma^-2 I - (cov + sigma^2 I)^-1] y
    """
    return float(llr_batch(frame.samples, sig_cov, noise)[0])


# ---------------------------------------------------------------------------
# u3: goodness-of-fit statistic

def za_statistic(values: np.ndarray) -> float:
    """Likelihood-weighted goodness-of-fit statistic of standardized reals.

    Z = -sum_i [ log F0(X(i)) / (n-i+1/2) + log(1-F0(X(i))) / (i-1/2) ]
    over the ascending order statistics X(1..n), F0 the standard normal CDF.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("za_statistic requires at least one value")
    return float(_za_rows(values[None, :])[0])


def _za_rows(rows: np.ndarray) -> np.ndarray:
    n = rows.shape[1]
    ordered = np.sort(rows, axis=1)
    # the upper-tail probability 1 - F0(x) is evaluated as F0(-x): exact for
    # the normal CDF, more accurate in the tail, and it makes negating every
    # sample a bitwise no-op (the per-order-statistic terms just permute,
    # and they are summed in sorted order below)
    p_lo = np.clip(ndtr(ordered), _CDF_CLAMP, 1.0)
    p_hi = np.clip(ndtr(-ordered), _CDF_CLAMP, 1.0)
    i = np.arange(1, n + 1, dtype=np.float64)
    terms = np.log(p_lo) / (n - i + 0.5) + np.log(p_hi) / (i - 0.5)
    return -np.sum(np.sort(terms, axis=1), axis=1)


def gof_za_batch(frames: np.ndarray, noise: NoiseModel) -> np.ndarray:
    frames = np.atleast_2d(np.asarray(frames, dtype=np.complex128))
    scale = np.sqrt(noise.noise_variance / 2.0)
    pooled = np.concatenate([frames.real, frames.imag], axis=1) / scale
    return _za_rows(pooled)


def gof_za(frame: ComplexSignal, noise: NoiseModel) -> float:
    """Goodness-of-fit statistic of the frame's pooled real/imag parts
    against the zero-mean Gaussian noise model."""
    return float(gof_za_batch(frame.samples, noise)[0])


# ---------------------------------------------------------------------------
# u4: max/min eigenvalue ratio

def smoothed_covariance_batch(frames: np.ndarray, cfg: SmoothingConfig) -> np.ndarray:
    """(F, ML, ML) smoothed sample covariances, exactly Hermitian."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.complex128))
    if cfg.M != 1:
        raise NotImplementedError("only the single-receiver case (M = 1) is implemented")
    need = cfg.L - 1 + cfg.Ns
    if frames.shape[1] < need:
        raise ValueError(
            f"need at least L-1+Ns = {need} samples per frame, got {frames.shape[1]}")
    # windows[f, k, :] = [x(k), ..., x(k+L-1)]; reverse to the stacked
    # [x(n), x(n-1), ..., x(n-L+1)] convention (eigenvalues are unaffected
    # by the permutation, the matrix layout is not)
    windows = sliding_window_view(frames, cfg.L, axis=1)[:, :cfg.Ns, ::-1]
    return np.einsum("fnl,fnm->flm", windows, windows.conj()) / cfg.Ns


def smoothed_covariance(signal: ComplexSignal, cfg: SmoothingConfig) -> np.ndarray:
    """Smoothed sample covariance R of one signal; Hermitian PSD, shape (ML, ML)."""
    return smoothed_covariance_batch(signal.samples, cfg)[0]


def eig_extremes_batch(frames: np.ndarray, cfg: SmoothingConfig) -> tuple[np.ndarray, np.ndarray]:
    """(lambda_min, lambda_max) of each frame's smoothed covariance."""
    eigs = np.linalg.eigvalsh(smoothed_covariance_batch(frames, cfg))
    return eigs[:, 0], eigs[:, -1]


def mme_ratio_batch(frames: np.ndarray, cfg: SmoothingConfig) -> np.ndarray:
    lam_min, lam_max = eig_extremes_batch(frames, cfg)
    guarded = np.maximum(lam_min, lam_max / _RATIO_CAP)
    return np.minimum(np.maximum(lam_max / guarded, 1.0), _RATIO_CAP)


def mme_ratio(signal: ComplexSignal, cfg: SmoothingConfig) -> float:
    """lambda_max / lambda_min of the smoothed covariance, capped at 1e15."""
    return float(mme_ratio_batch(signal.samples, cfg)[0])


def mme_asymptotic_bounds(noise: NoiseModel, cfg: SmoothingConfig) -> tuple[float, float]:
    """Large-Ns approximations of the extreme noise-covariance eigenvalues.

    lambda_max ~ (sigma^2/Ns)(sqrt(Ns)+sqrt(ML))^2,
    lambda_min ~ (sigma^2/Ns)(sqrt(Ns)-sqrt(ML))^2.
    """
    ml = cfg.M * cfg.L
    if cfg.Ns <= ml:
        raise ValueError(f"Ns must exceed ML for the asymptotic bounds (Ns={cfg.Ns}, ML={ml})")
    root_ns = np.sqrt(cfg.Ns)
    root_ml = np.sqrt(ml)
    scale = noise.noise_variance / cfg.Ns
    return (float(scale * (root_ns + root_ml) ** 2),
            float(scale * (root_ns - root_ml) ** 2))


# ---------------------------------------------------------------------------
# sequence assembly

def frame_features(frames: np.ndarray, ctx: FeatureContext) -> np.ndarray:
    """(F, 4) raw feature matrix for a batch of frames."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.complex128))
    u1 = energy_batch(frames)
    u2 = llr_batch(frames, ctx.sig_cov, ctx.noise)
    u3 = gof_za_batch(frames, ctx.noise)
    u4 = mme_ratio_batch(frames, ctx.smoothing)
    return np.stack([u1, u2, u3, u4], axis=1)


def extract_sequence(received: ComplexSignal, frame_len_N: int, seq_len_T: int,
                     sig_cov: SignalCovariance, noise: NoiseModel,
                     smoothing: SmoothingConfig,
                     normalizer: Normalizer | None = None) -> np.ndarray:
    """(T, 4) feature sequence from the first N*T samples of the received signal."""
    if frame_len_N < 1 or seq_len_T < 1:
        raise ValueError("frame_len_N and seq_len_T must be positive")
    need = frame_len_N * seq_len_T
    if len(received) < need:
        raise ValueError(f"need at least N*T = {need} samples, got {len(received)}")
    frames = received.samples[:need].reshape(seq_len_T, frame_len_N)
    feats = frame_features(frames, FeatureContext(sig_cov, noise, smoothing))
    if normalizer is not None:
        feats = normalizer.apply(feats)
    return feats


def fit_normalizer(training_sequences: list[np.ndarray], std_floor: float = 1e-9) -> Normalizer:
    """Per-feature mean/std over every timestep of every training sequence."""
    if not training_sequences:
        raise ValueError("no training sequences supplied")
    stacked = np.concatenate([np.atleast_2d(s) for s in training_sequences], axis=0)
    if stacked.shape[0] < 2:
        raise ValueError("need at least 2 feature vectors to fit a normalizer")
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), std_floor)
    return Normalizer(mean, std)
