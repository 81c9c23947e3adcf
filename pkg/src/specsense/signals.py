"""Primary-user signal synthesis, AWGN, and SNR-calibrated channels.

The received frame under the busy hypothesis is h'*s(n) + w(n) where s is
a constant-envelope FM (or BPSK) waveform, w is circularly-symmetric
complex white Gaussian noise, and h' is a real gain chosen so the
signal-component power hits a target SNR against the noise variance.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .seeding import derive_rng


class Hypothesis(IntEnum):
    """Channel state label: idle (noise only) or busy (signal present)."""

    H0 = 0
    H1 = 1


@dataclass(frozen=True)
class ComplexSignal:
    """A finite run of complex baseband samples with its sample rate."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("ComplexSignal.samples must be a non-empty 1-D array")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    def __len__(self):
        return self.samples.size

    def power(self) -> float:
        """Mean squared magnitude."""
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class ChannelConfig:
    """Scalar-gain AWGN channel with an SNR calibration target.

    noise_variance is the total complex variance (real and imaginary parts
    each carry half of it).
    """

    gain_h: float = 1.0
    noise_variance: float = 1.0
    target_snr_db: float = 0.0

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError(f"noise_variance must be positive, got {self.noise_variance}")
        if not self.gain_h > 0:
            raise ValueError(f"gain_h must be positive, got {self.gain_h}")


def synth_fm(message_freq_hz: float, deviation_hz: float, sample_rate_hz: float,
             num_samples: int, seed: int,
             initial_phase: float | None = None) -> ComplexSignal:
    """Single-tone FM at complex baseband with a seeded random initial phase.

    s(n) = exp(j*phi(n)),  phi(n) = phi0 + 2*pi*dev*cumsum(sin(2*pi*fm*n/fs))/fs.
    Constant envelope: |s(n)| = 1 exactly.  Pass initial_phase to pin phi0
    instead of drawing it from the seeded stream.
    """
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    if not (deviation_hz > 0 and sample_rate_hz > 0):
        raise ValueError("deviation_hz and sample_rate_hz must be positive")
    if not 0 < message_freq_hz < sample_rate_hz / 2:
        raise ValueError(
            f"message_freq_hz must lie in (0, Nyquist={sample_rate_hz / 2}), got {message_freq_hz}")
    if initial_phase is None:
        rng = derive_rng(seed)
        phi0 = rng.uniform(0.0, 2.0 * np.pi)
    else:
        phi0 = float(initial_phase)
    n = np.arange(num_samples)
    message = np.sin(2.0 * np.pi * message_freq_hz * n / sample_rate_hz)
    phase = phi0 + 2.0 * np.pi * deviation_hz * np.cumsum(message) / sample_rate_hz
    return ComplexSignal(np.exp(1j * phase), sample_rate_hz)


def synth_fm_batch(batch: int, message_freq_hz: float, deviation_hz: float,
                   sample_rate_hz: float, num_samples: int,
                   rng: np.random.Generator) -> np.ndarray:
    """(batch, num_samples) matrix of FM trials differing only in initial phase.

    The tone's phase trajectory is shared, so each trial is a global phase
    rotation of one template -- exactly what per-trial synth_fm draws produce,
    minus the per-call cumsum.
    """
    n = np.arange(num_samples)
    message = np.sin(2.0 * np.pi * message_freq_hz * n / sample_rate_hz)
    phase = 2.0 * np.pi * deviation_hz * np.cumsum(message) / sample_rate_hz
    template = np.exp(1j * phase)
    phi0 = rng.uniform(0.0, 2.0 * np.pi, size=batch)
    return np.exp(1j * phi0)[:, None] * template[None, :]


def synth_bpsk(symbol_rate_hz: float, sample_rate_hz: float, num_samples: int,
               seed: int) -> ComplexSignal:
    """Rectangular-pulse BPSK, unit power; alternative primary-user source."""
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    if not 0 < symbol_rate_hz <= sample_rate_hz:
        raise ValueError("symbol_rate_hz must lie in (0, sample_rate_hz]")
    sps = max(1, int(round(sample_rate_hz / symbol_rate_hz)))
    rng = derive_rng(seed)
    num_symbols = num_samples // sps + 1
    symbols = rng.choice([-1.0, 1.0], size=num_symbols)
    samples = np.repeat(symbols, sps)[:num_samples].astype(np.complex128)
    return ComplexSignal(samples, sample_rate_hz)


def synth_awgn(noise_variance: float, num_samples: int, seed: int) -> ComplexSignal:
    """Circularly-symmetric complex white Gaussian noise, total variance as given."""
    if noise_variance < 0:
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    rng = derive_rng(seed)
    samples = awgn_matrix(rng, (num_samples,), noise_variance)
    return ComplexSignal(samples, 1.0)


def awgn_matrix(rng: np.random.Generator, shape, noise_variance: float) -> np.ndarray:
    """Complex AWGN array of the given shape; E[|w|^2] = noise_variance."""
    sigma = np.sqrt(noise_variance / 2.0)
    return sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def snr_gain(signal_power: float, noise_variance: float, target_snr_db: float) -> float:
    """Real gain h' that scales a signal of the given power to the target SNR."""
    if not signal_power > 0:
        raise ValueError("signal power must be positive to calibrate SNR")
    target_lin = 10.0 ** (target_snr_db / 10.0)
    return float(np.sqrt(target_lin * noise_variance / signal_power))


def apply_channel(signal: ComplexSignal, cfg: ChannelConfig, seed: int) -> ComplexSignal:
    """Received frame h'*s(n) + w(n) with h' calibrated to cfg.target_snr_db."""
    p = signal.power()
    if p == 0.0:
        raise ValueError("all-zero signal: SNR calibration is undefined")
    h = snr_gain(p, cfg.noise_variance, cfg.target_snr_db)
    rng = derive_rng(seed)
    noise = awgn_matrix(rng, signal.samples.shape, cfg.noise_variance)
    return ComplexSignal(h * signal.samples + noise, signal.sample_rate_hz)
