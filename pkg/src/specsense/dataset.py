"""Balanced labeled dataset assembly for the sequence classifier.

One instance = T consecutive N-sample frames from a single received
signal; busy instances draw an SNR from the configured grid, idle
instances are noise only. Instances are split 70:15:15 by default and
the feature normalizer is fitted on the training split alone.
"""

from dataclasses import dataclass

import numpy as np

from . import seeding
from .seeding import derive_rng
from .signals import ChannelConfig, Hypothesis, awgn_matrix, snr_gain, synth_fm_batch
from .features import (
    FeatureContext,
    NoiseModel,
    Normalizer,
    SignalCovariance,
    SmoothingConfig,
    fit_normalizer,
    frame_features,
)

DEFAULT_SNR_GRID = tuple(range(-20, 1, 2))


@dataclass(frozen=True)
class DatasetConfig:
    frame_len_N: int = 100
    seq_len_T: int = 32
    snr_grid_db: tuple = DEFAULT_SNR_GRID
    instances_per_class: int = 200
    master_seed: int = 0
    split_ratios: tuple = (0.70, 0.15, 0.15)
    # primary-user tone parameters (constant-envelope FM at complex baseband)
    fm_message_hz: float = 1000.0
    fm_deviation_hz: float = 5000.0
    sample_rate_hz: float = 228000.0
    smoothing_L: int = 10

    def __post_init__(self):
        if self.frame_len_N < 1 or self.seq_len_T < 1:
            raise ValueError("frame_len_N and seq_len_T must be positive")
        if self.instances_per_class < 1:
            raise ValueError("instances_per_class must be >= 1")
        if len(self.snr_grid_db) == 0:
            raise ValueError("snr_grid_db must be non-empty")
        if len(self.split_ratios) != 3 or any(r <= 0 for r in self.split_ratios):
            raise ValueError("split_ratios must be three positive reals")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError(f"split_ratios must sum to 1, got {sum(self.split_ratios)}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "split_ratios", tuple(float(r) for r in self.split_ratios))

    def split_counts(self, per_class: int | None = None) -> tuple[int, int, int]:
        """(train, validation, test) instance counts per class."""
        n = self.instances_per_class if per_class is None else per_class
        n_train = int(np.floor(self.split_ratios[0] * n + 0.5))
        n_val = int(np.floor(self.split_ratios[1] * n + 0.5))
        n_val = min(n_val, n - n_train)
        return n_train, n_val, n - n_train - n_val


@dataclass(frozen=True)
class SequenceRecord:
    """One labeled feature sequence: (T, 4) features, class label, SNR tag.

    Idle records carry an SNR tag too (drawn from the same grid) so that
    per-SNR evaluation buckets contain both classes; it does not affect
    the noise-only samples themselves.
    """

    features: np.ndarray
    label: Hypothesis
    snr_db: float


@dataclass
class LabeledDataset:
    train: list
    validation: list
    test: list
    normalizer: Normalizer
    config: DatasetConfig
    channel: ChannelConfig

    def split(self, name: str) -> list:
        try:
            return {"train": self.train, "validation": self.validation, "test": self.test}[name]
        except KeyError:
            raise ValueError(f"unknown split {name!r}") from None

    def sequences_and_labels(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (B, T, 4) sequences and (B,) integer labels for a split."""
        records = self.split(name)
        x = np.stack([r.features for r in records])
        y = np.array([int(r.label) for r in records])
        return x, y

    def frames_and_labels(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Per-frame view: (B*T, 4) feature vectors with the sequence label repeated."""
        x, y = self.sequences_and_labels(name)
        t = x.shape[1]
        return x.reshape(-1, 4), np.repeat(y, t)


def default_feature_context(cfg: DatasetConfig, channel: ChannelConfig,
                            calib_frames: int = 256) -> FeatureContext:
    """Feature-extraction context used when the caller supplies none.

    The signal covariance is estimated from consecutive frames of one long
    clean (unit-power) primary waveform, with trace-scaled shrinkage; the
    noise variance is taken as known from the channel config.
    """
    rng = derive_rng(cfg.master_seed, seeding.ROLE_CALIBRATION)
    n = cfg.frame_len_N
    long_sig = synth_fm_batch(1, cfg.fm_message_hz, cfg.fm_deviation_hz,
                              cfg.sample_rate_hz, calib_frames * n, rng)[0]
    sig_cov = SignalCovariance.from_frames(long_sig.reshape(calib_frames, n))
    noise = NoiseModel(channel.noise_variance)
    smoothing = SmoothingConfig.for_frame(n, L=cfg.smoothing_L)
    return FeatureContext(sig_cov, noise, smoothing)


def _raw_instance_features(cfg: DatasetConfig, channel: ChannelConfig,
                           ctx: FeatureContext, label: Hypothesis, index: int) -> tuple[np.ndarray, float]:
    """Raw (T, 4) features plus the SNR tag for one instance."""
    num = cfg.frame_len_N * cfg.seq_len_T
    rng_snr = derive_rng(cfg.master_seed, int(label), index, seeding.ROLE_SNR)
    snr_db = float(rng_snr.choice(cfg.snr_grid_db))
    rng_noise = derive_rng(cfg.master_seed, int(label), index, seeding.ROLE_NOISE)
    received = awgn_matrix(rng_noise, (num,), channel.noise_variance)
    if label == Hypothesis.H1:
        rng_sig = derive_rng(cfg.master_seed, int(label), index, seeding.ROLE_SIGNAL)
        s = synth_fm_batch(1, cfg.fm_message_hz, cfg.fm_deviation_hz,
                           cfg.sample_rate_hz, num, rng_sig)[0]
        h = snr_gain(float(np.mean(np.abs(s) ** 2)), channel.noise_variance, snr_db)
        received = received + h * s
    frames = received.reshape(cfg.seq_len_T, cfg.frame_len_N)
    return frame_features(frames, ctx), snr_db


def make_dataset(cfg: DatasetConfig, channel: ChannelConfig,
                 ctx: FeatureContext | None = None) -> LabeledDataset:
    """Balanced H0/H1 feature-sequence dataset with disjoint splits.

    Per-instance RNG streams are derived from (master_seed, class, index,
    role), so generation order never affects the result.
    """
    if ctx is None:
        ctx = default_feature_context(cfg, channel)

    raw = {}   # (label, index) -> (features, snr_db)
    for label in (Hypothesis.H0, Hypothesis.H1):
        for k in range(cfg.instances_per_class):
            raw[(label, k)] = _raw_instance_features(cfg, channel, ctx, label, k)

    n_train, n_val, n_test = cfg.split_counts()
    bounds = (n_train, n_train + n_val, cfg.instances_per_class)

    train_feats = []
    for label in (Hypothesis.H0, Hypothesis.H1):
        for k in range(n_train):
            train_feats.append(raw[(label, k)][0])
    normalizer = fit_normalizer(train_feats)

    splits = {"train": [], "validation": [], "test": []}
    for label in (Hypothesis.H0, Hypothesis.H1):
        for k in range(cfg.instances_per_class):
            name = "train" if k < bounds[0] else ("validation" if k < bounds[1] else "test")
            feats, snr_db = raw[(label, k)]
            splits[name].append(SequenceRecord(normalizer.apply(feats), label, snr_db))

    return LabeledDataset(splits["train"], splits["validation"], splits["test"],
                          normalizer, cfg, channel)
