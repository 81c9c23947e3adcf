"""Spectrum sensing toolkit.

Busy/idle channel classification from complex baseband samples: four
classical detection statistics (energy, log-likelihood ratio, a
likelihood-based goodness-of-fit statistic, and the max/min eigenvalue
ratio of a smoothed sample covariance) feed either threshold detectors
or an LSTM sequence classifier trained from scratch.
"""

from .signals import ComplexSignal, ChannelConfig, Hypothesis, synth_fm, synth_bpsk, synth_awgn, apply_channel
from .features import (
    NoiseModel,
    SignalCovariance,
    SmoothingConfig,
    Normalizer,
    FeatureContext,
    energy,
    llr,
    gof_za,
    za_statistic,
    smoothed_covariance,
    mme_ratio,
    mme_asymptotic_bounds,
    extract_sequence,
    fit_normalizer,
)
from .dataset import DatasetConfig, SequenceRecord, LabeledDataset, make_dataset
from .lstm import LstmParams, DenseHead, TrainHyperparams, TrainedModel, param_count, lstm_step, forward, train, grad_check

__all__ = [
    "ComplexSignal", "ChannelConfig", "Hypothesis",
    "synth_fm", "synth_bpsk", "synth_awgn", "apply_channel",
    "NoiseModel", "SignalCovariance", "SmoothingConfig", "Normalizer", "FeatureContext",
    "energy", "llr", "gof_za", "za_statistic", "smoothed_covariance",
    "mme_ratio", "mme_asymptotic_bounds", "extract_sequence", "fit_normalizer",
    "DatasetConfig", "SequenceRecord", "LabeledDataset", "make_dataset",
    "LstmParams", "DenseHead", "TrainHyperparams", "TrainedModel",
    "param_count", "lstm_step", "forward", "train", "grad_check",
]

__version__ = "0.1.0"
