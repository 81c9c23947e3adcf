"""Detection-performance measurement: Pd/Pf, ROC curves, SNR sweeps,
classification accuracy, autocorrelation, and delimited output.

All Monte-Carlo trials draw from seed streams derived from a master seed
and the (detector, N, SNR) grid position, so sweeps are reproducible and
schedule-independent.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import derive_rng
from .signals import ComplexSignal, awgn_matrix, snr_gain, synth_fm_batch
from .features import FeatureContext, NoiseModel, frame_features
from .lstm import TrainedModel, forward

_CHUNK = 1000


@dataclass(frozen=True)
class FmTone(object):
    """Primary-user tone parameters shared by the Monte-Carlo generators."""

    message_freq_hz: float = 1000.0
    deviation_hz: float = 5000.0
    sample_rate_hz: float = 228000.0


@dataclass(frozen=True)
class RocPoint:
    pf: float
    pd: float
    threshold: float


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    N: int
    detector: str
    pd: float
    pf: float
    trials: int


@dataclass(frozen=True)
class AccuracyRow:
    model: str
    snr_db: float
    accuracy: float
    count: int


# ---------------------------------------------------------------------------
# trial generation

def h0_trials(batch: int, num_samples: int, noise_variance: float,
              rng: np.random.Generator) -> np.ndarray:
    return awgn_matrix(rng, (batch, num_samples), noise_variance)


def h1_trials(batch: int, num_samples: int, snr_db: float, noise_variance: float,
              tone: FmTone, rng: np.random.Generator) -> np.ndarray:
    s = synth_fm_batch(batch, tone.message_freq_hz, tone.deviation_hz,
                       tone.sample_rate_hz, num_samples, rng)
    h = snr_gain(1.0, noise_variance, snr_db)   # constant envelope: unit power
    return h * s + awgn_matrix(rng, (batch, num_samples), noise_variance)


# ---------------------------------------------------------------------------
# sequence-classifier detector adapter

class LstmSequenceDetector:
    """Wraps a trained sequence model as a threshold detector on the busy
    posterior; one trial = T consecutive N-sample frames."""

    name = "lstm"

    def __init__(self, model: TrainedModel, ctx: FeatureContext,
                 frame_len: int, seq_len: int):
        self.model = model
        self.ctx = ctx
        self.frame_len = frame_len
        self.seq_len = seq_len
        self.noise = ctx.noise
        self.threshold = 0.5

    def supports(self, N: int) -> bool:
        return N == self.frame_len

    def samples_per_trial(self, N: int) -> int:
        return N * self.seq_len

    def scores(self, received: np.ndarray) -> np.ndarray:
        b = received.shape[0]
        frames = received.reshape(b * self.seq_len, self.frame_len)
        feats = frame_features(frames, self.ctx)
        if self.model.normalizer is not None:
            feats = self.model.normalizer.apply(feats)
        sequences = feats.reshape(b, self.seq_len, 4)
        return forward(self.model.params, self.model.head, sequences)[:, 1]

    def decide(self, received: np.ndarray) -> np.ndarray:
        return self.scores(received) > self.threshold

    def calibrate(self, N, target_pf, seed=0, trials=2000):
        """Set the posterior threshold to the (1 - Pf) noise-only quantile."""
        if not self.supports(N):
            raise ValueError(f"model was trained at frame length {self.frame_len}, not {N}")
        rng = derive_rng(seed, 0x15F)
        scores = np.empty(trials)
        num = self.samples_per_trial(N)
        for start in range(0, trials, _CHUNK):
            stop = min(start + _CHUNK, trials)
            scores[start:stop] = self.scores(
                h0_trials(stop - start, num, self.noise.noise_variance, rng))
        self.threshold = float(np.quantile(scores, 1.0 - target_pf))


# ---------------------------------------------------------------------------
# Pd / Pf and ROC

def estimate_pd_pf(decide, h1_instances, h0_instances) -> tuple[float, float]:
    """Empirical (Pd, Pf): busy-declaration rates on busy and idle instances."""
    if len(h1_instances) == 0 or len(h0_instances) == 0:
        raise ValueError("both instance lists must be non-empty")
    pd = sum(bool(decide(inst)) for inst in h1_instances) / len(h1_instances)
    pf = sum(bool(decide(inst)) for inst in h0_instances) / len(h0_instances)
    return pd, pf


def roc_from_scores(h1_scores: np.ndarray, h0_scores: np.ndarray,
                    num_points: int = 101) -> list[RocPoint]:
    """ROC by sweeping thresholds over pooled score quantiles.

    Endpoints (0, 0) at +inf and (1, 1) at -inf are always included;
    points are ordered by decreasing threshold so pf and pd are
    non-decreasing along the curve.
    """
    if num_points < 2:
        raise ValueError("num_points must be >= 2")
    h1_scores = np.asarray(h1_scores, dtype=np.float64)
    h0_scores = np.asarray(h0_scores, dtype=np.float64)
    if h1_scores.size == 0 or h0_scores.size == 0:
        raise ValueError("both score sets must be non-empty")
    pooled = np.concatenate([h1_scores, h0_scores])
    qs = np.quantile(pooled, np.linspace(0.0, 1.0, num_points))
    thresholds = np.concatenate([[np.inf], np.unique(qs)[::-1], [-np.inf]])
    points = []
    for thr in thresholds:
        pd = float(np.mean(h1_scores > thr))
        pf = float(np.mean(h0_scores > thr))
        points.append(RocPoint(pf, pd, float(thr)))
    return points


def roc_curve(statistic, h1_instances, h0_instances, num_points: int = 101) -> list[RocPoint]:
    """ROC from a per-instance statistic callable."""
    if len(h1_instances) == 0 or len(h0_instances) == 0:
        raise ValueError("both instance lists must be non-empty")
    h1_scores = np.array([statistic(inst) for inst in h1_instances], dtype=np.float64)
    h0_scores = np.array([statistic(inst) for inst in h0_instances], dtype=np.float64)
    return roc_from_scores(h1_scores, h0_scores, num_points)


def detector_roc(detector, snr_db: float, N: int, instances_per_class: int,
                 noise: NoiseModel, tone: FmTone = FmTone(),
                 master_seed: int = 0, num_points: int = 101) -> list[RocPoint]:
    """Monte-Carlo ROC for one detector object at a fixed SNR."""
    num = detector.samples_per_trial(N)
    rng1 = derive_rng(master_seed, 0x0C1, 1)
    rng0 = derive_rng(master_seed, 0x0C1, 0)
    h1_scores = np.empty(instances_per_class)
    h0_scores = np.empty(instances_per_class)
    for start in range(0, instances_per_class, _CHUNK):
        stop = min(start + _CHUNK, instances_per_class)
        h1_scores[start:stop] = detector.scores(
            h1_trials(stop - start, num, snr_db, noise.noise_variance, tone, rng1))
        h0_scores[start:stop] = detector.scores(
            h0_trials(stop - start, num, noise.noise_variance, rng0))
    return roc_from_scores(h1_scores, h0_scores, num_points)


# ---------------------------------------------------------------------------
# Pd-vs-SNR sweep

def snr_sweep(detectors: list, snr_grid_db, N_values, trials: int, master_seed: int,
              noise: NoiseModel, tone: FmTone = FmTone(),
              target_pf: float = 0.1) -> list[SweepRow]:
    """Monte-Carlo Pd at the Pf-calibrated threshold over an (SNR, N) grid.

    Detectors exposing supports(N) are skipped for unsupported frame
    lengths (a sequence model is bound to its trained N).
    """
    if len(snr_grid_db) == 0 or len(N_values) == 0:
        raise ValueError("snr_grid_db and N_values must be non-empty")
    if trials < 100:
        raise ValueError(f"trials must be >= 100, got {trials}")
    rows = []
    for d_idx, det in enumerate(detectors):
        for n_idx, n in enumerate(N_values):
            if hasattr(det, "supports") and not det.supports(n):
                continue
            cal_seed = int(derive_rng(master_seed, d_idx, n_idx, 0xCA1).integers(2**63))
            det.calibrate(n, target_pf, seed=cal_seed)
            num = det.samples_per_trial(n)
            for s_idx, snr_db in enumerate(snr_grid_db):
                rng1 = derive_rng(master_seed, d_idx, n_idx, s_idx, 1)
                rng0 = derive_rng(master_seed, d_idx, n_idx, s_idx, 0)
                det_h1 = 0
                det_h0 = 0
                for start in range(0, trials, _CHUNK):
                    stop = min(start + _CHUNK, trials)
                    det_h1 += int(np.sum(det.decide(
                        h1_trials(stop - start, num, snr_db, noise.noise_variance, tone, rng1))))
                    det_h0 += int(np.sum(det.decide(
                        h0_trials(stop - start, num, noise.noise_variance, rng0))))
                rows.append(SweepRow(float(snr_db), int(n), det.name,
                                     det_h1 / trials, det_h0 / trials, trials))
    return rows


# ---------------------------------------------------------------------------
# autocorrelation and accuracy

def autocorrelation(signal: ComplexSignal, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation magnitudes rho(0..max_lag)."""
    x = signal.samples
    if max_lag >= x.size:
        raise ValueError(f"max_lag must be < signal length ({x.size}), got {max_lag}")
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    denom = float(np.sum(np.abs(x) ** 2))
    rho = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        rho[k] = np.abs(np.sum(x[k:] * np.conj(x[:x.size - k]))) / denom
    return rho


def accuracy_table(models: list, records: list) -> list[AccuracyRow]:
    """Per-model per-SNR classification accuracy.

    `models` is a list of (name, classify) pairs where classify maps one
    SequenceRecord to (num_correct, num_trials); a per-frame baseline
    counts every frame, the sequence classifier counts one.
    """
    if not records:
        raise ValueError("no evaluation records supplied")
    by_snr = {}
    for rec in records:
        by_snr.setdefault(rec.snr_db, []).append(rec)
    rows = []
    for name, classify in models:
        for snr_db in sorted(by_snr):
            bucket = by_snr[snr_db]
            correct = 0
            total = 0
            for rec in bucket:
                c, t = classify(rec)
                correct += c
                total += t
            rows.append(AccuracyRow(name, float(snr_db), correct / total, total))
    return rows


# ---------------------------------------------------------------------------
# delimited output

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


_SCHEMAS = {
    RocPoint: ("threshold,pf,pd", lambda p: (p.threshold, p.pf, p.pd)),
    SweepRow: ("snr_db,N,detector,pd,pf,trials",
               lambda r: (r.snr_db, r.N, r.detector, r.pd, r.pf, r.trials)),
    AccuracyRow: ("model,snr_db,accuracy,count",
                  lambda r: (r.model, r.snr_db, r.accuracy, r.count)),
}


def _curves(table) -> dict:
    """Two-column (x, y) series per curve for the gnuplot variant."""
    if not table:
        return {}
    first = table[0]
    if isinstance(first, RocPoint):
        return {"": [(p.pf, p.pd) for p in table]}
    if isinstance(first, SweepRow):
        out = {}
        for r in table:
            out.setdefault(f"_{r.detector}_N{r.N}", []).append((r.snr_db, r.pd))
        return out
    if isinstance(first, AccuracyRow):
        out = {}
        for r in table:
            out.setdefault(f"_{r.model}", []).append((r.snr_db, r.accuracy))
        return out
    return {}


def write_results(table: list, path, kind: type | None = None) -> None:
    """CSV with a fixed header plus gnuplot-style two-column .dat variants.

    `kind` names the row type for an empty table (header-only output).
    """
    path = Path(path)
    row_type = kind if kind is not None else (type(table[0]) if table else None)
    if row_type is None:
        raise ValueError("cannot infer the table type of an empty table; pass kind=")
    if row_type not in _SCHEMAS and row_type is not tuple:
        raise ValueError(f"unsupported table row type {row_type!r}")
    try:
        if row_type is tuple:      # generic (lag, rho)-style two-column table
            header, extract = "lag,rho", lambda r: r
        else:
            header, extract = _SCHEMAS[row_type]
        with open(path, "w", newline="\n") as fh:
            fh.write(header + "\n")
            for row in table:
                fh.write(",".join(_fmt(v) for v in extract(row)) + "\n")
        for suffix, series in _curves(table).items():
            dat = path.with_name(path.stem + suffix + ".dat")
            with open(dat, "w", newline="\n") as fh:
                for x, y in series:
                    fh.write(f"{_fmt(x)} {_fmt(y)}\n")
    except OSError as exc:
        raise OSError(f"failed writing results to {path}: {exc}") from exc


def write_acf(rho: np.ndarray, path) -> None:
    """lag,rho CSV plus the two-column variant."""
    table = [(int(k), float(r)) for k, r in enumerate(rho)]
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write("lag,rho\n")
        for lag, r in table:
            fh.write(f"{lag},{_fmt(r)}\n")
    with open(path.with_suffix(".dat"), "w", newline="\n") as fh:
        for lag, r in table:
            fh.write(f"{lag} {_fmt(r)}\n")


def read_table(path, row_type: type) -> list:
    """Parse a CSV written by write_results back into row objects."""
    header, _ = _SCHEMAS[row_type]
    fields = header.split(",")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != fields:
            raise ValueError(f"unexpected header in {path}: {reader.fieldnames}")
        for rec in reader:
            if row_type is RocPoint:
                rows.append(RocPoint(float(rec["pf"]), float(rec["pd"]), float(rec["threshold"])))
            elif row_type is SweepRow:
                rows.append(SweepRow(float(rec["snr_db"]), int(rec["N"]), rec["detector"],
                                     float(rec["pd"]), float(rec["pf"]), int(rec["trials"])))
            else:
                rows.append(AccuracyRow(rec["model"], float(rec["snr_db"]),
                                        float(rec["accuracy"]), int(rec["count"])))
    return rows
