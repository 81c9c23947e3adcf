"""From-scratch LSTM busy/idle sequence classifier.

Single LSTM layer (forget/input/output gates, tanh candidate), a 2-way
dense softmax head on the last timestep's output, cross-entropy loss,
gradients by full backpropagation through time, Adam updates, and
validation-accuracy model selection. Everything is double-precision
numpy; no autodiff framework.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .seeding import derive_rng
from .features import Normalizer

GATES = ("f", "g", "i", "o")      # forget, candidate, input, output


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


def param_count(h: int, i: int) -> int:
    """Number of trainable scalars in the LSTM layer: 4(h*i + h + h^2)."""
    if h < 1 or i < 1:
        raise ValueError("h and i must be >= 1")
    return 4 * (h * i + h + h * h)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmParams:
    """Gate weights: per gate an input matrix (h, i), a recurrent matrix (h, h)
    and a bias (h)."""

    input_dim: int
    hidden_dim: int
    w_x: dict = field(default_factory=dict)
    w_h: dict = field(default_factory=dict)
    b: dict = field(default_factory=dict)

    @classmethod
    def init(cls, hidden_dim: int, input_dim: int, rng: np.random.Generator,
             forget_bias: float = 1.0) -> "LstmParams":
        """Glorot-uniform weights, zero biases except the forget-gate bias."""
        p = cls(input_dim, hidden_dim)
        for g in GATES:
            bound_x = np.sqrt(6.0 / (input_dim + hidden_dim))
            bound_h = np.sqrt(6.0 / (2 * hidden_dim))
            p.w_x[g] = rng.uniform(-bound_x, bound_x, size=(hidden_dim, input_dim))
            p.w_h[g] = rng.uniform(-bound_h, bound_h, size=(hidden_dim, hidden_dim))
            p.b[g] = np.zeros(hidden_dim)
        p.b["f"] = np.full(hidden_dim, forget_bias)
        return p

    def scalar_count(self) -> int:
        return sum(a.size for a in self.arrays())

    def arrays(self) -> list:
        """Flat list of parameter arrays in the fixed serialization order."""
        out = []
        for g in GATES:
            out += [self.w_x[g], self.w_h[g], self.b[g]]
        return out


@dataclass
class DenseHead:
    """2-way linear head; softmax applied downstream."""

    weights: np.ndarray   # (2, h)
    biases: np.ndarray    # (2,)

    @classmethod
    def init(cls, hidden_dim: int, rng: np.random.Generator) -> "DenseHead":
        bound = np.sqrt(6.0 / (hidden_dim + 2))
        return cls(rng.uniform(-bound, bound, size=(2, hidden_dim)), np.zeros(2))

    def arrays(self) -> list:
        return [self.weights, self.biases]


@dataclass(frozen=True)
class LstmState:
    """Cell state and output of the LSTM layer at one timestep."""

    cell: np.ndarray
    output: np.ndarray


@dataclass(frozen=True)
class TrainHyperparams:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    dropout_rate: float = 0.1
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass
class TrainedModel:
    params: LstmParams
    head: DenseHead
    normalizer: Normalizer | None
    training_log: list    # per-epoch (train_loss, validation_accuracy)
    best_epoch: int = 0


# ---------------------------------------------------------------------------
# forward pass

def lstm_step(params: LstmParams, x_t: np.ndarray, prev: LstmState) -> LstmState:
    """One recurrence step.

    f = sig(Wfx x + Wfh h' + bf), g = tanh(Wgx x + Wgh h' + bg),
    i = sig(Wix x + Wih h' + bi), s = f*s' + i*g,
    o = sig(Wox x + Woh h' + bo), h = o*tanh(s).
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != params.input_dim:
        raise ValueError(f"input has dimension {x_t.shape[-1]}, expected {params.input_dim}")
    z = {g: x_t @ params.w_x[g].T + prev.output @ params.w_h[g].T + params.b[g] for g in GATES}
    f = _sigmoid(z["f"])
    g = np.tanh(z["g"])
    i = _sigmoid(z["i"])
    s = f * prev.cell + i * g
    o = _sigmoid(z["o"])
    return LstmState(cell=s, output=o * np.tanh(s))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _run_sequence_batch(params: LstmParams, x: np.ndarray, keep_cache: bool):
    """Forward over (B, T, i); returns final output (B, h) and the BPTT cache."""
    b, t, _ = x.shape
    h_t = np.zeros((b, params.hidden_dim))
    s_t = np.zeros((b, params.hidden_dim))
    cache = [] if keep_cache else None
    for k in range(t):
        x_k = x[:, k, :]
        z = {g: x_k @ params.w_x[g].T + h_t @ params.w_h[g].T + params.b[g] for g in GATES}
        f = _sigmoid(z["f"])
        g = np.tanh(z["g"])
        i = _sigmoid(z["i"])
        s_prev = s_t
        s_t = f * s_prev + i * g
        o = _sigmoid(z["o"])
        tanh_s = np.tanh(s_t)
        h_prev = h_t
        h_t = o * tanh_s
        if keep_cache:
            cache.append((x_k, h_prev, s_prev, f, g, i, o, tanh_s))
    return h_t, s_t, cache


def forward(params: LstmParams, head: DenseHead, seq: np.ndarray,
            dropout_rate: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Class posterior (d_H0, d_H1) for one sequence or a (B, T, i) batch.

    Inverted dropout is applied to the final hidden output only when an rng
    is supplied (training mode); inference is deterministic.
    """
    seq = np.asarray(seq, dtype=np.float64)
    single = seq.ndim == 2
    x = seq[None, ...] if single else seq
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"sequence feature dimension {x.shape[-1]} != {params.input_dim}")
    h_t, _, _ = _run_sequence_batch(params, x, keep_cache=False)
    if rng is not None and dropout_rate > 0.0:
        mask = (rng.random(h_t.shape) >= dropout_rate) / (1.0 - dropout_rate)
        h_t = h_t * mask
    probs = _softmax(h_t @ head.weights.T + head.biases)
    return probs[0] if single else probs


def posterior_h1(params: LstmParams, head: DenseHead, sequences: np.ndarray) -> np.ndarray:
    """Busy-class posterior for a (B, T, i) batch, inference mode."""
    return forward(params, head, sequences)[..., 1]


# ---------------------------------------------------------------------------
# loss and gradients

def _zero_grads(params: LstmParams, head: DenseHead):
    gp = LstmParams(params.input_dim, params.hidden_dim)
    for g in GATES:
        gp.w_x[g] = np.zeros_like(params.w_x[g])
        gp.w_h[g] = np.zeros_like(params.w_h[g])
        gp.b[g] = np.zeros_like(params.b[g])
    gh = DenseHead(np.zeros_like(head.weights), np.zeros_like(head.biases))
    return gp, gh


def loss_and_gradients(params: LstmParams, head: DenseHead, x: np.ndarray, y: np.ndarray,
                       dropout_rate: float = 0.0,
                       rng: np.random.Generator | None = None):
    """Mean cross-entropy over a batch and its full-BPTT gradients.

    x: (B, T, i) feature sequences, y: (B,) integer labels in {0, 1}.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 3 or x.shape[0] == 0:
        raise ValueError("batch must be a non-empty (B, T, i) array")
    b, t, _ = x.shape

    h_last, _, cache = _run_sequence_batch(params, x, keep_cache=True)
    if rng is not None and dropout_rate > 0.0:
        mask = (rng.random(h_last.shape) >= dropout_rate) / (1.0 - dropout_rate)
    else:
        mask = np.ones_like(h_last)
    h_drop = h_last * mask
    logits = h_drop @ head.weights.T + head.biases
    probs = _softmax(logits)
    true_p = np.clip(probs[np.arange(b), y], 1e-300, None)
    loss = float(-np.mean(np.log(true_p)))

    gp, gh = _zero_grads(params, head)
    dlogits = probs.copy()
    dlogits[np.arange(b), y] -= 1.0
    dlogits /= b
    gh.weights[:] = dlogits.T @ h_drop
    gh.biases[:] = dlogits.sum(axis=0)

    dh = (dlogits @ head.weights) * mask
    ds_next = np.zeros_like(dh)
    for k in range(t - 1, -1, -1):
        x_k, h_prev, s_prev, f, g, i, o, tanh_s = cache[k]
        do = dh * tanh_s
        ds = dh * o * (1.0 - tanh_s ** 2) + ds_next
        dz = {
            "o": do * o * (1.0 - o),
            "f": ds * s_prev * f * (1.0 - f),
            "i": ds * g * i * (1.0 - i),
            "g": ds * i * (1.0 - g ** 2),
        }
        dh = np.zeros_like(dh)
        for gate in GATES:
            gp.w_x[gate] += dz[gate].T @ x_k
            gp.w_h[gate] += dz[gate].T @ h_prev
            gp.b[gate] += dz[gate].sum(axis=0)
            dh += dz[gate] @ params.w_h[gate]
        ds_next = ds * f
    return loss, gp, gh


# ---------------------------------------------------------------------------
# optimization

class AdamOptimizer:
    """Adam over the flat list of parameter arrays."""

    def __init__(self, arrays: list, hp: TrainHyperparams):
        self.arrays = arrays
        self.hp = hp
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, grads: list):
        hp = self.hp
        self.t += 1
        b1c = 1.0 - hp.adam_beta1 ** self.t
        b2c = 1.0 - hp.adam_beta2 ** self.t
        for a, g, m, v in zip(self.arrays, grads, self.m, self.v):
            m *= hp.adam_beta1
            m += (1.0 - hp.adam_beta1) * g
            v *= hp.adam_beta2
            v += (1.0 - hp.adam_beta2) * g * g
            a -= hp.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + hp.adam_eps)


def accuracy(params: LstmParams, head: DenseHead, x: np.ndarray, y: np.ndarray) -> float:
    """Fraction of sequences whose argmax posterior matches the label."""
    probs = forward(params, head, x)
    return float(np.mean(np.argmax(probs, axis=1) == y))


def train(dataset, hp: TrainHyperparams | None = None,
          hidden_dim: int = 25) -> TrainedModel:
    """Mini-batch Adam training with validation-accuracy model selection.

    `dataset` is a LabeledDataset with non-empty train and validation
    splits; the returned model carries the parameters of the best epoch
    and the dataset's normalizer.
    """
    hp = hp or TrainHyperparams()
    x_train, y_train = dataset.sequences_and_labels("train")
    x_val, y_val = dataset.sequences_and_labels("validation")
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("train and validation splits must both be non-empty")
    input_dim = x_train.shape[-1]

    rng = derive_rng(hp.seed, 0xA11)
    params = LstmParams.init(hidden_dim, input_dim, rng)
    head = DenseHead.init(hidden_dim, rng)
    opt = AdamOptimizer(params.arrays() + head.arrays(), hp)

    log = []
    best = (-1.0, 0, None, None)
    n = x_train.shape[0]
    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, hp.batch_size):
            idx = order[start:start + hp.batch_size]
            loss, gp, gh = loss_and_gradients(params, head, x_train[idx], y_train[idx],
                                              hp.dropout_rate, rng)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch + 1}, batch {batches + 1}: {loss}")
            opt.step(gp.arrays() + gh.arrays())
            epoch_loss += loss
            batches += 1
        val_acc = accuracy(params, head, x_val, y_val)
        log.append((epoch_loss / batches, val_acc))
        if val_acc > best[0]:
            best = (val_acc, epoch, copy.deepcopy(params), copy.deepcopy(head))

    _, best_epoch, best_params, best_head = best
    return TrainedModel(best_params, best_head, getattr(dataset, "normalizer", None),
                        log, best_epoch)


# ---------------------------------------------------------------------------
# gradient verification

def _flatten(arrays):
    return np.concatenate([a.ravel() for a in arrays])


def grad_check(hidden_dim: int = 4, input_dim: int = 4, seq_len: int = 5,
               batch: int = 3, seed: int = 0, eps: float = 1e-5) -> float:
    """Max relative error between BPTT and central finite differences."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    rng = derive_rng(seed, 0xFD)
    params = LstmParams.init(hidden_dim, input_dim, rng)
    head = DenseHead.init(hidden_dim, rng)
    x = rng.standard_normal((batch, seq_len, input_dim))
    y = rng.integers(0, 2, size=batch)

    _, gp, gh = loss_and_gradients(params, head, x, y)
    analytic = _flatten(gp.arrays() + gh.arrays())

    arrays = params.arrays() + head.arrays()
    numeric = np.empty_like(analytic)
    pos = 0
    for a in arrays:
        flat = a.ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            lp, _, _ = loss_and_gradients(params, head, x, y)
            flat[j] = orig - eps
            lm, _, _ = loss_and_gradients(params, head, x, y)
            flat[j] = orig
            numeric[pos] = (lp - lm) / (2.0 * eps)
            pos += 1
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
