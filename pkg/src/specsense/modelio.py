"""Versioned binary model container.

One container holds any of the trained models, distinguished by a kind
tag byte: the LSTM sequence classifier (gate matrices in a fixed order,
dense head, normalizer), the Gaussian Naive Bayes model, or the per-frame
MLP. All matrices are row-major little-endian float64.
"""

import struct
from pathlib import Path

import numpy as np

from .features import Normalizer
from .lstm import GATES, DenseHead, LstmParams, TrainedModel
from .baselines import GnbModel, MlpModel

MODEL_MAGIC = b"SPNN"
MODEL_VERSION = 1
KIND_LSTM = 0
KIND_GNB = 1
KIND_MLP = 2

_HEAD = struct.Struct("<4sHB")


class ModelFormatError(ValueError):
    pass


def _pack_arrays(arrays) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


class _Reader:
    def __init__(self, data: bytes, offset: int, path):
        self.data = data
        self.offset = offset
        self.path = path

    def take(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        end = self.offset + 8 * count
        if end > len(self.data):
            raise ModelFormatError(
                f"{self.path}: truncated model payload at byte offset {self.offset}")
        out = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.offset)
        self.offset = end
        return out.reshape(shape).copy()

    def take_u32(self) -> int:
        (val,) = struct.unpack_from("<I", self.data, self.offset)
        self.offset += 4
        return val


def save_lstm(model: TrainedModel, path) -> None:
    p = model.params
    blob = _HEAD.pack(MODEL_MAGIC, MODEL_VERSION, KIND_LSTM)
    blob += struct.pack("<II", p.input_dim, p.hidden_dim)
    blob += _pack_arrays(p.arrays() + model.head.arrays())
    norm = model.normalizer
    if norm is None:
        blob += struct.pack("<B", 0)
    else:
        blob += struct.pack("<B", 1) + _pack_arrays([norm.mean, norm.std])
    Path(path).write_bytes(blob)


def save_gnb(model: GnbModel, path) -> None:
    d = model.means.shape[1]
    blob = _HEAD.pack(MODEL_MAGIC, MODEL_VERSION, KIND_GNB)
    blob += struct.pack("<I", d)
    blob += _pack_arrays([model.means, model.variances, model.log_priors,
                          np.array([model.variance_smoothing])])
    Path(path).write_bytes(blob)


def save_mlp(model: MlpModel, path) -> None:
    hidden, d = model.w1.shape
    blob = _HEAD.pack(MODEL_MAGIC, MODEL_VERSION, KIND_MLP)
    blob += struct.pack("<II", d, hidden)
    blob += _pack_arrays(model.arrays())
    Path(path).write_bytes(blob)


def load_model(path):
    """Returns (kind, model) where kind is one of 'lstm', 'gnb', 'mlp'."""
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise ModelFormatError(f"{path}: file too short for a model header")
    magic, version, kind = _HEAD.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {version}")
    rd = _Reader(data, _HEAD.size, path)
    if kind == KIND_LSTM:
        i = rd.take_u32()
        h = rd.take_u32()
        params = LstmParams(i, h)
        for g in GATES:
            params.w_x[g] = rd.take((h, i))
            params.w_h[g] = rd.take((h, h))
            params.b[g] = rd.take((h,))
        head = DenseHead(rd.take((2, h)), rd.take((2,)))
        (has_norm,) = struct.unpack_from("<B", data, rd.offset)
        rd.offset += 1
        norm = None
        if has_norm:
            norm = Normalizer(rd.take((4,)), rd.take((4,)))
        return "lstm", TrainedModel(params, head, norm, training_log=[])
    if kind == KIND_GNB:
        d = rd.take_u32()
        return "gnb", GnbModel(rd.take((2, d)), rd.take((2, d)), rd.take((2,)),
                               float(rd.take((1,))[0]))
    if kind == KIND_MLP:
        d = rd.take_u32()
        hidden = rd.take_u32()
        return "mlp", MlpModel(rd.take((hidden, d)), rd.take((hidden,)),
                               rd.take((2, hidden)), rd.take((2,)))
    raise ModelFormatError(f"{path}: unknown model kind tag {kind}")
