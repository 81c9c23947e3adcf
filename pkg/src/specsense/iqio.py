"""IQ recording container and dataset persistence.

The IQ container is a minimal little-endian header (magic, version,
sample format, sample rate, center frequency, sample count) followed by
interleaved I/Q payload in either float32 or int16. Datasets persist as
a JSON manifest plus a packed float64 feature store with a CRC32.
"""

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .signals import ChannelConfig, ComplexSignal, Hypothesis
from .features import Normalizer
from .dataset import DatasetConfig, LabeledDataset, SequenceRecord

IQ_MAGIC = b"SPIQ"
IQ_VERSION = 1
_HEADER = struct.Struct("<4sHHddQ")       # magic, version, format, fs, fc, count
FORMAT_F32 = 0
FORMAT_I16 = 1
_FORMAT_NAMES = {"f32": FORMAT_F32, "i16": FORMAT_I16}

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
STORE_NAME = "features.bin"


class IqFormatError(ValueError):
    """Malformed or unsupported IQ container."""


class BadMagicError(IqFormatError):
    pass


class UnsupportedVersionError(IqFormatError):
    pass


class TruncatedPayloadError(IqFormatError):
    pass


class ChecksumError(ValueError):
    """Feature store bytes do not match the manifest CRC32."""


def write_iq(signal: ComplexSignal, path, fmt: str = "f32",
             center_freq_hz: float = 0.0) -> int:
    """Write the container; returns the clip count (i16 clips at +/-1.0)."""
    if fmt not in _FORMAT_NAMES:
        raise ValueError(f"unknown sample format {fmt!r}; use 'f32' or 'i16'")
    code = _FORMAT_NAMES[fmt]
    samples = signal.samples
    interleaved = np.empty(2 * samples.size, dtype=np.float64)
    interleaved[0::2] = samples.real
    interleaved[1::2] = samples.imag
    clips = 0
    if code == FORMAT_F32:
        payload = interleaved.astype("<f4").tobytes()
    else:
        clips = int(np.sum(np.abs(interleaved) > 1.0))
        scaled = np.clip(np.round(interleaved * 32768.0), -32768, 32767)
        payload = scaled.astype("<i2").tobytes()
    header = _HEADER.pack(IQ_MAGIC, IQ_VERSION, code, signal.sample_rate_hz,
                          center_freq_hz, samples.size)
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise OSError(f"failed writing IQ file {path}: {exc}") from exc
    return clips


def read_iq(path) -> ComplexSignal:
    """Read the container back; i16 payloads are scaled by 1/32768."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(
            f"{path}: file is {len(data)} bytes, header needs {_HEADER.size} (offset 0)")
    magic, version, code, fs, _fc, count = _HEADER.unpack_from(data)
    if magic != IQ_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != IQ_VERSION:
        raise UnsupportedVersionError(
            f"{path}: unsupported container version {version} at byte offset 4")
    if code not in (FORMAT_F32, FORMAT_I16):
        raise IqFormatError(f"{path}: unknown sample format code {code} at byte offset 6")
    item = 4 if code == FORMAT_F32 else 2
    expected = 2 * count * item
    actual = len(data) - _HEADER.size
    if actual != expected:
        raise TruncatedPayloadError(
            f"{path}: payload at byte offset {_HEADER.size} has {actual} bytes, "
            f"header promises {expected}")
    raw = data[_HEADER.size:]
    if code == FORMAT_F32:
        flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        flat = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return ComplexSignal(flat[0::2] + 1j * flat[1::2], fs)


def read_raw_f32(path, sample_rate_hz: float) -> ComplexSignal:
    """Headerless interleaved float32 import (external SDR tool recordings)."""
    raw = Path(path).read_bytes()
    if len(raw) == 0 or len(raw) % 8 != 0:
        raise IqFormatError(
            f"{path}: raw f32 payload must be a non-empty multiple of 8 bytes, got {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return ComplexSignal(flat[0::2] + 1j * flat[1::2], sample_rate_hz)


# ---------------------------------------------------------------------------
# dataset persistence

def _config_dict(cfg: DatasetConfig, channel: ChannelConfig) -> dict:
    return {
        "frame_len_N": cfg.frame_len_N,
        "seq_len_T": cfg.seq_len_T,
        "snr_grid_db": list(cfg.snr_grid_db),
        "instances_per_class": cfg.instances_per_class,
        "master_seed": cfg.master_seed,
        "split_ratios": list(cfg.split_ratios),
        "fm_message_hz": cfg.fm_message_hz,
        "fm_deviation_hz": cfg.fm_deviation_hz,
        "sample_rate_hz": cfg.sample_rate_hz,
        "smoothing_L": cfg.smoothing_L,
        "gain_h": channel.gain_h,
        "noise_variance": channel.noise_variance,
        "target_snr_db": channel.target_snr_db,
    }


def save_dataset(dataset: LabeledDataset, directory) -> None:
    """Manifest JSON plus packed float64 feature store with CRC32."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    chunks = []
    records = []
    offset = 0
    for split in ("train", "validation", "test"):
        for rec in dataset.split(split):
            flat = np.ascontiguousarray(rec.features, dtype="<f8").ravel()
            chunks.append(flat.tobytes())
            records.append({
                "split": split,
                "label": int(rec.label),
                "snr_db": rec.snr_db,
                "offset": offset,
                "length": flat.size,
            })
            offset += flat.size
    store = b"".join(chunks)
    manifest = {
        "version": MANIFEST_VERSION,
        "master_seed": dataset.config.master_seed,
        "config": _config_dict(dataset.config, dataset.channel),
        "normalizer": {
            "mean": [float(v) for v in dataset.normalizer.mean],
            "std": [float(v) for v in dataset.normalizer.std],
        },
        "crc32": zlib.crc32(store),
        "records": records,
    }
    (directory / STORE_NAME).write_bytes(store)
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_dataset(directory) -> LabeledDataset:
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    version = manifest.get("version")
    if version != MANIFEST_VERSION:
        raise ValueError(
            f"{directory}: manifest version {version} is not supported "
            f"(this build reads version {MANIFEST_VERSION})")
    store = (directory / STORE_NAME).read_bytes()
    if zlib.crc32(store) != manifest["crc32"]:
        raise ChecksumError(
            f"{directory}: feature store CRC32 mismatch "
            f"(expected {manifest['crc32']}, got {zlib.crc32(store)})")
    c = manifest["config"]
    cfg = DatasetConfig(
        frame_len_N=c["frame_len_N"], seq_len_T=c["seq_len_T"],
        snr_grid_db=tuple(c["snr_grid_db"]), instances_per_class=c["instances_per_class"],
        master_seed=c["master_seed"], split_ratios=tuple(c["split_ratios"]),
        fm_message_hz=c["fm_message_hz"], fm_deviation_hz=c["fm_deviation_hz"],
        sample_rate_hz=c["sample_rate_hz"], smoothing_L=c["smoothing_L"])
    channel = ChannelConfig(gain_h=c["gain_h"], noise_variance=c["noise_variance"],
                            target_snr_db=c["target_snr_db"])
    normalizer = Normalizer(np.array(manifest["normalizer"]["mean"]),
                            np.array(manifest["normalizer"]["std"]))
    flat = np.frombuffer(store, dtype="<f8")
    splits = {"train": [], "validation": [], "test": []}
    t = cfg.seq_len_T
    for rec in manifest["records"]:
        feats = flat[rec["offset"]:rec["offset"] + rec["length"]].reshape(t, 4).copy()
        splits[rec["split"]].append(
            SequenceRecord(feats, Hypothesis(rec["label"]), float(rec["snr_db"])))
    return LabeledDataset(splits["train"], splits["validation"], splits["test"],
                          normalizer, cfg, channel)
