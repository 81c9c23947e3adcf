"""Declarative run configuration.

One TOML file is the source of truth for a run; command-line --set
overrides and the SPECSENSE_SEED environment variable are applied on
top, and the fully-resolved config is echoed into the output directory.
"""

import copy
import os
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:          # Python < 3.11
    import tomli as tomllib

from .dataset import DatasetConfig
from .signals import ChannelConfig
from .lstm import TrainHyperparams
from .evaluate import FmTone

SEED_ENV_VAR = "SPECSENSE_SEED"

DEFAULTS = {
    "master_seed": 0,
    "dataset": {
        "frame_len_n": 100,
        "seq_len_t": 32,
        "snr_grid_db": list(range(-20, 1, 2)),
        "instances_per_class": 200,
        "split_ratios": [0.70, 0.15, 0.15],
        "fm_message_hz": 1000.0,
        "fm_deviation_hz": 5000.0,
        "sample_rate_hz": 228000.0,
        "smoothing_l": 10,
    },
    "channel": {
        "noise_variance": 1.0,
        "gain_h": 1.0,
    },
    "train": {
        "epochs": 20,
        "batch_size": 64,
        "learning_rate": 1e-3,
        "dropout_rate": 0.1,
        "hidden_dim": 25,
        "seed": 0,
        "baselines": True,
        "mlp_hidden": 25,
    },
    "eval": {
        "snr_grid_db": list(range(-20, 1, 2)),
        "n_values": [100, 1000],
        "trials": 1000,
        "target_pf": 0.1,
        "roc_snr_db": -10.0,
        "roc_instances": 2000,
        "roc_points": 101,
        "acf_max_lag": 50,
        "acf_samples": 100000,
        "smoothing_l": 10,
    },
    "output": {
        "directory": "runs/latest",
        "figures": True,
    },
}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config field {where!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config field {where!r} must be a section")
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def _apply_override(cfg: dict, spec: str) -> None:
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} must look like section.key=value")
    key, _, raw = spec.partition("=")
    parts = key.strip().split(".")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    node = cfg
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config section {part!r} in override {spec!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config field {key.strip()!r} in override {spec!r}")
    node[parts[-1]] = value


class RunConfig:
    """Fully-resolved configuration with typed accessors."""

    def __init__(self, data: dict):
        self.data = data

    @classmethod
    def load(cls, path=None, overrides=(), env=None) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                with open(path, "rb") as fh:
                    user = tomllib.load(fh)
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {path}") from None
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"config file {path}: {exc}") from exc
            data = _merge(data, user)
        for spec in overrides:
            _apply_override(data, spec)
        env = os.environ if env is None else env
        if SEED_ENV_VAR in env:
            try:
                data["master_seed"] = int(env[SEED_ENV_VAR])
            except ValueError:
                raise ConfigError(f"{SEED_ENV_VAR} must be an integer, "
                                  f"got {env[SEED_ENV_VAR]!r}") from None
        return cls(data)

    @property
    def master_seed(self) -> int:
        return int(self.data["master_seed"])

    def dataset_config(self) -> DatasetConfig:
        d = self.data["dataset"]
        try:
            return DatasetConfig(
                frame_len_N=int(d["frame_len_n"]),
                seq_len_T=int(d["seq_len_t"]),
                snr_grid_db=tuple(d["snr_grid_db"]),
                instances_per_class=int(d["instances_per_class"]),
                master_seed=self.master_seed,
                split_ratios=tuple(d["split_ratios"]),
                fm_message_hz=float(d["fm_message_hz"]),
                fm_deviation_hz=float(d["fm_deviation_hz"]),
                sample_rate_hz=float(d["sample_rate_hz"]),
                smoothing_L=int(d["smoothing_l"]),
            )
        except ValueError as exc:
            raise ConfigError(f"dataset: {exc}") from exc

    def channel_config(self) -> ChannelConfig:
        c = self.data["channel"]
        try:
            return ChannelConfig(gain_h=float(c["gain_h"]),
                                 noise_variance=float(c["noise_variance"]))
        except ValueError as exc:
            raise ConfigError(f"channel: {exc}") from exc

    def train_hyperparams(self) -> TrainHyperparams:
        t = self.data["train"]
        try:
            return TrainHyperparams(
                epochs=int(t["epochs"]), batch_size=int(t["batch_size"]),
                learning_rate=float(t["learning_rate"]),
                dropout_rate=float(t["dropout_rate"]), seed=int(t["seed"]))
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from exc

    def fm_tone(self) -> FmTone:
        d = self.data["dataset"]
        return FmTone(float(d["fm_message_hz"]), float(d["fm_deviation_hz"]),
                      float(d["sample_rate_hz"]))

    def echo(self, directory) -> None:
        """Write the resolved config as TOML into the output directory."""
        Path(directory).mkdir(parents=True, exist_ok=True)
        (Path(directory) / "resolved.toml").write_text(
            to_toml(self.data), encoding="utf-8")


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")


def to_toml(data: dict) -> str:
    lines = []
    for key, value in data.items():
        if not isinstance(value, dict):
            lines.append(f"{key} = {_toml_value(value)}")
    for key, value in data.items():
        if isinstance(value, dict):
            lines.append("")
            lines.append(f"[{key}]")
            for k, v in value.items():
                lines.append(f"{k} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"
