"""Run configuration: a single JSON file validated against the documented
key set (unknown keys are rejected before any work starts)."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import CnnArchitecture, TrainConfig
from .synth import SynthConfig

_SYNTH_KEYS = {f.name for f in dataclasses.fields(SynthConfig)} - {"rng_seed"}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {"seed"}
_ARCH_KEYS = {"input_size", "channels"}
_EVAL_KEYS = {"n_crops", "convert_ratio"}
_TOP_KEYS = {"seed", "synth", "train", "eval"}


@dataclass(frozen=True)
class EvalOptions:
    n_crops: int = 10
    convert_ratio: float = 0.5

    def __post_init__(self):
        if self.n_crops < 1:
            raise ValueError("n_crops must be >= 1")
        if not 0.0 <= self.convert_ratio <= 1.0:
            raise ValueError("convert_ratio must be in [0, 1]")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    arch: CnnArchitecture = field(default_factory=CnnArchitecture)
    eval: EvalOptions = field(default_factory=EvalOptions)

    def to_dict(self) -> dict:
        synth = {k: getattr(self.synth, k) for k in sorted(_SYNTH_KEYS)}
        synth = {k: list(v) if isinstance(v, tuple) else v
                 for k, v in synth.items()}
        train = {k: getattr(self.train, k) for k in sorted(_TRAIN_KEYS)}
        train["input_size"] = self.arch.input_size
        train["channels"] = list(self.arch.channels)
        return {
            "seed": self.seed,
            "synth": synth,
            "train": train,
            "eval": {"n_crops": self.eval.n_crops,
                     "convert_ratio": self.eval.convert_ratio},
        }


def config_hash(cfg: RunConfig) -> str:
    """Hash of the fully resolved configuration (defaults included)."""
    canon = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()


def _check_keys(section: str, given: dict, allowed: set) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(
            f"unknown {section} config keys: {sorted(unknown)}; "
            f"allowed: {sorted(allowed)}")


def run_config_from_dict(raw: dict, seed_override=None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys("top-level", raw, _TOP_KEYS)
    seed = raw.get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")

    synth_raw = dict(raw.get("synth", {}))
    _check_keys("synth", synth_raw, _SYNTH_KEYS)
    for key in ("scales", "brightness_range", "contrast_range",
                "sharpness_range", "distortion_range"):
        if key in synth_raw:
            synth_raw[key] = tuple(synth_raw[key])

    train_raw = dict(raw.get("train", {}))
    _check_keys("train", train_raw, _TRAIN_KEYS | _ARCH_KEYS)
    arch_raw = {k: train_raw.pop(k) for k in list(train_raw)
                if k in _ARCH_KEYS}
    if "channels" in arch_raw:
        arch_raw["channels"] = tuple(arch_raw["channels"])

    eval_raw = dict(raw.get("eval", {}))
    _check_keys("eval", eval_raw, _EVAL_KEYS)

    try:
        synth = SynthConfig(rng_seed=seed, **synth_raw)
        train = TrainConfig(seed=seed, **train_raw)
        arch = CnnArchitecture(**arch_raw)
        eval_opts = EvalOptions(**eval_raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    if arch.input_size != synth.sample_size:
        raise ConfigError(
            f"train.input_size ({arch.input_size}) must equal "
            f"synth.sample_size ({synth.sample_size})")
    return RunConfig(seed=seed, synth=synth, train=train, arch=arch,
                     eval=eval_opts)


def load_run_config(path, seed_override=None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return run_config_from_dict(raw, seed_override=seed_override)
