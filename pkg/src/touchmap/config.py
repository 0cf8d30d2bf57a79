"""Run configuration: a JSON document with `sim`, `kernel`, `model`,
`train` and `eval` sections mirroring the corresponding dataclass fields.

Every field is optional and falls back to the library default; unknown
sections or keys are rejected rather than ignored, so typos cannot
silently change an experiment.  The parsed (fully defaulted) config is
echoed into every output manifest for provenance.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .codec import KernelParams
from .engine import UNetSpec
from .errors import ConfigError, MissingInputError, TouchmapError
from .sim import SimConfig
from .training import EvalParams, TrainConfig

__all__ = ["RunConfig", "load_run_config", "run_config_from_dict"]

_MODEL_FIELDS = ("in_channels", "base_channels", "depth", "out_resolution")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration for one pipeline run."""

    sim: SimConfig
    kernel: KernelParams
    model: UNetSpec
    train: TrainConfig
    eval: EvalParams

    def to_dict(self) -> dict:
        return {
            "sim": dataclasses.asdict(self.sim),
            "kernel": dataclasses.asdict(self.kernel),
            "model": {name: getattr(self.model, name) for name in _MODEL_FIELDS},
            "train": dataclasses.asdict(self.train),
            "eval": dataclasses.asdict(self.eval),
        }


def _section(raw: dict, name: str, allowed: tuple[str, ...]) -> dict:
    body = raw.get(name, {})
    if not isinstance(body, dict):
        raise ConfigError(f"config section {name!r} must be an object, got {type(body).__name__}")
    unknown = sorted(set(body) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in config section {name!r}: {unknown}")
    return body


def run_config_from_dict(raw: dict) -> RunConfig:
    """Validate and default-fill a raw config mapping."""
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be an object, got {type(raw).__name__}")
    known_sections = ("sim", "kernel", "model", "train", "eval")
    unknown = sorted(set(raw) - set(known_sections))
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")

    def fields_of(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    try:
        sim = SimConfig(**_section(raw, "sim", fields_of(SimConfig)))
        kernel = KernelParams(**_section(raw, "kernel", fields_of(KernelParams)))
        model = UNetSpec(**_section(raw, "model", _MODEL_FIELDS))
        train = TrainConfig(**_section(raw, "train", fields_of(TrainConfig)))
        eval_params = EvalParams(**_section(raw, "eval", fields_of(EvalParams)))
    except ConfigError:
        raise
    except (TouchmapError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    return RunConfig(sim=sim, kernel=kernel, model=model, train=train, eval=eval_params)


def load_run_config(path: str | Path | None) -> RunConfig:
    """Load a config file, or the all-defaults config when `path` is None."""
    if path is None:
        return run_config_from_dict({})
    p = Path(path)
    if not p.is_file():
        raise MissingInputError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    return run_config_from_dict(raw)
