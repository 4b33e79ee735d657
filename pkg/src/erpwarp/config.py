"""Experiment configuration.

Defaults reproduce the reference synthetic setup: a 500-sample, 500 Hz
epoch with 200 ms pre-stimulus, an N100 and a P200 bump, and the jitter,
scaling and noise levels used throughout the test-suite.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .io import read_json
from .metrics import N100_WINDOW_S, P200_WINDOW_S, Polarity
from .pipeline import CutoffMode, SplitMode, SplitSpec
from .seeding import MASK64, derive_seed
from .signalcore import Scheme
from .synth import Bump, JitterSpec, TemplateSpec


class ConfigError(ValueError):
    pass


DEFAULT_BUMPS = [
    {"center_ms": 100.0, "width_ms": 15.0, "amplitude_uv": 5.0, "polarity": -1},
    {"center_ms": 200.0, "width_ms": 25.0, "amplitude_uv": 10.0, "polarity": 1},
]


def _default_synth():
    return {
        "n": 500,
        "fs_hz": 500.0,
        "prestim_ms": 200.0,
        "t_count": 100,
        "channel": "synthetic",
        "classes": {"default": {"bumps": copy.deepcopy(DEFAULT_BUMPS)}},
        "jitter": {
            "latency_shift_ms": 20.0,
            "warp_strength": 0.15,
            "amplitude_scale": [0.8, 1.2],
            "noise_std_uv": 5.0,
            "knots": 8,
        },
    }


@dataclass
class ExperimentConfig:
    seed: int = 42
    inputs: list = field(default_factory=list)
    synth: dict = field(default_factory=_default_synth)
    lowpass_hz: float = 30.0
    amp_range_uv: float = 150.0
    var_factor: float = 3.0
    baseline: bool = False
    schemes: list = field(default_factory=lambda: [s.value for s in Scheme])
    cutoff_mode: str = "fixed:30"
    split: str = "halves"
    window_ms: list = field(default_factory=lambda: [1000 * v for v in P200_WINDOW_S])
    preceding_ms: list = field(default_factory=lambda: [1000 * v for v in N100_WINDOW_S])
    polarity: str = Polarity.POSITIVE.value
    classify_k: int = 5
    classify_scheme: str = Scheme.FILTERED_DTW.value
    classify_lam: float = 1e-2
    classify_epochs: int = 200
    out: str = "out"
    workers: int = 1

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        cfg = cls()
        known = set(asdict(cfg))
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for key, value in payload.items():
            if key == "synth":
                merged = _default_synth()
                merged.update({k: v for k, v in value.items() if k != "jitter"})
                merged["jitter"].update(value.get("jitter", {}))
                value = merged
            setattr(cfg, key, value)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(read_json(Path(path)))

    def check(self) -> None:
        if not 0 <= int(self.seed) <= MASK64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for s in self.schemes:
            Scheme(s)
        Scheme(self.classify_scheme)
        Polarity(self.polarity)
        self.cutoff()
        self.split_spec()
        if self.lowpass_hz <= 0 or self.amp_range_uv <= 0 or self.var_factor <= 0:
            raise ConfigError("filter and rejection parameters must be positive")
        if self.classify_k < 2 or self.classify_epochs < 1 or self.classify_lam <= 0:
            raise ConfigError("classification needs k >= 2, epochs >= 1, lam > 0")

    def cutoff(self) -> CutoffMode:
        return CutoffMode.parse(self.cutoff_mode)

    def split_spec(self) -> SplitSpec:
        return parse_split(self.split, self.seed)

    def resolved(self) -> dict:
        return asdict(self)

    def template_specs(self) -> dict:
        s = self.synth
        out = {}
        for name, cls_spec in s["classes"].items():
            bumps = tuple(Bump(**b) for b in cls_spec["bumps"])
            out[name] = TemplateSpec(int(s["n"]), float(s["fs_hz"]), float(s["prestim_ms"]), bumps)
        return out

    def jitter_for(self, class_index: int) -> JitterSpec:
        j = self.synth["jitter"]
        seed = self.seed if class_index == 0 else derive_seed(self.seed, "class", class_index)
        return JitterSpec(float(j["latency_shift_ms"]), float(j["warp_strength"]),
                          tuple(j["amplitude_scale"]), float(j["noise_std_uv"]), int(seed),
                          int(j.get("knots", 8)))


def parse_split(text: str, seed: int = 0) -> SplitSpec:
    if text == "halves":
        return SplitSpec(SplitMode.HALVES, seed=seed)
    if text.startswith("kfold:"):
        return SplitSpec(SplitMode.KFOLD, int(text.split(":", 1)[1]), seed)
    raise ConfigError(f"split must be 'halves' or 'kfold:<k>', got {text!r}")


def parse_window(text: str) -> tuple:
    """``"150:275"`` (milliseconds) -> ``(0.150, 0.275)`` seconds."""
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"window must look like <lo_ms>:<hi_ms>, got {text!r}") from None
    if hi < lo:
        raise ConfigError(f"window upper bound below lower bound: {text!r}")
    return lo / 1000.0, hi / 1000.0
