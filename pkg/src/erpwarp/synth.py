"""Synthetic trials with known latency jitter, time warping and scaling.

A template made of Gaussian bumps is evaluated on a per-trial distorted time
axis.  The distortion is a random piecewise-linear monotone warp plus a
constant latency shift; each trial is then scaled and white noise is added.
Every draw is recorded in the returned ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import generator
from .signalcore import TrialSet, epoch_times


class BadSpec(ValueError):
    pass


# Gaussians are cut off at this many widths so each bump has finite support.
SUPPORT_WIDTHS = 5.0


@dataclass(frozen=True)
class Bump:
    center_ms: float
    width_ms: float
    amplitude_uv: float
    polarity: int = 1

    @property
    def signed_amplitude(self) -> float:
        return float(np.sign(self.polarity)) * abs(self.amplitude_uv)


@dataclass(frozen=True)
class TemplateSpec:
    n: int
    fs_hz: float
    prestim_ms: float = 0.0
    bumps: tuple = ()

    def times(self) -> np.ndarray:
        return epoch_times(self.n, self.fs_hz, self.prestim_ms)


@dataclass(frozen=True)
class JitterSpec:
    latency_shift_ms: float = 0.0
    warp_strength: float = 0.0
    amplitude_scale: tuple = (1.0, 1.0)
    noise_std_uv: float = 0.0
    seed: int = 0
    knots: int = 8


@dataclass(frozen=True, eq=False)
class GroundTruth:
    shifts_ms: np.ndarray
    scales: np.ndarray
    slopes: np.ndarray = field(repr=False)
    warps: np.ndarray = field(repr=False)


def _check_template(spec: TemplateSpec):
    if spec.n < 2 or spec.fs_hz <= 0 or spec.prestim_ms < 0:
        raise BadSpec("template needs n >= 2, positive fs and non-negative prestim")
    t = spec.times()
    for b in spec.bumps:
        if b.width_ms <= 0:
            raise BadSpec(f"bump width must be positive, got {b.width_ms}")
        if not (t[0] <= b.center_ms / 1000.0 <= t[-1]):
            raise BadSpec(f"bump centre {b.center_ms} ms lies outside the epoch")


def bump_sum(bumps, t_s) -> np.ndarray:
    """Evaluate the truncated Gaussian bumps at arbitrary times (seconds)."""
    t_s = np.asarray(t_s, dtype=np.float64)
    out = np.zeros_like(t_s)
    for b in bumps:
        z = (t_s - b.center_ms / 1000.0) / (b.width_ms / 1000.0)
        inside = np.abs(z) <= SUPPORT_WIDTHS
        out[inside] += b.signed_amplitude * np.exp(-0.5 * z[inside] ** 2)
    return out


def make_template(spec: TemplateSpec) -> np.ndarray:
    _check_template(spec)
    return bump_sum(spec.bumps, spec.times())


def _check_jitter(j: JitterSpec):
    if not 0 <= j.warp_strength < 1:
        raise BadSpec(f"warp strength must lie in [0, 1), got {j.warp_strength}")
    lo, hi = j.amplitude_scale
    if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
        raise BadSpec(f"bad amplitude scale range {j.amplitude_scale}")
    if j.latency_shift_ms < 0 or j.noise_std_uv < 0 or j.knots < 2:
        raise BadSpec("shift range and noise must be non-negative, knots >= 2")


def random_slopes(rng, knots: int, strength: float) -> np.ndarray:
    """Segment slopes in ``[1 - strength, 1 + strength]`` averaging exactly 1."""
    dev = rng.uniform(-strength, strength, knots - 1)
    dev -= dev.mean()
    peak = np.abs(dev).max()
    if peak > strength:
        dev *= strength / peak
    return 1.0 + dev


def monotone_warp(t_s, slopes) -> np.ndarray:
    """Piecewise-linear map of the epoch onto itself with fixed endpoints."""
    t0, t1 = t_s[0], t_s[-1]
    knots_x = np.linspace(t0, t1, slopes.size + 1)
    seg = (t1 - t0) / slopes.size
    knots_y = t0 + np.concatenate([[0.0], np.cumsum(slopes * seg)])
    knots_y[-1] = t1
    return np.interp(t_s, knots_x, knots_y)


def generate_trials(template: TemplateSpec, t_count: int, jitter: JitterSpec,
                    labels=None, channel="synthetic"):
    """Draw ``t_count`` distorted, noisy copies of the template.

    Trial ``t`` uses its own generator derived from ``(jitter.seed, t)``.
    The template is re-evaluated by linear interpolation of the sampled
    template, held constant beyond the epoch edges.

    Returns
    -------
    (TrialSet, GroundTruth)
    """
    _check_template(template)
    _check_jitter(jitter)
    if t_count < 1:
        raise BadSpec("need at least one trial")
    t = template.times()
    base = bump_sum(template.bumps, t)
    lo, hi = jitter.amplitude_scale
    rows, shifts, scales, slopes, warps = [], [], [], [], []
    for k in range(t_count):
        rng = generator(jitter.seed, "trial", k)
        shift = rng.uniform(-jitter.latency_shift_ms, jitter.latency_shift_ms)
        slope = random_slopes(rng, jitter.knots, jitter.warp_strength)
        scale = rng.uniform(lo, hi)
        noise = rng.standard_normal(t.size) * jitter.noise_std_uv
        w = monotone_warp(t, slope)
        x = np.interp(w + shift / 1000.0, t, base) * scale + noise
        rows.append(x)
        shifts.append(shift)
        scales.append(scale)
        slopes.append(slope)
        warps.append(w)
    if labels is not None and isinstance(labels, str):
        labels = [labels] * t_count
    ts = TrialSet.from_array(np.array(rows), template.fs_hz, template.prestim_ms,
                             channel=channel, labels=labels)
    truth = GroundTruth(np.array(shifts), np.array(scales), np.array(slopes), np.array(warps))
    return ts, truth


N100 = Bump(100.0, 15.0, 5.0, -1)
P200 = Bump(200.0, 25.0, 10.0, 1)


def config_a_template(p200_ms: float = 200.0) -> TemplateSpec:
    p200 = Bump(p200_ms, P200.width_ms, P200.amplitude_uv, P200.polarity)
    return TemplateSpec(500, 500.0, 200.0, (N100, p200))


def config_a_jitter(seed: int = 42, noise_std_uv: float = 5.0) -> JitterSpec:
    return JitterSpec(20.0, 0.15, (0.8, 1.2), noise_std_uv, seed)


def config_a(seed: int = 42, t_count: int = 100, noise_std_uv: float = 5.0):
    """The reference synthetic configuration used by the evaluation suite.

    500 samples at 500 Hz with 200 ms pre-stimulus; N100 (-5 uV, 100 ms,
    15 ms) plus P200 (+10 uV, 200 ms, 25 ms); shifts within +-20 ms, warp
    strength 0.15, scale in [0.8, 1.2], 5 uV noise.
    """
    return generate_trials(config_a_template(), t_count, config_a_jitter(seed, noise_std_uv))
