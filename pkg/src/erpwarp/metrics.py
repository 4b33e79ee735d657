"""Distances between trials and averages, descriptive statistics, and ERP
component measurements."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .signalcore import AverageSignal, Empty, LengthMismatch, Scheme, as_signal, epoch_times

N100_WINDOW_S = (0.080, 0.120)
P200_WINDOW_S = (0.150, 0.275)
AMPLITUDE_DEFINITION = "peak minus opposite-polarity extremum in the preceding window"


class EmptyWindow(ValueError):
    pass


class Polarity(str, enum.Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"

    @property
    def opposite(self) -> "Polarity":
        return Polarity.NEGATIVE if self is Polarity.POSITIVE else Polarity.POSITIVE


def _pair(trial, avg):
    s = as_signal(trial)
    r = as_signal(avg)
    if s.shape != r.shape:
        raise LengthMismatch(f"trial has {s.size} samples, average has {r.size}")
    return s, r


def rms_to_average(trial, avg) -> float:
    s, r = _pair(trial, avg)
    d = s - r
    return math.sqrt(float(np.dot(d, d)) / d.size)


def mad_to_average(trial, avg) -> float:
    """Maximum absolute sample difference."""
    s, r = _pair(trial, avg)
    return float(np.max(np.abs(s - r)))


@dataclass(frozen=True)
class StatsSummary:
    mean: float
    std: float
    v: float | None
    median: float
    q25: float
    q75: float
    max: float
    min: float
    n: int

    @property
    def v_defined(self) -> bool:
        return self.v is not None

    def as_row(self) -> dict:
        return {
            "mean": self.mean, "std": self.std, "v": self.v, "median": self.median,
            "q25": self.q25, "q75": self.q75, "max": self.max, "min": self.min,
        }


def quantile(values, q: float) -> float:
    """Linear interpolation between closest ranks (numpy's default method)."""
    return float(np.quantile(np.asarray(values, dtype=np.float64), q))


def summary_stats(values) -> StatsSummary:
    """Mean, sample standard deviation, coefficient of variation and quartiles.

    ``v`` is ``None`` when the mean is zero.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise Empty("no values to summarise")
    mean = math.fsum(x) / x.size
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    v = std / mean if mean != 0 else None
    q25, median, q75 = (float(q) for q in np.quantile(x, [0.25, 0.5, 0.75]))
    return StatsSummary(mean, std, v, median, q25, q75, float(x.max()), float(x.min()), int(x.size))


@dataclass(frozen=True)
class BoxplotStats:
    median: float
    q25: float
    q75: float
    whisker_low: float
    whisker_high: float
    outliers: tuple = field(default=())

    @property
    def iqr(self) -> float:
        return self.q75 - self.q25


def boxplot_stats(values, whis=1.5) -> BoxplotStats:
    """Tukey box: whiskers at the most extreme data inside the 1.5 IQR fences."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise Empty("no values for a boxplot")
    q25, median, q75 = (float(q) for q in np.quantile(x, [0.25, 0.5, 0.75]))
    iqr = q75 - q25
    lo_fence = q25 - whis * iqr
    hi_fence = q75 + whis * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = tuple(float(v) for v in x[(x < lo_fence) | (x > hi_fence)])
    return BoxplotStats(median, q25, q75, float(inside.min()), float(inside.max()), outliers)


@dataclass(frozen=True)
class ComponentMeasures:
    delay_s: float
    peak_uv: float
    amplitude_uv: float
    window_s: tuple
    polarity: Polarity
    preceding_window_s: tuple = N100_WINDOW_S
    amplitude_definition: str = AMPLITUDE_DEFINITION


def _window_extremum(x, t, window_s, polarity):
    lo, hi = window_s
    # small slack so window edges that fall exactly on a sample are kept
    eps = 1e-9
    idx = np.flatnonzero((t >= lo - eps) & (t <= hi + eps))
    if idx.size == 0:
        raise EmptyWindow(f"no samples in window [{lo}, {hi}] s")
    seg = x[idx]
    k = int(np.argmax(seg)) if polarity is Polarity.POSITIVE else int(np.argmin(seg))
    return idx[k]


def measure_component(avg, window_s=P200_WINDOW_S, polarity=Polarity.POSITIVE,
                      preceding_window_s=N100_WINDOW_S, fs_hz=None, prestim_ms=None):
    """Delay, peak and amplitude of one ERP component.

    The peak is the window's maximum (``Polarity.POSITIVE``) or minimum,
    earliest sample on ties.  Amplitude is the peak minus the opposite
    extremum in ``preceding_window_s`` (the N100 trough for P200).
    """
    polarity = Polarity(polarity)
    if isinstance(avg, AverageSignal):
        fs_hz, prestim_ms = avg.fs_hz, avg.prestim_ms
    if fs_hz is None:
        raise ValueError("sampling rate required for a bare signal")
    x = as_signal(avg)
    t = epoch_times(x.size, fs_hz, prestim_ms or 0.0)
    lo, hi = window_s
    if hi < 0:
        raise EmptyWindow("window lies entirely before stimulus onset")
    peak_i = _window_extremum(x, t, (max(lo, 0.0), hi), polarity)
    trough_i = _window_extremum(x, t, preceding_window_s, polarity.opposite)
    delay = float(t[peak_i])
    # onset sample may carry -0.0 or a rounding residue
    delay = max(delay, 0.0)
    return ComponentMeasures(
        delay, float(x[peak_i]), float(x[peak_i] - x[trough_i]),
        tuple(window_s), polarity, tuple(preceding_window_s),
    )


@dataclass
class SchemeScores:
    scheme: Scheme
    rms: np.ndarray
    mad: np.ndarray
    rms_summary: StatsSummary
    mad_summary: StatsSummary
    rms_box: BoxplotStats
    mad_box: BoxplotStats


def scheme_comparison(trials, averages, processed=None) -> dict:
    """RMS and MAD of every held-out trial against each average.

    ``averages`` maps a :class:`Scheme` (or its value) to an average signal.
    ``processed`` optionally maps a scheme to the held-out trials after they
    went through that scheme's processing (warped, or warped and filtered);
    schemes missing from it are scored on ``trials`` as given.
    """
    processed = {Scheme(k): v for k, v in (processed or {}).items()}
    base = trials.as_array() if hasattr(trials, "as_array") else np.atleast_2d(trials)
    out = {}
    for key, avg in averages.items():
        scheme = Scheme(key)
        data = np.atleast_2d(processed.get(scheme, base))
        r = as_signal(avg)
        rms = np.array([rms_to_average(s, r) for s in data])
        mad = np.array([mad_to_average(s, r) for s in data])
        out[scheme] = SchemeScores(
            scheme, rms, mad, summary_stats(rms), summary_stats(mad),
            boxplot_stats(rms), boxplot_stats(mad),
        )
    return out
