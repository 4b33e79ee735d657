"""Core data model: trials, trial sets, averages and sample-wise bands.

Everything here is immutable once built. Samples are stored as read-only
float64 numpy arrays so that the same object can be handed to several
workers without copying.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

UNITS = "microvolt"


class SignalError(ValueError):
    """Base class for data-model violations."""


class RaggedTrials(SignalError):
    pass


class NonFinite(SignalError):
    pass


class BadRate(SignalError):
    pass


class BadUnits(SignalError):
    pass


class LengthMismatch(SignalError):
    pass


class Empty(SignalError):
    pass


class Scheme(str, enum.Enum):
    CONVENTIONAL = "conventional"
    DTW = "dtw"
    FILTERED_DTW = "filtered"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trial:
    samples: np.ndarray
    id: int
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class TrialSet:
    """A batch of equal-length epochs recorded at ``fs_hz``.

    ``prestim_ms`` is the duration of the segment preceding stimulus onset,
    so sample 0 sits at ``-prestim_ms / 1000`` seconds.
    """

    trials: tuple
    fs_hz: float
    prestim_ms: float = 0.0
    channel: str = ""
    units: str = UNITS

    def __post_init__(self):
        object.__setattr__(self, "trials", tuple(self.trials))

    @classmethod
    def from_array(cls, data, fs_hz, prestim_ms=0.0, channel="", labels=None, ids=None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        n_trials = data.shape[0]
        if ids is None:
            ids = range(n_trials)
        if labels is None:
            labels = [None] * n_trials
        trials = [Trial(row, int(i), lab) for row, i, lab in zip(data, ids, labels)]
        return cls(trials, float(fs_hz), float(prestim_ms), channel)

    def __len__(self):
        return len(self.trials)

    @property
    def n_samples(self) -> int:
        return len(self.trials[0]) if self.trials else 0

    @property
    def ids(self) -> list[int]:
        return [t.id for t in self.trials]

    @property
    def labels(self) -> list[Optional[str]]:
        return [t.label for t in self.trials]

    def as_array(self) -> np.ndarray:
        """Stack samples into a ``(T, N)`` array (a fresh, writable copy)."""
        if not self.trials:
            return np.empty((0, 0))
        return np.vstack([t.samples for t in self.trials])

    def subset(self, ids: Sequence[int]) -> "TrialSet":
        """Trials with the given ids, in the order given."""
        by_id = {t.id: t for t in self.trials}
        return replace(self, trials=tuple(by_id[i] for i in ids))

    def with_samples(self, data) -> "TrialSet":
        """Same metadata and ids/labels, new sample matrix."""
        data = np.asarray(data, dtype=np.float64)
        trials = [Trial(row, t.id, t.label) for row, t in zip(data, self.trials)]
        return replace(self, trials=tuple(trials))


@dataclass(frozen=True, eq=False)
class AverageSignal:
    samples: np.ndarray
    scheme: Scheme
    trial_count: int
    fs_hz: float
    prestim_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class SamplewiseBand:
    mean: np.ndarray
    std: np.ndarray
    scheme: Scheme = field(default=Scheme.CONVENTIONAL)

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "std", _frozen(self.std))
        object.__setattr__(self, "scheme", Scheme(self.scheme))


def validate_trialset(ts: TrialSet) -> TrialSet:
    """Check the TrialSet invariants and return ``ts`` unchanged.

    Raises
    ------
    BadRate
        Sampling rate not a positive finite number, or the pre-stimulus
        segment does not fit inside the epoch.
    RaggedTrials
        Trials of unequal length, or epochs shorter than two samples.
    NonFinite
        NaN or infinite sample.
    BadUnits
        Any unit other than microvolts.
    Empty
        No trials at all.
    """
    if ts.units != UNITS:
        raise BadUnits(f"unsupported units {ts.units!r}; expected {UNITS!r}")
    if not (np.isfinite(ts.fs_hz) and ts.fs_hz > 0):
        raise BadRate(f"sampling rate must be positive, got {ts.fs_hz}")
    if not ts.trials:
        raise Empty("trial set has no trials")
    lengths = {len(t) for t in ts.trials}
    if len(lengths) != 1:
        raise RaggedTrials(f"trials have unequal lengths {sorted(lengths)}")
    n = lengths.pop()
    if n < 2:
        raise RaggedTrials(f"epoch length must be at least 2, got {n}")
    for t in ts.trials:
        if not np.all(np.isfinite(t.samples)):
            raise NonFinite(f"trial {t.id} contains non-finite samples")
    if ts.prestim_ms < 0 or ts.prestim_ms * ts.fs_hz / 1000.0 >= n:
        raise BadRate(
            f"pre-stimulus of {ts.prestim_ms} ms does not fit a {n}-sample epoch"
        )
    return ts


def time_axis(ts: TrialSet) -> np.ndarray:
    """Sample times in seconds relative to stimulus onset."""
    validate_trialset(ts)
    return epoch_times(ts.n_samples, ts.fs_hz, ts.prestim_ms)


def epoch_times(n: int, fs_hz: float, prestim_ms: float = 0.0) -> np.ndarray:
    return np.arange(n, dtype=np.float64) / fs_hz - prestim_ms / 1000.0


def as_signal(x) -> np.ndarray:
    """Coerce a Trial, AverageSignal or array-like into a 1-D float array."""
    if isinstance(x, (Trial, AverageSignal)):
        return x.samples
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D signal, got shape {arr.shape}")
    return arr
