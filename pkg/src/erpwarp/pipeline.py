"""Artifact rejection, preprocessing, the three averaging schemes and the
train/test splits used to evaluate them."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .filters import apply_zero_phase, design_kaiser_lowpass, estimate_max_frequency
from .seeding import generator
from .signalcore import (
    AverageSignal,
    Empty,
    LengthMismatch,
    SamplewiseBand,
    Scheme,
    TrialSet,
    as_signal,
    validate_trialset,
)
from .warp import align_trial

DEFAULT_LOWPASS_HZ = 30.0
TRANSITION_HZ = 5.0
ATTEN_DB = 60.0


class BadK(ValueError):
    pass


@dataclass(frozen=True)
class RejectionReport:
    kept: tuple
    rejected_amplitude: tuple
    rejected_variance: tuple
    amp_range_uv: float
    var_factor: float
    variance_threshold: float | None


class SplitMode(str, enum.Enum):
    HALVES = "halves"
    KFOLD = "kfold"


@dataclass(frozen=True)
class SplitSpec:
    mode: SplitMode = SplitMode.HALVES
    k: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", SplitMode(self.mode))
        if self.mode is SplitMode.KFOLD and self.k < 2:
            raise BadK(f"k-fold needs k >= 2, got {self.k}")


@dataclass(frozen=True)
class CutoffMode:
    """Post-warp filter cutoff: a fixed frequency, or estimated per trial."""

    fixed_hz: float | None = DEFAULT_LOWPASS_HZ

    @property
    def estimate(self) -> bool:
        return self.fixed_hz is None

    @classmethod
    def parse(cls, text: str) -> "CutoffMode":
        if text == "estimate":
            return cls(None)
        if text.startswith("fixed:"):
            return cls(float(text.split(":", 1)[1]))
        raise ValueError(f"cutoff mode must be 'fixed:<hz>' or 'estimate', got {text!r}")

    def __str__(self):
        return "estimate" if self.estimate else f"fixed:{self.fixed_hz:g}"


def stable_mean(rows) -> np.ndarray:
    """Column means with correctly rounded sums in row order.

    ``math.fsum`` makes the result independent of summation order and of
    how the rows were produced.
    """
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise Empty("need at least one trial to average")
    t = data.shape[0]
    return np.array([math.fsum(col) / t for col in data.T])


def _map(fn, items, workers):
    if workers is None or workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def reject_artifacts(ts: TrialSet, amp_range_uv=150.0, var_factor=3.0):
    """Drop trials by peak-to-peak range, then by variance.

    A trial whose range exceeds ``amp_range_uv`` is rejected first.  Among
    the survivors, any trial whose variance is above ``var_factor`` times the
    median survivor variance is rejected too.

    Returns
    -------
    (TrialSet, RejectionReport)
    """
    validate_trialset(ts)
    data = ts.as_array()
    ptp = data.max(axis=1) - data.min(axis=1)
    amp_bad = ptp > amp_range_uv
    ids = np.array(ts.ids)
    survivors = np.flatnonzero(~amp_bad)
    var_bad = np.zeros(len(ts), dtype=bool)
    threshold = None
    if survivors.size:
        var = data[survivors].var(axis=1)
        threshold = float(var_factor * np.median(var))
        var_bad[survivors[var > threshold]] = True
    keep = ~(amp_bad | var_bad)
    report = RejectionReport(
        tuple(int(i) for i in ids[keep]),
        tuple(int(i) for i in ids[amp_bad]),
        tuple(int(i) for i in ids[var_bad]),
        float(amp_range_uv), float(var_factor), threshold,
    )
    if not keep.any():
        raise Empty("every trial was rejected")
    kept = replace(ts, trials=tuple(t for t, k in zip(ts.trials, keep) if k))
    return kept, report


def preprocess(ts: TrialSet, lowpass_hz=DEFAULT_LOWPASS_HZ, baseline=False, workers=None):
    """Zero-phase 60 dB Kaiser low-pass of every trial, optional baseline removal."""
    validate_trialset(ts)
    f = design_kaiser_lowpass(ts.fs_hz, lowpass_hz, TRANSITION_HZ, ATTEN_DB)
    rows = _map(lambda t: apply_zero_phase(f, t.samples), ts.trials, workers)
    data = np.array(rows)
    if baseline:
        n_pre = int(round(ts.prestim_ms * ts.fs_hz / 1000.0))
        if n_pre > 0:
            data = data - data[:, :n_pre].mean(axis=1, keepdims=True)
    return ts.with_samples(data)


def conventional_average(ts: TrialSet) -> AverageSignal:
    if len(ts) == 0:
        raise Empty("cannot average an empty trial set")
    order = sorted(ts.trials, key=lambda t: t.id)
    mean = stable_mean([t.samples for t in order])
    return AverageSignal(mean, Scheme.CONVENTIONAL, len(ts), ts.fs_hz, ts.prestim_ms)


def _reference(ts, reference):
    r = as_signal(reference)
    if r.size != ts.n_samples:
        raise LengthMismatch(f"reference has {r.size} samples, trials have {ts.n_samples}")
    return r


def warp_trials(ts: TrialSet, reference, workers=None) -> np.ndarray:
    """Align every trial to the reference; rows follow ascending trial id."""
    r = _reference(ts, reference)
    order = sorted(ts.trials, key=lambda t: t.id)
    return np.array(_map(lambda t: align_trial(r, t.samples), order, workers))


def dtw_average(ts: TrialSet, reference, workers=None):
    """Average of the trials after warping each onto ``reference``.

    Returns
    -------
    (AverageSignal, ndarray)
        The average and the warped trials, one row per trial in ascending
        id order.
    """
    if len(ts) == 0:
        raise Empty("cannot average an empty trial set")
    warped = warp_trials(ts, reference, workers)
    avg = AverageSignal(stable_mean(warped), Scheme.DTW, len(ts), ts.fs_hz, ts.prestim_ms)
    return avg, warped


def filter_warped(ts: TrialSet, warped, cutoff_mode=CutoffMode(), workers=None) -> np.ndarray:
    """Low-pass each warped trial back into the band of its source trial."""
    order = sorted(ts.trials, key=lambda t: t.id)
    filters = {}

    def lowpass_for(cutoff):
        if cutoff not in filters:
            filters[cutoff] = design_kaiser_lowpass(ts.fs_hz, cutoff, TRANSITION_HZ, ATTEN_DB)
        return filters[cutoff]

    if cutoff_mode.estimate:
        nyq_limit = ts.fs_hz / 2.0 - TRANSITION_HZ
        cutoffs = []
        for t in order:
            fm = estimate_max_frequency(t.samples, ts.fs_hz)
            # below one bin or too close to Nyquist the filter is undefined
            fm = min(max(fm, ts.fs_hz / ts.n_samples), nyq_limit)
            cutoffs.append(fm)
    else:
        cutoffs = [float(cutoff_mode.fixed_hz)] * len(order)
    plans = [(lowpass_for(c), w) for c, w in zip(cutoffs, warped)]
    return np.array(_map(lambda p: apply_zero_phase(p[0], p[1]), plans, workers))


def filtered_dtw_average(ts: TrialSet, reference, cutoff_mode=CutoffMode(), workers=None):
    """Warp, low-pass and average.

    Returns
    -------
    (AverageSignal, ndarray)
        The filtered DTW-based average and the filtered warped trials it is
        the mean of.
    """
    if len(ts) == 0:
        raise Empty("cannot average an empty trial set")
    warped = warp_trials(ts, reference, workers)
    filtered = filter_warped(ts, warped, cutoff_mode, workers)
    avg = AverageSignal(stable_mean(filtered), Scheme.FILTERED_DTW, len(ts), ts.fs_hz,
                        ts.prestim_ms)
    return avg, filtered


def all_averages(ts: TrialSet, cutoff_mode=CutoffMode(), workers=None):
    """Conventional, DTW-based and filtered DTW-based averages of one set.

    The conventional average serves as the alignment reference.
    """
    r = conventional_average(ts)
    warped = warp_trials(ts, r, workers)
    rw = AverageSignal(stable_mean(warped), Scheme.DTW, len(ts), ts.fs_hz, ts.prestim_ms)
    filtered = filter_warped(ts, warped, cutoff_mode, workers)
    rf = AverageSignal(stable_mean(filtered), Scheme.FILTERED_DTW, len(ts), ts.fs_hz,
                       ts.prestim_ms)
    averages = {Scheme.CONVENTIONAL: r, Scheme.DTW: rw, Scheme.FILTERED_DTW: rf}
    trials = {
        Scheme.CONVENTIONAL: ts.as_array()[np.argsort(ts.ids, kind="stable")],
        Scheme.DTW: warped,
        Scheme.FILTERED_DTW: filtered,
    }
    return averages, trials


def process_held_out(ts: TrialSet, reference, cutoff_mode=CutoffMode(), workers=None):
    """Put held-out trials through each scheme against a training reference.

    Conventional leaves the trials as they are; the DTW schemes warp them
    onto ``reference`` (the training conventional average) and, for the
    filtered scheme, low-pass the warped trials.  Rows follow ascending id.
    """
    warped = warp_trials(ts, reference, workers)
    filtered = filter_warped(ts, warped, cutoff_mode, workers)
    raw = ts.as_array()[np.argsort(ts.ids, kind="stable")]
    return {Scheme.CONVENTIONAL: raw, Scheme.DTW: warped, Scheme.FILTERED_DTW: filtered}


def evaluate_split(train: TrialSet, held_out: TrialSet, cutoff_mode=CutoffMode(), workers=None):
    """Averages from ``train`` and the matching processed ``held_out`` trials."""
    averages, _ = all_averages(train, cutoff_mode, workers)
    processed = process_held_out(held_out, averages[Scheme.CONVENTIONAL], cutoff_mode, workers)
    return averages, processed


def samplewise_band(trials, avg=None) -> SamplewiseBand:
    """Per-sample mean and population standard deviation across trials."""
    data = trials.as_array() if hasattr(trials, "as_array") else np.asarray(trials, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise Empty("need at least one trial")
    if avg is not None and as_signal(avg).size != data.shape[1]:
        raise LengthMismatch("average and trials differ in length")
    scheme = avg.scheme if isinstance(avg, AverageSignal) else Scheme.CONVENTIONAL
    mean = stable_mean(data)
    std = np.sqrt(np.mean((data - mean) ** 2, axis=0))
    return SamplewiseBand(mean, std, scheme)


def _permutation(ids, seed, stream):
    rng = generator(seed, stream)
    ordered = sorted(ids)
    return [ordered[i] for i in rng.permutation(len(ordered))]


def split_even(ts: TrialSet, seed=0):
    """Shuffle the trials and cut them into two halves, the first one larger on odd counts."""
    if len(ts) < 2:
        raise Empty("need at least two trials to split")
    perm = _permutation(ts.ids, seed, "split")
    half = -(-len(perm) // 2)
    return ts.subset(sorted(perm[:half])), ts.subset(sorted(perm[half:]))


def fold_ids(ts: TrialSet, k: int, seed=0) -> list:
    """Held-out id lists of a shuffled k-fold partition.

    Trials are dealt round-robin.  With labels present each class is
    shuffled on its own and the classes are dealt one after another, so every
    fold gets its share of every class and fold sizes differ by at most one.
    """
    n = len(ts)
    if k < 2 or k > n:
        raise BadK(f"k must lie in [2, {n}], got {k}")
    labels = ts.labels
    if any(lab is not None for lab in labels):
        order = []
        for c in sorted({str(lab) for lab in labels}):
            ids = [t.id for t in ts.trials if str(t.label) == c]
            order.extend(_permutation(ids, seed, f"kfold:{c}"))
    else:
        order = _permutation(ts.ids, seed, "kfold")
    folds = [[] for _ in range(k)]
    for pos, i in enumerate(order):
        folds[pos % k].append(i)
    return [sorted(f) for f in folds]


def kfold(ts: TrialSet, k: int, seed=0):
    """List of ``(train, held_out)`` TrialSets, one per fold."""
    out = []
    all_ids = sorted(ts.ids)
    for held in fold_ids(ts, k, seed):
        held_set = set(held)
        train = [i for i in all_ids if i not in held_set]
        out.append((ts.subset(train), ts.subset(held)))
    return out


def split(ts: TrialSet, spec: SplitSpec):
    if spec.mode is SplitMode.HALVES:
        return [split_even(ts, spec.seed)]
    return kfold(ts, spec.k, spec.seed)
