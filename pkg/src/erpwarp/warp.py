"""Length-preserving dynamic time warping of a trial onto a reference.

The alignment is ordinary DTW over the absolute-difference cost matrix with
the three unit steps (1, 1), (1, 0) and (0, 1).  Afterwards every node that
was reached by a (0, 1) step, i.e. a step that stays on the same reference
sample, is dropped.  What remains maps each reference sample to exactly one
trial sample, so the warped trial has the reference's length and many warped
trials can be averaged sample by sample.

Paths use 1-based ``(reference_index, trial_index)`` pairs throughout, which
is how they are written in reports; arrays are indexed from 0 internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .signalcore import LengthMismatch, as_signal


class IndexOutOfRange(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CostMatrix:
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class WarpPath:
    nodes: tuple
    total_cost: float

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class RestrictedPath:
    nodes: tuple

    def __len__(self):
        return len(self.nodes)


def build_cost_matrix(reference, trial) -> CostMatrix:
    r = as_signal(reference)
    s = as_signal(trial)
    if r.shape != s.shape:
        raise LengthMismatch(f"reference has {r.size} samples, trial has {s.size}")
    if r.size == 0:
        raise LengthMismatch("signals must not be empty")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(s))):
        raise ValueError("signals must be finite")
    values = np.abs(r[:, None] - s[None, :])
    values.setflags(write=False)
    return CostMatrix(values)


@nb.njit(cache=True, nogil=True)
def _accumulate(c):
    n, m = c.shape
    acc = np.empty((n, m))
    acc[0, 0] = c[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + c[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + c[i, 0]
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = c[i, j] + best
    return acc


@nb.njit(cache=True, nogil=True)
def _backtrack(acc):
    n, m = acc.shape
    ii = np.empty(n + m - 1, dtype=np.int64)
    jj = np.empty(n + m - 1, dtype=np.int64)
    i = n - 1
    j = m - 1
    k = 0
    ii[0] = i
    jj[0] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            # ties resolved in the order diagonal, (1, 0), (0, 1)
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k += 1
        ii[k] = i
        jj[k] = j
    return ii[: k + 1][::-1].copy(), jj[: k + 1][::-1].copy()


def _optimal_indices(values):
    acc = _accumulate(np.ascontiguousarray(values, dtype=np.float64))
    ii, jj = _backtrack(acc)
    return ii, jj, float(acc[-1, -1])


def optimal_path(c: CostMatrix) -> WarpPath:
    """Minimum accumulated-cost path from (1, 1) to (N, N).

    The accumulated cost counts every visited cell, the start cell included.
    Among equal-cost predecessors the backtrack prefers the diagonal step,
    then the step that advances only the reference index.
    """
    values = c.values if isinstance(c, CostMatrix) else np.asarray(c, dtype=np.float64)
    ii, jj, _ = _optimal_indices(values)
    nodes = tuple((int(i) + 1, int(j) + 1) for i, j in zip(ii, jj))
    # summed along the path so the cost is exactly the sum of visited cells
    total = math.fsum(values[ii, jj])
    return WarpPath(nodes, total)


def _restrict_indices(ii, jj):
    keep = np.ones(ii.size, dtype=bool)
    keep[1:] = ii[1:] != ii[:-1]
    return ii[keep], jj[keep]


def restrict_path(p: WarpPath) -> RestrictedPath:
    """Drop every node entered by a step that keeps the reference index."""
    nodes = p.nodes if isinstance(p, WarpPath) else tuple(p)
    kept = [nodes[0]]
    for prev, node in zip(nodes[:-1], nodes[1:]):
        if node[0] != prev[0]:
            kept.append(node)
    return RestrictedPath(tuple(kept))


def reconstruct(trial, rp: RestrictedPath, n_target: int) -> np.ndarray:
    """Read the trial along the restricted path.

    Output sample ``i`` is the trial sample paired with reference index ``i``.
    A path covering fewer than ``n_target`` reference indices is completed by
    repeating its last sample.
    """
    s = as_signal(trial)
    nodes = rp.nodes if isinstance(rp, RestrictedPath) else tuple(rp)
    if not nodes:
        raise IndexOutOfRange("restricted path is empty")
    if len(nodes) > n_target:
        raise IndexOutOfRange(
            f"path has {len(nodes)} nodes, more than the target length {n_target}"
        )
    j = np.array([node[1] for node in nodes], dtype=np.int64)
    if j.min() < 1 or j.max() > s.size:
        raise IndexOutOfRange(f"trial index outside 1..{s.size}")
    out = np.empty(n_target, dtype=np.float64)
    out[: j.size] = s[j - 1]
    out[j.size :] = out[j.size - 1]
    return out


def align_trial(reference, trial) -> np.ndarray:
    """Warp ``trial`` onto ``reference`` and return a signal of equal length."""
    c = build_cost_matrix(reference, trial)
    ii, jj, _ = _optimal_indices(c.values)
    ii, jj = _restrict_indices(ii, jj)
    s = as_signal(trial)
    out = np.empty(s.size, dtype=np.float64)
    out[: jj.size] = s[jj]
    out[jj.size :] = out[jj.size - 1]
    return out
