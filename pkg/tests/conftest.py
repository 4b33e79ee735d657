from __future__ import annotations

import functools
import math

import numpy as np
import pytest

from erpwarp.pipeline import preprocess, reject_artifacts
from erpwarp.signalcore import TrialSet
from erpwarp.synth import config_a, config_a_jitter, config_a_template, generate_trials

_CRITERIA = []


def enumerate_paths(n: int):
    """Every admissible (0-based) path through an n x n grid.

    Plain recursion over the three unit steps, no dynamic programming.
    """
    out = []

    def walk(i, j, acc):
        acc.append((i, j))
        if i == n - 1 and j == n - 1:
            out.append(list(acc))
        else:
            if i + 1 < n and j + 1 < n:
                walk(i + 1, j + 1, acc)
            if i + 1 < n:
                walk(i + 1, j, acc)
            if j + 1 < n:
                walk(i, j + 1, acc)
        acc.pop()

    walk(0, 0, [])
    return out


@functools.lru_cache(maxsize=None)
def path_table(n: int):
    """Padded index arrays of all paths: (rows, cols, mask), one path per row."""
    paths = enumerate_paths(n)
    width = 2 * n - 1
    rows = np.zeros((len(paths), width), dtype=np.int64)
    cols = np.zeros_like(rows)
    mask = np.zeros(rows.shape, dtype=bool)
    for p, path in enumerate(paths):
        for k, (i, j) in enumerate(path):
            rows[p, k], cols[p, k], mask[p, k] = i, j, True
    return rows, cols, mask


def brute_force_min_cost(r, s) -> float:
    """Minimum path cost over every admissible path, sums correctly rounded."""
    rows, cols, mask = path_table(len(r))
    c = np.abs(np.asarray(r, dtype=float)[:, None] - np.asarray(s, dtype=float)[None, :])
    approx = np.where(mask, c[rows, cols], 0.0).sum(axis=1)
    near = np.flatnonzero(approx <= approx.min() + 1e-9)
    return min(math.fsum(c[rows[p][mask[p]], cols[p][mask[p]]]) for p in near)


@functools.lru_cache(maxsize=None)
def processed_config_a(seed: int, noise: float = 5.0) -> TrialSet:
    ts, _ = config_a(seed, noise_std_uv=noise)
    kept, _ = reject_artifacts(preprocess(ts))
    return kept


@functools.lru_cache(maxsize=None)
def two_class_set(seed: int, per_class: int = 200) -> TrialSet:
    """Config A template against the same template with P200 at 230 ms."""
    a, _ = generate_trials(config_a_template(200.0), per_class, config_a_jitter(seed))
    b, _ = generate_trials(config_a_template(230.0), per_class, config_a_jitter(seed + 1000))
    data = np.vstack([a.as_array(), b.as_array()])
    ts = TrialSet.from_array(data, 500.0, 200.0, channel="synthetic",
                             labels=["A"] * per_class + ["B"] * per_class)
    return preprocess(ts)


@pytest.fixture
def criterion():
    """Record an acceptance criterion outcome for the end-of-run summary."""

    def record(number, name, passed, detail=""):
        _CRITERIA.append((number, name, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {name}: {detail}")
