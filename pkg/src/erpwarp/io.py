"""Trial files: headerless CSV (one trial per row) plus a JSON manifest.

Samples are written with 17 significant digits, which round-trips every
float64 exactly.  The manifest sits next to the data file under the same
stem with a ``.manifest.json`` suffix unless given explicitly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .signalcore import UNITS, AverageSignal, BadUnits, Scheme, TrialSet, validate_trialset


class ManifestMismatch(ValueError):
    pass


def manifest_path(data_path) -> Path:
    p = Path(data_path)
    return p.with_name(p.stem + ".manifest.json")


def format_row(values) -> str:
    return ",".join(format(float(v), ".17g") for v in values)


def write_matrix(path, data) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in data:
            fh.write(format_row(row) + "\n")


def read_matrix(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows:
        return np.empty((0, 0))
    return np.array(rows, dtype=np.float64)


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_trials(path, ts: TrialSet, manifest=None, extra=None) -> Path:
    path = Path(path)
    write_matrix(path, ts.as_array())
    meta = {
        "fs_hz": ts.fs_hz,
        "prestim_ms": ts.prestim_ms,
        "channel": ts.channel,
        "units": ts.units,
        "labels": ts.labels if any(lab is not None for lab in ts.labels) else None,
        "ids": ts.ids,
        "n_trials": len(ts),
        "n_samples": ts.n_samples,
    }
    if extra:
        meta.update(extra)
    mpath = Path(manifest) if manifest else manifest_path(path)
    write_json(mpath, meta)
    return mpath


def read_trials(path, manifest=None) -> TrialSet:
    data = read_matrix(path)
    meta = read_json(manifest if manifest else manifest_path(path))
    units = meta.get("units", UNITS)
    if units != UNITS:
        raise BadUnits(f"unsupported units {units!r}; expected {UNITS!r}")
    n_trials, n_samples = data.shape if data.size else (0, 0)
    if meta.get("n_trials", n_trials) != n_trials or meta.get("n_samples", n_samples) != n_samples:
        raise ManifestMismatch(
            f"manifest says {meta.get('n_trials')}x{meta.get('n_samples')}, "
            f"data file holds {n_trials}x{n_samples}"
        )
    labels = meta.get("labels")
    if labels is not None and len(labels) != n_trials:
        raise ManifestMismatch("label count differs from trial count")
    ts = TrialSet.from_array(data, meta["fs_hz"], meta.get("prestim_ms", 0.0),
                             channel=meta.get("channel", ""), labels=labels,
                             ids=meta.get("ids"))
    return validate_trialset(ts)


def write_averages(path, averages: dict, extra=None) -> Path:
    """Write averages as rows of a trial-format file; the manifest names the schemes."""
    path = Path(path)
    schemes = list(averages)
    first = averages[schemes[0]]
    write_matrix(path, np.array([averages[s].samples for s in schemes]))
    meta = {
        "kind": "average",
        "fs_hz": first.fs_hz,
        "prestim_ms": first.prestim_ms,
        "units": UNITS,
        "schemes": [Scheme(s).value for s in schemes],
        "trial_count": first.trial_count,
        "n_trials": len(schemes),
        "n_samples": len(first),
    }
    if extra:
        meta.update(extra)
    mpath = manifest_path(path)
    write_json(mpath, meta)
    return mpath


def read_averages(path, manifest=None) -> tuple[dict, dict]:
    data = read_matrix(path)
    meta = read_json(manifest if manifest else manifest_path(path))
    if meta.get("units", UNITS) != UNITS:
        raise BadUnits(f"unsupported units {meta.get('units')!r}")
    schemes = meta["schemes"]
    if data.shape[0] != len(schemes):
        raise ManifestMismatch("scheme list does not match the number of rows")
    out = {}
    for row, name in zip(data, schemes):
        out[Scheme(name)] = AverageSignal(row, Scheme(name), meta.get("trial_count", 0),
                                          meta["fs_hz"], meta.get("prestim_ms", 0.0))
    return out, meta
