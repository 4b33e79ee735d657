"""Command-line front end.

Every sub-command reads trial files, calls the library and writes its
results plus a report into ``--out``.  Failures exit non-zero and print a
one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as tio
from .classify import crossvalidate
from .config import ConfigError, ExperimentConfig, parse_window
from .filters import rational_factors, resample_rational
from .metrics import Polarity, measure_component, scheme_comparison, summary_stats
from .pipeline import (
    SplitMode,
    all_averages,
    kfold,
    preprocess,
    process_held_out,
    reject_artifacts,
    samplewise_band,
    split_even,
)
from .report import Report
from .signalcore import Scheme, TrialSet, epoch_times
from .synth import generate_trials

log = logging.getLogger("erpwarp")

SCHEME_CHOICES = [s.value for s in Scheme] + ["all"]


class CliError(RuntimeError):
    pass


def _schemes(value) -> list:
    if value in (None, "all"):
        return list(Scheme)
    return [Scheme(value)]


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_cell(v) for v in r) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if hasattr(v, "value"):
        return str(v.value)
    return "" if v is None else str(v)


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {
        "seed": "seed", "lowpass": "lowpass_hz", "amp_thresh": "amp_range_uv",
        "var_factor": "var_factor", "cutoff_mode": "cutoff_mode", "split": "split",
        "polarity": "polarity", "workers": "workers", "out": "out",
    }
    for arg, key in overrides.items():
        value = getattr(args, arg, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "baseline", False):
        cfg.baseline = True
    if getattr(args, "window", None):
        cfg.window_ms = [1000 * v for v in parse_window(args.window)]
    if getattr(args, "k", None) is not None:
        cfg.classify_k = args.k
    scheme = getattr(args, "scheme", None)
    if scheme is not None and scheme != "all":
        cfg.classify_scheme = scheme
        cfg.schemes = [scheme]
    cfg.check()
    return cfg


# Settings that cannot change any result stay out of the report header, so
# reports from different output directories or thread counts compare equal.
NON_RESULT_KEYS = {"func", "out", "workers", "verbose"}


def _report(command, cfg: ExperimentConfig, args) -> Report:
    resolved = {k: v for k, v in cfg.resolved().items() if k not in NON_RESULT_KEYS}
    resolved["command_args"] = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k not in NON_RESULT_KEYS
    }
    return Report(command, resolved, cfg.seed)


def _finish(report: Report, out: Path, name: str, args) -> Path:
    fmt_name = getattr(args, "report_format", "text") or "text"
    path = out / (f"{name}.csv" if fmt_name == "csv" else f"{name}.txt")
    report.write(path, fmt_name)
    log.info("wrote %s", path)
    return path


# --------------------------------------------------------------------------- synth

def synthesize(cfg: ExperimentConfig):
    """Generate every configured class and stack them into one TrialSet."""
    specs = cfg.template_specs()
    t_count = int(cfg.synth["t_count"])
    rows, labels, truth_rows = [], [], []
    multi = len(specs) > 1
    for ci, (name, spec) in enumerate(specs.items()):
        ts, gt = generate_trials(spec, t_count, cfg.jitter_for(ci))
        rows.append(ts.as_array())
        labels += [name if multi else None] * t_count
        for k in range(t_count):
            tid = ci * t_count + k
            truth_rows.append([tid, name, float(gt.shifts_ms[k]), float(gt.scales[k])]
                              + [float(s) for s in gt.slopes[k]])
    spec0 = next(iter(specs.values()))
    ts = TrialSet.from_array(np.vstack(rows), spec0.fs_hz, spec0.prestim_ms,
                             channel=cfg.synth.get("channel", "synthetic"),
                             labels=labels if multi else None)
    return ts, truth_rows


def cmd_synth(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args.out)
    ts, truth = synthesize(cfg)
    tio.write_trials(out / "trials.csv", ts)
    knots = int(cfg.synth["jitter"].get("knots", 8))
    _write_csv(out / "ground_truth.csv",
               ["id", "class", "shift_ms", "scale"] + [f"slope_{i}" for i in range(knots - 1)],
               truth)
    rep = _report("synth", cfg, args)
    rep.section("output", {"trials": len(ts), "samples": ts.n_samples, "fs_hz": ts.fs_hz,
                           "prestim_ms": ts.prestim_ms})
    _finish(rep, out, "synth_report", args)
    return 0


# ---------------------------------------------------------------------- preprocess

def run_preprocess(ts: TrialSet, cfg: ExperimentConfig):
    filtered = preprocess(ts, cfg.lowpass_hz, cfg.baseline, cfg.workers)
    return reject_artifacts(filtered, cfg.amp_range_uv, cfg.var_factor)


def cmd_preprocess(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args.out)
    ts = tio.read_trials(args.input, args.manifest)
    kept, rep_rej = run_preprocess(ts, cfg)
    tio.write_trials(out / "trials.csv", kept)
    rep = _report("preprocess", cfg, args)
    _rejection_section(rep, rep_rej, len(ts))
    _finish(rep, out, "preprocess_report", args)
    return 0


def _rejection_section(rep: Report, rr, n_in):
    rep.section("rejection", {
        "input_trials": n_in,
        "kept": len(rr.kept),
        "rejected_amplitude": len(rr.rejected_amplitude),
        "rejected_variance": len(rr.rejected_variance),
        "amp_range_uv": rr.amp_range_uv,
        "range_statistic": "within-trial peak-to-peak",
        "var_factor": rr.var_factor,
        "variance_threshold": rr.variance_threshold,
        "rejected_amplitude_ids": " ".join(map(str, rr.rejected_amplitude)) or "-",
        "rejected_variance_ids": " ".join(map(str, rr.rejected_variance)) or "-",
    })


# ------------------------------------------------------------------------- average

def run_average(ts: TrialSet, cfg: ExperimentConfig, schemes, out: Path, dump_warped=False):
    """Averages of ``ts`` (or of its first half when splitting) written to ``out``."""
    held = None
    train = ts
    spec = cfg.split_spec() if cfg.split != "none" else None
    if spec is not None:
        if spec.mode is not SplitMode.HALVES:
            raise CliError("average supports --split halves only; use components for k-fold")
        if len(ts) >= 2:
            train, held = split_even(ts, spec.seed)
    averages, trials = all_averages(train, cfg.cutoff(), cfg.workers)
    chosen = {s: averages[s] for s in schemes}
    if Scheme.CONVENTIONAL not in chosen:
        # the alignment reference always travels with the averages
        chosen = {Scheme.CONVENTIONAL: averages[Scheme.CONVENTIONAL], **chosen}
    extra = {"train_ids": train.ids, "held_out_ids": held.ids if held is not None else [],
             "cutoff_mode": str(cfg.cutoff())}
    tio.write_averages(out / "averages.csv", chosen, extra)
    t = epoch_times(train.n_samples, train.fs_hz, train.prestim_ms)
    for s in chosen:
        band = samplewise_band(trials[s], averages[s])
        _write_csv(out / f"band_{s.value}.csv", ["time_s", "mean", "std"],
                   zip(map(float, t), map(float, band.mean), map(float, band.std)))
        if dump_warped and s is not Scheme.CONVENTIONAL:
            tio.write_matrix(out / f"warped_{s.value}.csv", trials[s])
    if held is not None:
        tio.write_trials(out / "held_out.csv", held)
    return chosen, train, held


def cmd_average(args) -> int:
    cfg = _config_from_args(args)
    if args.split is None:
        cfg.split = "none"
    out = _outdir(args.out)
    ts = tio.read_trials(args.input, args.manifest)
    chosen, train, held = run_average(ts, cfg, _schemes(args.scheme), out, args.dump_warped)
    rep = _report("average", cfg, args)
    rep.section("averages", {
        "schemes": " ".join(s.value for s in chosen),
        "train_trials": len(train),
        "held_out_trials": len(held) if held is not None else 0,
        "cutoff_mode": str(cfg.cutoff()),
    })
    _finish(rep, out, "average_report", args)
    return 0


# ------------------------------------------------------------------------ evaluate

def run_evaluate(held: TrialSet, averages: dict, cfg: ExperimentConfig, out: Path, rep: Report):
    reference = averages.get(Scheme.CONVENTIONAL)
    if reference is None:
        raise CliError("averages file lacks the conventional average used as reference")
    processed = process_held_out(held, reference, cfg.cutoff(), cfg.workers)
    scores = scheme_comparison(held, averages, processed)
    for metric in ("rms", "mad"):
        rows = []
        for s, sc in scores.items():
            st = getattr(sc, f"{metric}_summary")
            rows.append([s.value, st.mean, st.std, st.v, st.median, st.q25, st.q75, st.max,
                         st.min])
        rep.table(f"{metric}_summary", ["scheme", "mean", "std", "v", "median", "q25", "q75",
                                        "max", "min"], rows)
        box_rows, outlier_rows = [], []
        for s, sc in scores.items():
            b = getattr(sc, f"{metric}_box")
            box_rows.append([s.value, b.median, b.q25, b.q75, b.whisker_low, b.whisker_high,
                             len(b.outliers)])
            outlier_rows += [[s.value, v] for v in b.outliers]
        _write_csv(out / f"boxplot_{metric}.csv",
                   ["scheme", "median", "q25", "q75", "whisker_low", "whisker_high",
                    "n_outliers"], box_rows)
        _write_csv(out / f"outliers_{metric}.csv", ["scheme", "value"], outlier_rows)
    ids = sorted(held.ids)
    per_trial = []
    for i, tid in enumerate(ids):
        row = [tid]
        for s, sc in scores.items():
            row += [float(sc.rms[i]), float(sc.mad[i])]
        per_trial.append(row)
    cols = ["id"] + [f"{m}_{s.value}" for s in scores for m in ("rms", "mad")]
    _write_csv(out / "scores.csv", cols, per_trial)
    medians = {f"median_rms_{s.value}": sc.rms_summary.median for s, sc in scores.items()}
    medians.update({f"median_mad_{s.value}": sc.mad_summary.median for s, sc in scores.items()})
    rep.section("medians", medians)
    return scores


def cmd_evaluate(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args.out)
    held = tio.read_trials(args.input, args.manifest)
    averages, meta = tio.read_averages(args.averages)
    if meta.get("cutoff_mode") and args.cutoff_mode is None:
        cfg.cutoff_mode = meta["cutoff_mode"]
    rep = _report("evaluate", cfg, args)
    rep.section("input", {"held_out_trials": len(held), "average_trial_count":
                          meta.get("trial_count"), "cutoff_mode": cfg.cutoff_mode})
    run_evaluate(held, averages, cfg, out, rep)
    _finish(rep, out, "evaluate_report", args)
    return 0


# ---------------------------------------------------------------------- components

def _component_rows(measures_by_scheme: dict):
    grid = []
    for s, ms in measures_by_scheme.items():
        for attr in ("delay_s", "peak_uv", "amplitude_uv"):
            st = summary_stats([getattr(m, attr) for m in ms])
            grid.append([attr, s.value, st.mean, st.std, st.v, st.median, st.q25, st.q75,
                         st.max, st.min])
    return grid


def run_components(ts_or_avgs, cfg: ExperimentConfig, rep: Report):
    window = tuple(v / 1000.0 for v in cfg.window_ms)
    preceding = tuple(v / 1000.0 for v in cfg.preceding_ms)
    polarity = Polarity(cfg.polarity)

    def measure(avg):
        return measure_component(avg, window, polarity, preceding)

    if isinstance(ts_or_avgs, dict):
        rows = []
        for s, avg in ts_or_avgs.items():
            m = measure(avg)
            rows.append([s.value, m.delay_s, m.peak_uv, m.amplitude_uv])
        rep.table("components", ["scheme", "delay_s", "peak_uv", "amplitude_uv"], rows)
        return rows
    ts = ts_or_avgs
    spec = cfg.split_spec()
    if spec.mode is SplitMode.KFOLD:
        per_scheme = {s: [] for s in Scheme}
        for train, _ in kfold(ts, spec.k, spec.seed):
            averages, _ = all_averages(train, cfg.cutoff(), cfg.workers)
            for s, avg in averages.items():
                per_scheme[s].append(measure(avg))
        grid = _component_rows(per_scheme)
        rep.table("component_statistics",
                  ["measure", "scheme", "mean", "std", "v", "median", "q25", "q75", "max", "min"],
                  grid)
        return grid
    averages, _ = all_averages(ts, cfg.cutoff(), cfg.workers)
    return run_components(averages, cfg, rep)


def cmd_components(args) -> int:
    cfg = _config_from_args(args)
    if args.preceding:
        cfg.preceding_ms = [1000 * v for v in parse_window(args.preceding)]
    out = _outdir(args.out)
    mpath = Path(args.manifest) if args.manifest else tio.manifest_path(args.input)
    meta = tio.read_json(mpath)
    rep = _report("components", cfg, args)
    rep.section("definition", {
        "window_ms": "{:g}:{:g}".format(*cfg.window_ms),
        "preceding_window_ms": "{:g}:{:g}".format(*cfg.preceding_ms),
        "polarity": cfg.polarity,
        "delay": "stimulus onset to peak",
        "amplitude": "peak minus opposite-polarity extremum in the preceding window",
    })
    if meta.get("kind") == "average":
        averages, _ = tio.read_averages(args.input, mpath)
        run_components(averages, cfg, rep)
    else:
        ts = tio.read_trials(args.input, mpath)
        if args.split is None:
            averages, _ = all_averages(ts, cfg.cutoff(), cfg.workers)
            run_components(averages, cfg, rep)
        else:
            run_components(ts, cfg, rep)
    _finish(rep, out, "components_report", args)
    return 0


# ------------------------------------------------------------------------ resample

def resample_trials(ts: TrialSet, up: int, down: int) -> TrialSet:
    up, down = rational_factors(up, down)
    rows = []
    new_fs = ts.fs_hz
    for t in ts.trials:
        y, new_fs = resample_rational(t.samples, ts.fs_hz, up, down)
        rows.append(y)
    return TrialSet.from_array(np.array(rows), new_fs, ts.prestim_ms, ts.channel,
                               labels=ts.labels, ids=ts.ids)


def _parse_factors(text: str):
    try:
        up, down = (int(v) for v in text.split("/"))
    except ValueError:
        raise ConfigError(f"resample factor must look like <L>/<M>, got {text!r}") from None
    return up, down


def cmd_resample(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args.out)
    ts = tio.read_trials(args.input, args.manifest)
    up, down = _parse_factors(args.resample)
    res = resample_trials(ts, up, down)
    tio.write_trials(out / "trials.csv", res)
    rep = _report("resample", cfg, args)
    rep.section("resample", {"up": up, "down": down, "fs_in_hz": ts.fs_hz,
                             "fs_out_hz": res.fs_hz, "samples_in": ts.n_samples,
                             "samples_out": res.n_samples})
    _finish(rep, out, "resample_report", args)
    return 0


# ------------------------------------------------------------------------ classify

def run_classify(ts: TrialSet, cfg: ExperimentConfig, rep: Report):
    cv = crossvalidate(ts, cfg.classify_k, Scheme(cfg.classify_scheme), cfg.seed,
                       cfg.classify_lam, cfg.classify_epochs, cfg.cutoff(), cfg.workers)
    rep.section("classification", {
        "scheme": cv.scheme.value, "k": cv.k, "accuracy": cv.accuracy,
        "fold_accuracies": " ".join(format(a, ".10g") for a in cv.fold_accuracies),
        "lam": cfg.classify_lam, "epochs": cfg.classify_epochs,
        "features": "RMS to each class template",
    })
    classes = list(cv.confusion.classes)
    rep.table("confusion", ["true\\predicted"] + classes,
              [[c] + [int(v) for v in row] for c, row in zip(classes, cv.confusion.counts)])
    return cv


def cmd_classify(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args.out)
    ts = tio.read_trials(args.input, args.manifest)
    rep = _report("classify", cfg, args)
    run_classify(ts, cfg, rep)
    _finish(rep, out, "classify_report", args)
    return 0


# ----------------------------------------------------------------------------- run

def cmd_run(args) -> int:
    """synth -> preprocess -> average -> evaluate -> components -> classify."""
    cfg = _config_from_args(args)
    out = _outdir(args.out)
    rep = _report("run", cfg, args)
    if cfg.inputs:
        ts = tio.read_trials(cfg.inputs[0])
    else:
        ts, truth = synthesize(cfg)
    tio.write_trials(out / "trials_raw.csv", ts)
    kept, rr = run_preprocess(ts, cfg)
    tio.write_trials(out / "trials.csv", kept)
    _rejection_section(rep, rr, len(ts))
    if cfg.split.startswith("kfold"):
        run_components(kept, cfg, rep)
    else:
        saved = cfg.split
        cfg.split = "halves"
        chosen, train, held = run_average(kept, cfg, [Scheme(s) for s in cfg.schemes], out)
        cfg.split = saved
        averages, _ = tio.read_averages(out / "averages.csv")
        rep.section("split", {"train_trials": len(train), "held_out_trials": len(held)})
        run_evaluate(held, averages, cfg, out, rep)
        run_components(averages, cfg, rep)
    if len({lab for lab in kept.labels if lab is not None}) >= 2:
        run_classify(kept, cfg, rep)
    _finish(rep, out, "report", args)
    return 0


# ---------------------------------------------------------------------------- main

def _common(p, inputs=True):
    if inputs:
        p.add_argument("--input", required=True, help="trial data file (CSV)")
        p.add_argument("--manifest", help="manifest path (default: <input stem>.manifest.json)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="experiment configuration (JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--report-format", choices=["text", "csv"], default="text")
    p.add_argument("--workers", type=int, help="threads for per-trial work")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erpwarp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic trials")
    _common(p, inputs=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="low-pass filter and reject artifacts")
    _common(p)
    p.add_argument("--lowpass", type=float)
    p.add_argument("--amp-thresh", type=float)
    p.add_argument("--var-factor", type=float)
    p.add_argument("--baseline", action="store_true")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("average", help="conventional / DTW / filtered DTW averages")
    _common(p)
    p.add_argument("--scheme", choices=SCHEME_CHOICES, default="all")
    p.add_argument("--cutoff-mode")
    p.add_argument("--split", help="halves (averages from the first half)")
    p.add_argument("--dump-warped", action="store_true")
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("evaluate", help="RMS / MAD of held-out trials to the averages")
    _common(p)
    p.add_argument("--averages", required=True)
    p.add_argument("--cutoff-mode")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("components", help="ERP component delay, peak and amplitude")
    _common(p)
    p.add_argument("--window", help="<lo_ms>:<hi_ms>")
    p.add_argument("--preceding", help="<lo_ms>:<hi_ms> window of the opposite extremum")
    p.add_argument("--polarity", choices=[p.value for p in Polarity])
    p.add_argument("--split", help="kfold:<k> for per-fold statistics")
    p.add_argument("--cutoff-mode")
    p.set_defaults(func=cmd_components)

    p = sub.add_parser("resample", help="rational resampling by L/M")
    _common(p)
    p.add_argument("--resample", required=True, help="<L>/<M>")
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("classify", help="template-distance linear SVM with k-fold CV")
    _common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--scheme", choices=[s.value for s in Scheme])
    p.add_argument("--cutoff-mode")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("run", help="full pipeline from a configuration")
    _common(p, inputs=False)
    p.add_argument("--cutoff-mode")
    p.add_argument("--split")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, CliError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
