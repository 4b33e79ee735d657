import json

import numpy as np
import pytest

from erpwarp import io as tio
from erpwarp.cli import main
from erpwarp.report import strip_timestamp
from erpwarp.signalcore import Scheme, TrialSet


def small_config(path, t_count=12, classes=None, seed=3):
    synth = {"t_count": t_count}
    if classes:
        synth["classes"] = classes
    path.write_text(json.dumps({"seed": seed, "synth": synth, "classify_k": 3,
                                "classify_epochs": 50}))
    return str(path)


def test_trial_file_round_trip(tmp_path):
    data = np.random.default_rng(0).normal(size=(3, 7)) * 1e3
    ts = TrialSet.from_array(data, 500.0, 2.0, channel="Cz", labels=["a", "b", "a"])
    tio.write_trials(tmp_path / "t.csv", ts)
    back = tio.read_trials(tmp_path / "t.csv")
    assert back.as_array().tobytes() == ts.as_array().tobytes()
    assert back.labels == ts.labels and back.channel == "Cz" and back.fs_hz == 500.0


def test_manifest_mismatch(tmp_path):
    ts = TrialSet.from_array(np.zeros((2, 4)), 500.0)
    tio.write_trials(tmp_path / "t.csv", ts)
    meta = tio.read_json(tio.manifest_path(tmp_path / "t.csv"))
    meta["n_trials"] = 5
    tio.write_json(tio.manifest_path(tmp_path / "t.csv"), meta)
    with pytest.raises(tio.ManifestMismatch):
        tio.read_trials(tmp_path / "t.csv")


def test_synth_preprocess_average(tmp_path):
    cfg = small_config(tmp_path / "c.json")
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    ts = tio.read_trials(tmp_path / "s" / "trials.csv")
    assert len(ts) == 12 and ts.n_samples == 500
    assert (tmp_path / "s" / "ground_truth.csv").exists()
    assert main(["preprocess", "--input", str(tmp_path / "s" / "trials.csv"),
                 "--out", str(tmp_path / "p")]) == 0
    report = (tmp_path / "p" / "preprocess_report.txt").read_text()
    assert report.startswith("# erpwarp report: preprocess\ntimestamp: ")
    assert main(["average", "--input", str(tmp_path / "p" / "trials.csv"),
                 "--out", str(tmp_path / "a"), "--dump-warped"]) == 0
    avgs, meta = tio.read_averages(tmp_path / "a" / "averages.csv")
    assert set(avgs) == set(Scheme)
    assert (tmp_path / "a" / "warped_dtw.csv").exists()


def test_single_trial_average_is_the_trial(tmp_path):
    x = np.random.default_rng(1).normal(size=(1, 50))
    tio.write_trials(tmp_path / "one.csv", TrialSet.from_array(x, 500.0))
    assert main(["average", "--input", str(tmp_path / "one.csv"), "--scheme", "conventional",
                 "--out", str(tmp_path / "a")]) == 0
    avgs, _ = tio.read_averages(tmp_path / "a" / "averages.csv")
    assert avgs[Scheme.CONVENTIONAL].samples.tobytes() == x[0].tobytes()


def test_resample_command(tmp_path):
    x = np.random.default_rng(2).normal(size=(2, 500))
    tio.write_trials(tmp_path / "t.csv", TrialSet.from_array(x, 500.0, 200.0))
    assert main(["resample", "--input", str(tmp_path / "t.csv"), "--resample", "1/2",
                 "--out", str(tmp_path / "r")]) == 0
    res = tio.read_trials(tmp_path / "r" / "trials.csv")
    assert res.n_samples == 250 and res.fs_hz == 250.0


def test_error_record(tmp_path, capsys):
    code = main(["preprocess", "--input", str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path / "o")])
    assert code != 0
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["command"] == "preprocess" and "error" in record


def test_nonfinite_input_rejected(tmp_path, capsys):
    (tmp_path / "t.csv").write_text("1,2,nan\n")
    tio.write_json(tmp_path / "t.manifest.json", {"fs_hz": 500.0, "units": "microvolt"})
    assert main(["preprocess", "--input", str(tmp_path / "t.csv"),
                 "--out", str(tmp_path / "o")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "NonFinite"


def test_evaluate_orders_schemes(tmp_path):
    cfg = small_config(tmp_path / "c.json", t_count=40)
    out = tmp_path / "run"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    cols = (out / "scores.csv").read_text().splitlines()
    header = cols[0].split(",")
    rows = np.array([[float(v) for v in line.split(",")] for line in cols[1:]])
    med = {h: np.median(rows[:, i]) for i, h in enumerate(header)}
    assert med["rms_filtered"] < med["rms_conventional"]
    assert (out / "boxplot_rms.csv").exists() and (out / "band_filtered.csv").exists()


def test_components_and_classify(tmp_path):
    classes = {
        "A": {"bumps": [{"center_ms": 200.0, "width_ms": 25.0, "amplitude_uv": 10.0,
                         "polarity": 1}]},
        "B": {"bumps": [{"center_ms": 200.0, "width_ms": 25.0, "amplitude_uv": 30.0,
                         "polarity": 1}]},
    }
    cfg = small_config(tmp_path / "c.json", t_count=15, classes=classes)
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    trials = str(tmp_path / "s" / "trials.csv")
    assert main(["components", "--input", trials, "--split", "kfold:3",
                 "--out", str(tmp_path / "c"), "--report-format", "csv"]) == 0
    text = (tmp_path / "c" / "components_report.csv").read_text()
    assert "component_statistics,delay_s,filtered" in text
    assert main(["classify", "--input", trials, "--config", cfg,
                 "--out", str(tmp_path / "k")]) == 0
    assert "[confusion]" in (tmp_path / "k" / "classify_report.txt").read_text()


def test_reports_identical_across_runs_and_workers(tmp_path):
    cfg = small_config(tmp_path / "c.json", t_count=16)
    outputs = []
    for name, workers in (("a", "1"), ("b", "1"), ("c", "4")):
        out = tmp_path / name
        assert main(["run", "--config", cfg, "--out", str(out), "--workers", workers]) == 0
        outputs.append({p.name: p.read_text() for p in sorted(out.iterdir())})
    for other in outputs[1:]:
        assert set(other) == set(outputs[0])
        for name, text in outputs[0].items():
            assert strip_timestamp(other[name]) == strip_timestamp(text), name
