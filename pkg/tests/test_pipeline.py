import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erpwarp.pipeline import (
    BadK,
    CutoffMode,
    SplitMode,
    SplitSpec,
    all_averages,
    conventional_average,
    dtw_average,
    evaluate_split,
    filtered_dtw_average,
    fold_ids,
    kfold,
    preprocess,
    reject_artifacts,
    samplewise_band,
    split,
    split_even,
    stable_mean,
)
from erpwarp.signalcore import Empty, Scheme, TrialSet
from erpwarp.synth import config_a_jitter, config_a_template, generate_trials, make_template


def make(data, labels=None, fs=500.0):
    return TrialSet.from_array(np.asarray(data, dtype=float), fs, 0.0, labels=labels)


def test_rejection_by_range():
    data = np.zeros((4, 10))
    data[2, 3], data[2, 4] = 80.0, -80.0
    kept, rep = reject_artifacts(make(data), 150.0)
    assert rep.rejected_amplitude == (2,)
    assert kept.ids == [0, 1, 3]


def test_rejection_by_variance():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(10, 200))
    data[4] *= np.sqrt(10.0)
    kept, rep = reject_artifacts(make(data), 150.0, 3.0)
    assert rep.rejected_variance == (4,)
    assert 4 not in kept.ids


def test_everything_rejected():
    with pytest.raises(Empty):
        reject_artifacts(make(np.array([[0.0, 500.0], [0.0, -500.0]])), 150.0)


@given(st.floats(10, 400), st.floats(10, 400))
@settings(max_examples=50, deadline=None)
def test_rejection_monotone_in_threshold(a, b):
    data = np.random.default_rng(1).normal(scale=40.0, size=(20, 50))
    lo, hi = sorted((a, b))

    def kept(thresh):
        try:
            return set(reject_artifacts(make(data), thresh, 1e9)[0].ids)
        except Empty:
            return set()

    assert kept(lo) <= kept(hi)


def test_baseline_removal():
    ts = TrialSet.from_array(np.full((2, 500), 7.0), 500.0, 200.0)
    out = preprocess(ts, baseline=True)
    np.testing.assert_allclose(out.as_array(), 0.0, atol=1e-12)


def test_conventional_examples():
    avg = conventional_average(make([[1, 2, 3], [3, 4, 5]]))
    np.testing.assert_array_equal(avg.samples, [2, 3, 4])
    x = np.array([[0.5, -1.0, 4.0]])
    np.testing.assert_array_equal(conventional_average(make(x)).samples, x[0])
    assert avg.trial_count == 2


@given(st.sampled_from([0.25, 0.5, 2.0, 4.0, -8.0]))
@settings(max_examples=10, deadline=None)
def test_conventional_linear(alpha):
    data = np.random.default_rng(2).normal(size=(7, 20))
    a = conventional_average(make(alpha * data)).samples
    np.testing.assert_array_equal(a, alpha * conventional_average(make(data)).samples)


def test_conservation():
    data = np.random.default_rng(3).normal(size=(9, 30))
    avg = conventional_average(make(data)).samples
    np.testing.assert_allclose(avg * 9, data.sum(axis=0), atol=1e-12)


def test_mean_is_order_independent():
    data = np.random.default_rng(4).normal(size=(50, 10)) * 1e6
    perm = np.random.default_rng(5).permutation(50)
    assert stable_mean(data).tobytes() == stable_mean(data[perm]).tobytes()


def test_band_examples():
    band = samplewise_band(np.array([[1.0, 2.0], [3.0, 2.0]]))
    np.testing.assert_array_equal(band.mean, [2.0, 2.0])
    np.testing.assert_array_equal(band.std, [1.0, 0.0])


def test_dtw_average_of_identical_trials():
    x = make_template(config_a_template())
    ts = make(np.tile(x, (4, 1)))
    avg, warped = dtw_average(ts, conventional_average(ts))
    np.testing.assert_array_equal(avg.samples, x)
    np.testing.assert_array_equal(warped, np.tile(x, (4, 1)))


def test_filtered_average_is_mean_of_filtered_trials():
    ts, _ = generate_trials(config_a_template(), 12, config_a_jitter(3))
    ref = conventional_average(ts)
    avg, filtered = filtered_dtw_average(ts, ref)
    np.testing.assert_allclose(avg.samples, filtered.mean(axis=0), atol=1e-12)


def test_all_averages_consistent_with_parts():
    ts, _ = generate_trials(config_a_template(), 10, config_a_jitter(4))
    avgs, rows = all_averages(ts)
    ref = conventional_average(ts)
    assert avgs[Scheme.CONVENTIONAL].samples.tobytes() == ref.samples.tobytes()
    assert avgs[Scheme.DTW].samples.tobytes() == dtw_average(ts, ref)[0].samples.tobytes()
    fa, _ = filtered_dtw_average(ts, ref)
    assert avgs[Scheme.FILTERED_DTW].samples.tobytes() == fa.samples.tobytes()
    assert rows[Scheme.DTW].shape == (10, 500)


def test_workers_do_not_change_results():
    ts, _ = generate_trials(config_a_template(), 16, config_a_jitter(5))
    a, _ = all_averages(ts, CutoffMode(), workers=1)
    b, _ = all_averages(ts, CutoffMode(), workers=8)
    for s in Scheme:
        assert a[s].samples.tobytes() == b[s].samples.tobytes()


def test_estimate_cutoff_mode_runs():
    ts, _ = generate_trials(config_a_template(), 6, config_a_jitter(6))
    avgs, _ = all_averages(ts, CutoffMode.parse("estimate"))
    assert np.all(np.isfinite(avgs[Scheme.FILTERED_DTW].samples))
    assert str(CutoffMode.parse("fixed:25")) == "fixed:25"


def test_split_even_partition():
    ts = make(np.zeros((11, 3)))
    s1, s2 = split_even(ts, seed=9)
    assert len(s1) == 6 and len(s2) == 5
    assert sorted(s1.ids + s2.ids) == list(range(11))
    assert split_even(ts, seed=9)[0].ids == s1.ids


@given(st.integers(2, 40), st.integers(2, 10), st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_kfold_partition(n, k, seed):
    if k > n:
        return
    folds = fold_ids(make(np.zeros((n, 2))), k, seed)
    flat = sorted(i for f in folds for i in f)
    assert flat == list(range(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_kfold_stratified():
    labels = ["a"] * 13 + ["b"] * 7
    folds = fold_ids(make(np.zeros((20, 2)), labels=labels), 5, 1)
    for f in folds:
        n_b = sum(1 for i in f if labels[i] == "b")
        assert n_b in (1, 2)


def test_kfold_errors():
    with pytest.raises(BadK):
        fold_ids(make(np.zeros((3, 2))), 4)
    with pytest.raises(BadK):
        SplitSpec(SplitMode.KFOLD, 1)


def test_split_dispatch():
    ts = make(np.zeros((10, 2)))
    assert len(split(ts, SplitSpec(SplitMode.HALVES))) == 1
    parts = split(ts, SplitSpec(SplitMode.KFOLD, 5))
    assert len(parts) == 5 and all(len(tr) == 8 for tr, _ in parts)
    assert len(kfold(ts, 2)) == 2


def test_noise_free_dtw_closer_to_template():
    tpl = make_template(config_a_template())
    ts, _ = generate_trials(config_a_template(), 40, config_a_jitter(11, noise_std_uv=0.0))
    avgs, _ = all_averages(ts)

    def rms(a):
        return np.sqrt(np.mean((a.samples - tpl) ** 2))

    assert rms(avgs[Scheme.DTW]) < rms(avgs[Scheme.CONVENTIONAL])


def test_evaluate_split_shapes():
    ts, _ = generate_trials(config_a_template(), 10, config_a_jitter(12))
    s1, s2 = split_even(ts)
    avgs, processed = evaluate_split(s1, s2)
    assert set(avgs) == set(processed) == set(Scheme)
    assert all(p.shape == (5, 500) for p in processed.values())
