import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erpwarp.classify import (
    DegenerateClass,
    confusion,
    crossvalidate,
    feature_matrix,
    fold_templates,
    template_features,
    train_ovo_linear,
)
from erpwarp.pipeline import fold_ids
from erpwarp.signalcore import Scheme, TrialSet
from erpwarp.synth import Bump, JitterSpec, N100, TemplateSpec, generate_trials


def test_feature_examples():
    tpls = [np.zeros(4), np.ones(4), np.full(4, 2.0), np.full(4, 3.0)]
    f = template_features(np.ones(4), tpls)
    assert f.shape == (4,)
    assert f[1] == 0 and np.all(np.delete(f, 1) > 0)
    same = template_features(np.arange(4.0), [np.zeros(4)] * 3)
    assert np.all(same == same[0])
    np.testing.assert_allclose(feature_matrix(np.ones((2, 4)), tpls)[0], f)


@given(st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_feature_monotone_towards_template(lam):
    rng = np.random.default_rng(0)
    x, tpl = rng.normal(size=30), rng.normal(size=30)
    closer = (1 - lam) * x + lam * tpl
    assert template_features(closer, [tpl])[0] <= template_features(x, [tpl])[0] + 1e-12


def test_separable_clouds():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(50, 2)) * 0.5 + [2.0, 0.0]
    b = rng.normal(size=(50, 2)) * 0.5 - [2.0, 0.0]
    x = np.vstack([a, b])
    y = ["a"] * 50 + ["b"] * 50
    model = train_ovo_linear(x, y)
    assert model.predict(x) == y


def test_single_point_per_class():
    model = train_ovo_linear([[0.0, 1.0], [1.0, 0.0]], ["u", "v"])
    assert model.predict([[0.0, 1.0], [1.0, 0.0]]) == ["u", "v"]


def test_three_classes_pairs_and_determinism():
    rng = np.random.default_rng(2)
    centres = np.array([[0, 4], [4, 0], [-4, -4]], dtype=float)
    x = np.vstack([rng.normal(size=(30, 2)) + c for c in centres])
    y = [c for c in "abc" for _ in range(30)]
    m1 = train_ovo_linear(x, y, seed=3)
    m2 = train_ovo_linear(x, y, seed=3)
    assert len(m1.pairs) == 3
    assert m1.weights.tobytes() == m2.weights.tobytes()
    assert np.mean(np.array(m1.predict(x)) == np.array(y)) > 0.95


def test_degenerate_class():
    with pytest.raises(DegenerateClass):
        train_ovo_linear([[0.0], [1.0]], ["a", "a"], classes=["a", "b"])


def test_confusion_totals():
    cm = confusion(("a", "b"), ["a", "a", "b"], ["a", "b", "b"])
    np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 1]])
    assert cm.total == 3 and cm.accuracy == pytest.approx(2 / 3)


def _two_class(amp_b, noise, per_class, seed):
    a_spec = TemplateSpec(500, 500.0, 200.0, (N100, Bump(200.0, 25.0, 10.0, 1)))
    b_spec = TemplateSpec(500, 500.0, 200.0, (N100, Bump(200.0, 25.0, amp_b, 1)))
    a, _ = generate_trials(a_spec, per_class, JitterSpec(20.0, 0.15, (0.8, 1.2), noise, seed))
    b, _ = generate_trials(b_spec, per_class, JitterSpec(20.0, 0.15, (0.8, 1.2), noise, seed + 1))
    data = np.vstack([a.as_array(), b.as_array()])
    return TrialSet.from_array(data, 500.0, 200.0, labels=["A"] * per_class + ["B"] * per_class)


@pytest.mark.parametrize("scheme", [Scheme.CONVENTIONAL, Scheme.FILTERED_DTW])
def test_well_separated_templates(scheme):
    ts = _two_class(20.0, 1.0, 40, 3)
    cv = crossvalidate(ts, 5, scheme, seed=0)
    assert cv.accuracy >= 0.90
    assert cv.confusion.total == len(ts)


def test_shuffled_labels_near_chance():
    ts = _two_class(20.0, 1.0, 200, 4)
    labels = list(np.random.default_rng(0).permutation(ts.labels))
    shuffled = TrialSet.from_array(ts.as_array(), 500.0, 200.0, labels=labels)
    cv = crossvalidate(shuffled, 5, Scheme.CONVENTIONAL, seed=0)
    assert abs(cv.accuracy - 0.5) <= 0.10


def test_templates_ignore_test_trials():
    ts = _two_class(20.0, 1.0, 20, 5)
    classes = ("A", "B")
    held = fold_ids(ts, 5, 0)[0]
    base = fold_templates(ts, held, classes)
    victim = held[0]
    data = ts.as_array().copy()
    data[victim] += 1000.0
    corrupted = TrialSet.from_array(data, 500.0, 200.0, labels=ts.labels)
    for a, b in zip(base, fold_templates(corrupted, held, classes)):
        assert a.samples.tobytes() == b.samples.tobytes()
