"""Template-distance features and a one-vs-one linear SVM.

Each trial is described by its RMS distance to one average per class.  The
pairwise linear classifiers are trained with a Pegasos-style stochastic
subgradient method on the L2-regularised hinge loss, which is deterministic
given the seed and needs no external solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numba as nb
import numpy as np

from .metrics import rms_to_average
from .pipeline import CutoffMode, all_averages, conventional_average, fold_ids
from .seeding import generator
from .signalcore import Scheme, TrialSet, as_signal


class DegenerateClass(ValueError):
    pass


def template_features(trial, templates) -> np.ndarray:
    """RMS of ``trial`` to each class template, in template order."""
    return np.array([rms_to_average(trial, tpl) for tpl in templates])


def feature_matrix(trials, templates) -> np.ndarray:
    data = trials.as_array() if hasattr(trials, "as_array") else np.atleast_2d(trials)
    tpl = np.array([as_signal(t) for t in templates])
    diff = data[:, None, :] - tpl[None, :, :]
    return np.sqrt(np.mean(diff * diff, axis=2))


@nb.njit(cache=True)
def _pegasos(x, y, lam, order):
    # x carries a trailing constant column acting as the bias
    w = np.zeros(x.shape[1])
    t = 0
    for e in range(order.shape[0]):
        for idx in order[e]:
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[idx] * np.dot(w, x[idx])
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * y[idx] * x[idx]
    return w


@dataclass(frozen=True, eq=False)
class OvoLinearModel:
    classes: tuple
    pairs: tuple
    weights: np.ndarray
    biases: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    lam: float
    epochs: int
    seed: int

    def decision(self, features) -> np.ndarray:
        z = (np.atleast_2d(features) - self.mean) / self.scale
        return z @ self.weights.T + self.biases

    def predict_index(self, features) -> np.ndarray:
        scores = self.decision(features)
        n_cls = len(self.classes)
        votes = np.zeros((scores.shape[0], n_cls), dtype=np.int64)
        for p, (a, b) in enumerate(self.pairs):
            win_a = scores[:, p] >= 0
            votes[win_a, a] += 1
            votes[~win_a, b] += 1
        # argmax returns the first maximum, i.e. the lowest class index on ties
        return np.argmax(votes, axis=1)

    def predict(self, features) -> list:
        return [self.classes[i] for i in self.predict_index(features)]


def train_ovo_linear(features, labels, lam=1e-2, epochs=200, seed=0, classes=None):
    """Fit one linear SVM per class pair on z-scored features.

    Parameters
    ----------
    features : (n, d) array
    labels : sequence of hashable class labels
    lam : float
        L2 regularisation strength; the step size at update ``t`` is
        ``1 / (lam * t)``.
    epochs : int
        Passes over the pair's samples, each in a seeded shuffled order.
    classes : sequence, optional
        Full class list.  A class listed here but absent from ``labels``
        raises :class:`DegenerateClass`.
    """
    x = np.asarray(features, dtype=np.float64)
    labels = list(labels)
    present = sorted(set(labels), key=str)
    classes = tuple(classes) if classes is not None else tuple(present)
    missing = [c for c in classes if c not in set(labels)]
    if missing:
        raise DegenerateClass(f"classes without training samples: {missing}")
    if len(classes) < 2:
        raise DegenerateClass("need at least two classes")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale
    z1 = np.hstack([z, np.ones((z.shape[0], 1))])
    index = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([index[c] for c in labels])
    pairs = tuple(combinations(range(len(classes)), 2))
    weights = np.zeros((len(pairs), x.shape[1]))
    biases = np.zeros(len(pairs))
    for p, (a, b) in enumerate(pairs):
        sel = np.flatnonzero((y_idx == a) | (y_idx == b))
        xs = z1[sel]
        ys = np.where(y_idx[sel] == a, 1.0, -1.0)
        rng = generator(seed, f"ovo:{a}:{b}")
        order = np.array([rng.permutation(sel.size) for _ in range(epochs)], dtype=np.int64)
        w = _pegasos(xs, ys, float(lam), order.reshape(epochs, sel.size))
        weights[p] = w[:-1]
        biases[p] = w[-1]
    return OvoLinearModel(classes, pairs, weights, biases, mean, scale, float(lam),
                          int(epochs), int(seed))


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0


def confusion(classes, true, predicted) -> ConfusionMatrix:
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true, predicted):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(tuple(classes), counts)


def class_templates(train: TrialSet, classes, scheme=Scheme.FILTERED_DTW,
                    cutoff_mode=CutoffMode(), workers=None) -> list:
    """One average per class, built from ``train`` only."""
    scheme = Scheme(scheme)
    out = []
    for c in classes:
        ids = [t.id for t in train.trials if t.label == c]
        if not ids:
            raise DegenerateClass(f"class {c!r} has no training trials")
        sub = train.subset(ids)
        if scheme is Scheme.CONVENTIONAL:
            out.append(conventional_average(sub))
        else:
            averages, _ = all_averages(sub, cutoff_mode, workers)
            out.append(averages[scheme])
    return out


def fold_templates(ts: TrialSet, held, classes, scheme=Scheme.FILTERED_DTW,
                   cutoff_mode=CutoffMode(), workers=None) -> list:
    """Class templates for one fold: every trial of ``ts`` not in ``held``."""
    held_set = set(held)
    train = ts.subset([i for i in sorted(ts.ids) if i not in held_set])
    return class_templates(train, classes, scheme, cutoff_mode, workers)


@dataclass(frozen=True, eq=False)
class CrossValidation:
    accuracy: float
    fold_accuracies: tuple
    confusion: ConfusionMatrix
    scheme: Scheme
    k: int
    seed: int


def crossvalidate(ts: TrialSet, k=5, scheme=Scheme.FILTERED_DTW, seed=0, lam=1e-2,
                  epochs=200, cutoff_mode=CutoffMode(), workers=None) -> CrossValidation:
    """Stratified k-fold accuracy of the template-distance classifier.

    Templates and classifier are fitted on the training folds only; the
    held-out trials never enter a template.
    """
    labels = ts.labels
    if any(lab is None for lab in labels):
        raise DegenerateClass("every trial needs a class label")
    classes = tuple(sorted(set(labels)))
    total = np.zeros((len(classes), len(classes)), dtype=np.int64)
    accs = []
    all_ids = sorted(ts.ids)
    for held in fold_ids(ts, k, seed):
        held_set = set(held)
        train = ts.subset([i for i in all_ids if i not in held_set])
        test = ts.subset(held)
        templates = fold_templates(ts, held, classes, scheme, cutoff_mode, workers)
        model = train_ovo_linear(feature_matrix(train, templates), train.labels, lam,
                                 epochs, seed, classes)
        pred = model.predict(feature_matrix(test, templates))
        cm = confusion(classes, test.labels, pred)
        total += cm.counts
        accs.append(cm.accuracy)
    return CrossValidation(float(np.mean(accs)), tuple(accs), ConfusionMatrix(classes, total),
                           Scheme(scheme), int(k), int(seed))
