"""Balanced error, ROC/AUC, empirical proportion risk, and the EPR failure example."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import rankdata

from .bags import Bag


def _labels(labels) -> np.ndarray:
    y = np.asarray(labels)
    if not np.all(np.isin(y, (-1, 1))):
        raise ValueError("labels must be +1 or -1")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ValueError("both classes must be present")
    return y


def predict(scores) -> np.ndarray:
    """Induced classifier, with sign(0) = +1."""
    return np.where(np.asarray(scores) >= 0, 1, -1)


def ber(scores, labels) -> float:
    """Balanced error rate of ``sign(scores)``: mean of the two per-class error rates."""
    y = _labels(labels)
    pred = predict(scores)
    err_pos = np.mean(pred[y == 1] != 1)
    err_neg = np.mean(pred[y == -1] != -1)
    return float(0.5 * err_pos + 0.5 * err_neg)


def roc_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties counting 1/2 (rank-sum form)."""
    y = _labels(labels)
    s = np.asarray(scores, dtype=float)
    ranks = rankdata(s, method="average")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels):
    """ROC points swept over every distinct threshold (predict +1 when score >= threshold).

    Returns ``(thresholds, fpr, tpr)`` starting at ``(+inf, 0, 0)``.
    """
    y = _labels(labels)
    s = np.asarray(scores, dtype=float)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    distinct = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y == 1)[distinct]
    fp = np.cumsum(y == -1)[distinct]
    thresholds = np.r_[np.inf, s[distinct]]
    tpr = np.r_[0.0, tp / tp[-1]]
    fpr = np.r_[0.0, fp / fp[-1]]
    return thresholds, fpr, tpr


def epr(f: Callable[[np.ndarray], np.ndarray], bags: Sequence[Bag], p: float = 1.0) -> float:
    """Mean over bags of ``|predicted positive fraction - observed LP|^p``."""
    if p <= 0:
        raise ValueError("exponent p must be positive")
    terms = [abs(float(np.mean(predict(f(b.instances)) == 1)) - b.lp) ** p for b in bags]
    return float(np.mean(terms))


# -- threshold example: P- uniform on [0,1], P+ with density 2x ----------------------

def counterexample_positive_rate(t):
    """P(X > t) under the even mixture of U[0,1] and the density 2x."""
    t = np.clip(t, 0.0, 1.0)
    return 0.5 * (1.0 - t) + 0.5 * (1.0 - t ** 2)


def counterexample_ber(t):
    """BER of ``sign(x - t)``: ``P+(X <= t) / 2 + P-(X > t) / 2 = t^2/2 + (1 - t)/2``."""
    t = np.clip(t, 0.0, 1.0)
    return 0.5 * t ** 2 + 0.5 * (1.0 - t)


def counterexample_epr(t, p: float = 1.0, lp: float = 0.5):
    return np.abs(counterexample_positive_rate(t) - lp) ** p


@dataclass(frozen=True)
class EPRCounterexample:
    t_epr: float
    t_ber: float
    ber_at_epr: float
    ber_at_ber: float

    @property
    def excess_ber(self) -> float:
        return self.ber_at_epr - self.ber_at_ber

    def to_json(self):
        return {"t_epr": self.t_epr, "t_ber": self.t_ber,
                "ber_t_epr": self.ber_at_epr, "ber_t_ber": self.ber_at_ber,
                "excess_ber": self.excess_ber,
                "t_epr_closed_form": (math.sqrt(5) - 1) / 2}


def epr_counterexample(p: float = 1.0) -> EPRCounterexample:
    """Minimise population EPR and BER over thresholds ``t`` in [0, 1] numerically."""
    opts = {"xatol": 1e-10}
    t_epr = minimize_scalar(lambda t: float(counterexample_epr(t, p)), bounds=(0, 1),
                            method="bounded", options=opts).x
    t_ber = minimize_scalar(lambda t: float(counterexample_ber(t)), bounds=(0, 1),
                            method="bounded", options=opts).x
    return EPRCounterexample(float(t_epr), float(t_ber),
                             float(counterexample_ber(t_epr)), float(counterexample_ber(t_ber)))
