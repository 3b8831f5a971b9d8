"""Binary margin losses and their contamination-corrected versions.

A loss is indexed by a label ``sigma`` in {+1, -1}: ``loss.value(t, sigma)``
is the penalty for predicting margin ``t`` on an instance of class ``sigma``.
All methods are vectorised over ``t`` and ``sigma`` via numpy broadcasting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .exceptions import ContaminationError

KINDS = ("logistic", "sigmoid", "ramp", "squared", "zero-one")

# 1 - k+ - k- at or below this is rejected
DENOM_FLOOR = 1e-6

CONVEXITY_GRID = np.arange(-1000, 1001) * 0.01
CONVEXITY_TOL = 1e-8


@dataclass(frozen=True)
class Loss:
    """A binary loss ``l_sigma(t)``.

    Parameters
    ----------
    kind : str
        One of ``logistic``, ``sigmoid``, ``ramp``, ``squared``, ``zero-one``.
    """

    kind: str = "logistic"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported loss kind {self.kind!r}; choose from {KINDS}")

    def value(self, t, sigma):
        t = np.asarray(t, dtype=float)
        m = np.asarray(sigma) * t
        if self.kind == "logistic":
            return np.logaddexp(0.0, -m)
        if self.kind == "sigmoid":
            return expit(-m)
        if self.kind == "ramp":
            return np.clip((1.0 - m) / 2.0, 0.0, 1.0)
        if self.kind == "squared":
            return (1.0 - m) ** 2
        # zero-one with sign(0) = +1
        pred = np.where(t >= 0, 1, -1)
        return (pred != np.asarray(sigma)).astype(float)

    def derivative(self, t, sigma):
        """First derivative in ``t``; the ramp's kinks take the one-sided value from the right."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(sigma, dtype=float)
        m = s * t
        if self.kind == "logistic":
            return -s * expit(-m)
        if self.kind == "sigmoid":
            p = expit(-m)
            return -s * p * (1.0 - p)
        if self.kind == "ramp":
            return np.where((m >= -1.0) & (m < 1.0), -s / 2.0, 0.0)
        if self.kind == "squared":
            return -2.0 * s * (1.0 - m)
        raise ValueError("zero-one loss is not differentiable")

    def second_derivative(self, t, sigma):
        t = np.asarray(t, dtype=float)
        s = np.asarray(sigma, dtype=float)
        if self.kind == "logistic":
            p = expit(-s * t)
            return p * (1.0 - p)
        if self.kind == "squared":
            return np.full(np.broadcast(t, s).shape, 2.0)
        if self.kind == "sigmoid":
            p = expit(-s * t)
            return p * (1.0 - p) * (1.0 - 2.0 * p)
        raise ValueError(f"{self.kind} loss has no second derivative")

    @property
    def differentiable(self) -> bool:
        return self.kind != "zero-one"

    @property
    def same_curvature(self) -> bool:
        """True when l''_+ == l''_- everywhere and the loss is convex."""
        return self.kind in ("logistic", "squared")

    @property
    def lipschitz(self) -> float:
        return {
            "logistic": 1.0,
            "sigmoid": 0.25,
            "ramp": 0.5,
            "squared": math.inf,
            "zero-one": math.inf,
        }[self.kind]

    @property
    def at_zero(self) -> float:
        return float(max(abs(self.value(0.0, 1)), abs(self.value(0.0, -1))))

    @property
    def symmetric_shift(self) -> float | None:
        """Constant K with l_+(t) + l_-(t) = K, or None for non-symmetric losses."""
        return 1.0 if self.kind in ("sigmoid", "ramp", "zero-one") else None


def evaluate(loss: Loss, t, sigma):
    return loss.value(t, sigma)


@dataclass(frozen=True)
class CorrectedLoss:
    """The loss that is unbiased for clean BER under a mutual contamination model.

    ``l^k_sigma(t) = ((1 - k^{-sigma}) l_sigma(t) - k^{-sigma} l_{-sigma}(t)) / (1 - k+ - k-)``
    """

    base: Loss
    kappa_plus: float
    kappa_minus: float

    @property
    def denom(self) -> float:
        return 1.0 - self.kappa_minus - self.kappa_plus

    def coefficients(self, sigma):
        """Return ``(a, b)`` with ``l^k_sigma = a * l_sigma - b * l_{-sigma}``."""
        s = np.asarray(sigma)
        k_other = np.where(s > 0, self.kappa_minus, self.kappa_plus)
        return (1.0 - k_other) / self.denom, k_other / self.denom

    def value(self, t, sigma):
        a, b = self.coefficients(sigma)
        s = np.asarray(sigma)
        return a * self.base.value(t, s) - b * self.base.value(t, -s)

    def derivative(self, t, sigma):
        a, b = self.coefficients(sigma)
        s = np.asarray(sigma)
        return a * self.base.derivative(t, s) - b * self.base.derivative(t, -s)

    @property
    def lipschitz(self) -> float:
        return self.base.lipschitz / self.denom


def _check_kappa(kappa_plus: float, kappa_minus: float) -> None:
    if kappa_plus < 0 or kappa_minus < 0:
        raise ValueError(f"kappa must be nonnegative, got ({kappa_plus}, {kappa_minus})")
    if 1.0 - kappa_minus - kappa_plus <= DENOM_FLOOR:
        raise ContaminationError(
            f"contamination too large: kappa+ + kappa- = {kappa_plus + kappa_minus:.6g} "
            f"(need 1 - kappa+ - kappa- > {DENOM_FLOOR})"
        )


def correct(loss: Loss, kappa: tuple[float, float]) -> CorrectedLoss:
    """Build the corrected loss for contamination proportions ``kappa = (k+, k-)``."""
    kp, km = float(kappa[0]), float(kappa[1])
    _check_kappa(kp, km)
    return CorrectedLoss(loss, kp, km)


class ConvexityCheck(NamedTuple):
    convex: bool
    method: str  # "analytic" or "numeric"

    def __bool__(self):
        return self.convex


def check_convexity(corrected: CorrectedLoss, grid: np.ndarray | None = None,
                    tol: float = CONVEXITY_TOL) -> ConvexityCheck:
    """Decide whether both ``l^k_+`` and ``l^k_-`` are convex in ``t``.

    Losses with a shared, strictly positive second derivative (logistic,
    squared) use the closed form ``(l^k_sigma)'' = l'' (1 - 2 k^{-sigma}) / denom``,
    which is convex exactly when both kappas are below 1/2. Everything else
    falls back to second differences on a grid.
    """
    if corrected.base.same_curvature and grid is None:
        ok = corrected.kappa_plus < 0.5 and corrected.kappa_minus < 0.5
        return ConvexityCheck(ok, "analytic")
    t = CONVEXITY_GRID if grid is None else np.asarray(grid, dtype=float)
    for sigma in (1, -1):
        v = corrected.value(t, sigma)
        second = v[2:] - 2.0 * v[1:-1] + v[:-2]
        if np.any(second < -tol):
            return ConvexityCheck(False, "numeric")
    return ConvexityCheck(True, "numeric")


def symmetric_shift_identity(loss: Loss, kappa: tuple[float, float],
                             points: Sequence[tuple[float, int]]) -> tuple[float, float]:
    """Both sides of the symmetric-loss noise immunity identity.

    ``points`` is a list of ``(t, sigma)`` pairs: the decision value ``t = f(x)``
    for each atom ``x`` of a finite sample, together with its clean label. The
    clean class conditionals are the uniform measures over atoms of each class.

    Returns
    -------
    lhs, rhs : float
        ``lhs`` is the BER of the *uncorrected* loss under the contaminated
        pair ``P^k``; ``rhs`` is ``(1 - k+ - k-) * BER_P + K (k+ + k-) / 2``.
    """
    K = loss.symmetric_shift
    if K is None:
        raise ValueError(f"{loss.kind} loss is not symmetric: l_+ + l_- is not constant")
    kp, km = float(kappa[0]), float(kappa[1])
    _check_kappa(kp, km)
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    t, s = arr[:, 0], arr[:, 1]
    pos, neg = t[s > 0], t[s < 0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one atom of each class")

    def mean(vals, sigma):
        return float(np.mean(loss.value(vals, sigma)))

    clean = 0.5 * mean(pos, 1) + 0.5 * mean(neg, -1)
    # E over P+^k = (1-k+) P+ + k+ P-, likewise for P-^k
    noisy_plus = (1 - kp) * mean(pos, 1) + kp * mean(neg, 1)
    noisy_minus = (1 - km) * mean(neg, -1) + km * mean(pos, -1)
    lhs = 0.5 * noisy_plus + 0.5 * noisy_minus
    rhs = (1 - kp - km) * clean + K * (kp + km) / 2
    return lhs, rhs
