"""Generalization-bound calculators in their closed (SR) forms.

Only the closed forms that follow from the uniform-bound/Rademacher
constants ``(A, B)`` are computed; the raw multi-sample Rademacher
complexities are not estimated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import ContaminationError
from .pairing import harmonic_mean


@dataclass(frozen=True)
class SRConstants:
    A: float
    B: float

    def __post_init__(self):
        if self.A < 0 or self.B < 0:
            raise ValueError("SR constants must be nonnegative")


def sr_constants_rkhs(R: float, K: float) -> SRConstants:
    """RKHS ball of radius ``R`` for a kernel bounded by ``K``."""
    if R <= 0 or K <= 0:
        raise ValueError("R and K must be positive")
    return SRConstants(R * K, R * K)


def sr_constants_relu(alpha: Sequence[float], beta: Sequence[float], xnorm: float) -> SRConstants:
    """Two-layer ReLU networks with ``|v_i| <= alpha_i``, ``||u_i|| <= beta_i`` on inputs of norm <= xnorm."""
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    if a.shape != b.shape:
        raise ValueError("alpha and beta must have equal length")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("alpha and beta must be nonnegative")
    if xnorm <= 0:
        raise ValueError("xnorm must be positive")
    return SRConstants(float(np.linalg.norm(a) * np.linalg.norm(b) * xnorm),
                       float(2.0 * (a @ b) * xnorm))


def confidence_constants(sr: SRConstants, lipschitz: float, delta: float) -> tuple[float, float]:
    """``C = (1 + A|l|) sqrt(log(2/delta))`` and ``D = 2 B |l| + C``."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    C = (1.0 + sr.A * lipschitz) * math.sqrt(math.log(2.0 / delta))
    return C, 2.0 * sr.B * lipschitz + C


@dataclass(frozen=True)
class PairBoundInputs:
    """Inputs for the multi-MCM bound: one entry per pair."""

    kappa_plus: Sequence[float]
    kappa_minus: Sequence[float]
    nbar: Sequence[float]
    weights: Sequence[float]
    lipschitz: float = 1.0
    delta: float = 0.05
    model: str = "IIM"

    def arrays(self):
        kp, km, nb, w = (np.asarray(v, dtype=float) for v in
                         (self.kappa_plus, self.kappa_minus, self.nbar, self.weights))
        if not kp.shape == km.shape == nb.shape == w.shape:
            raise ValueError("per-pair inputs must have equal lengths")
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("weights must lie on the probability simplex")
        if self.model not in ("IIM", "IBM"):
            raise ValueError("model must be IIM or IBM")
        gap = 1.0 - km - kp
        if np.any(gap <= 0):
            raise ContaminationError("degenerate kappa: 1 - kappa- - kappa+ must be positive")
        if self.model == "IBM":
            nb = np.ones_like(nb)
        return gap, nb, w


@dataclass
class BoundReport:
    bound: float
    C: float
    D: float
    terms: list[float] = field(default_factory=list)
    failure_prob: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def vacuous(self) -> bool:
        return self.bound > 1.0 or (self.failure_prob is not None and self.failure_prob >= 1.0)

    def to_json(self):
        out = {"bound": self.bound, "C": self.C, "D": self.D, "terms": self.terms,
               "vacuous": self.vacuous}
        if self.failure_prob is not None:
            out["failure_prob"] = self.failure_prob
            out["confidence"] = 1.0 - self.failure_prob
        out.update(self.extra)
        return out


def geb_theorem1_report(inputs: PairBoundInputs, sr: SRConstants) -> BoundReport:
    gap, nb, w = inputs.arrays()
    C, D = confidence_constants(sr, inputs.lipschitz, inputs.delta)
    terms = w ** 2 / (nb * gap ** 2)
    total = math.fsum(terms)
    return BoundReport(D * math.sqrt(total), C, D, terms.tolist(),
                       extra={"sum": total, "model": inputs.model})


def geb_theorem1(inputs: PairBoundInputs, sr: SRConstants) -> float:
    """``D sqrt(sum_i w_i^2 / (nbar_i (1 - k-_i - k+_i)^2))``; IBM sets every ``nbar_i`` to 1."""
    return geb_theorem1_report(inputs, sr).bound


def bound_optimal_weights(kappa_plus, kappa_minus, nbar, model: str = "IIM") -> np.ndarray:
    """Weights minimising the multi-MCM bound: ``w_i`` proportional to ``nbar_i (1 - k-_i - k+_i)^2``."""
    kp, km, nb = (np.asarray(v, dtype=float) for v in (kappa_plus, kappa_minus, nbar))
    raw = (1.0 - km - kp) ** 2 * (np.ones_like(nb) if model == "IBM" else nb)
    return raw / raw.sum()


def max_admissible_epsilon(Delta: float, tau: float, eps0: float) -> float:
    """Upper end of the admissible interval ``(0, (Delta (1 - tau) - eps0) / (1 + Delta)]``."""
    if Delta <= 0 or tau <= 0:
        raise ValueError("Delta and tau must be positive")
    if not 0 < eps0 < Delta * (1 - tau):
        raise ValueError("eps0 must lie in (0, Delta (1 - tau))")
    return (Delta * (1.0 - tau) - eps0) / (1.0 + Delta)


@dataclass(frozen=True)
class MergedBoundInputs:
    """Inputs for the merged-bag (BP scheme) bound."""

    lp_gaps: Sequence[float]  # expected merged gaps Lambda+_i - Lambda-_i
    epsilon: float
    N: int
    K: int
    n: int
    lipschitz: float = 1.0
    delta: float = 0.05
    model: str = "CIIM"
    Delta: float | None = None
    tau: float | None = None
    eps0: float | None = None


def geb_theorem2(inputs: MergedBoundInputs, sr: SRConstants) -> tuple[float, float]:
    rep = geb_theorem2_report(inputs, sr)
    return rep.bound, rep.failure_prob


def geb_theorem2_report(inputs: MergedBoundInputs, sr: SRConstants) -> BoundReport:
    """``D sqrt(HM((gap_i - eps)^-2) / (2 (N/K) n))`` holding with failure probability
    ``delta + 2 (N/K) exp(-2 K eps^2)``; the bag model sets ``n`` to 1.
    """
    eps = float(inputs.epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if None not in (inputs.Delta, inputs.tau, inputs.eps0):
        top = max_admissible_epsilon(inputs.Delta, inputs.tau, inputs.eps0)
        if eps > top + 1e-15:
            raise ValueError(f"epsilon {eps} outside admissible interval (0, {top}]")
    if inputs.K < 1 or inputs.N < inputs.K or inputs.N % inputs.K:
        raise ValueError("need N a positive multiple of K")
    if inputs.model not in ("CIIM", "CIBM"):
        raise ValueError("model must be CIIM or CIBM")
    adjusted = np.asarray(inputs.lp_gaps, dtype=float) - eps
    if adjusted.size == 0 or np.any(adjusted <= 0):
        raise ContaminationError("every merged gap must exceed epsilon")
    C, D = confidence_constants(sr, inputs.lipschitz, inputs.delta)
    M = inputs.N // inputs.K
    n = 1 if inputs.model == "CIBM" else inputs.n
    hm = harmonic_mean(adjusted ** -2.0)
    bound = D * math.sqrt(hm / (2.0 * M * n))
    fail = inputs.delta + 2.0 * M * math.exp(-2.0 * inputs.K * eps ** 2)
    return BoundReport(bound, C, D, (adjusted ** -2.0).tolist(), fail,
                       extra={"hm": hm, "M": M, "model": inputs.model})
