"""Gaussian-kernel decision functions in representer form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel ``k(x, x') = exp(-bandwidth * ||x - x'||^2)``; bounded by 1."""

    bandwidth: float

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be finite and positive, got {self.bandwidth}")


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a nonempty 2-D array of feature vectors")
    return X


def kernel_matrix(X, cfg: KernelConfig, Y=None) -> np.ndarray:
    """Gram matrix between rows of ``X`` and rows of ``Y`` (default ``Y = X``)."""
    X = _as_matrix(X)
    Y = X if Y is None else _as_matrix(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return np.exp(-cfg.bandwidth * cdist(X, Y, "sqeuclidean"))


def default_bandwidth(X) -> float:
    """``1 / (d * v)`` with ``v`` the variance of all entries of the data matrix pooled together."""
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise ValueError("bandwidth heuristic needs at least two rows")
    v = float(np.var(X))
    if v <= 0:
        raise ValueError("data matrix has zero variance; bandwidth undefined")
    return 1.0 / (X.shape[1] * v)


@dataclass(frozen=True, eq=False)
class DecisionFunction:
    """``f(x) = sum_i alpha_i k(x, x_i)`` over anchor points ``x_i``."""

    alpha: np.ndarray
    anchors: np.ndarray
    kernel: KernelConfig

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        anchors = _as_matrix(self.anchors)
        if alpha.size != anchors.shape[0]:
            raise ValueError("one coefficient per anchor required")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "anchors", anchors)

    def __call__(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.anchors.shape[1]:
            raise ValueError(f"dimension mismatch: model expects {self.anchors.shape[1]} features")
        out = np.empty(X.shape[0])
        # chunk rows so large test sets do not materialise a huge kernel block
        step = max(1, 2_000_000 // max(1, self.anchors.shape[0]))
        for s in range(0, X.shape[0], step):
            out[s:s + step] = kernel_matrix(X[s:s + step], self.kernel, self.anchors) @ self.alpha
        return out

    def rkhs_norm(self) -> float:
        K = kernel_matrix(self.anchors, self.kernel)
        return float(np.sqrt(max(self.alpha @ K @ self.alpha, 0.0)))

    def to_json(self) -> dict:
        return {
            "kernel": "gaussian",
            "bandwidth": self.kernel.bandwidth,
            "dim": int(self.anchors.shape[1]),
            "anchors": self.anchors.ravel().tolist(),
            "alpha": self.alpha.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DecisionFunction":
        anchors = np.asarray(data["anchors"], dtype=float).reshape(-1, int(data["dim"]))
        return cls(np.asarray(data["alpha"], dtype=float), anchors, KernelConfig(float(data["bandwidth"])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "DecisionFunction":
        return cls.from_json(json.loads(Path(path).read_text()))


def evaluate_decision(f: DecisionFunction, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(f(x.reshape(1, -1))[0])
