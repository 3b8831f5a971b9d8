"""Plug-in LLP training: pair bags, weight the pairs, fit a kernel model on the corrected risk.

The training criterion for paired bags ``(B+_i, B-_i)`` with plug-in
contamination ``kappa_i = (1 - lp+_i, lp-_i)`` and weights ``w_i`` is

    sum_i w_i [ mean_{x in B+_i} l^{k_i}_+(f(x)) / 2 + mean_{x in B-_i} l^{k_i}_-(f(x)) / 2 ]
        + lam * ||f||^2

minimised over ``f(x) = sum_j alpha_j k(x, x_j)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .bags import Bag, ClassConditionals, LPDistribution, sample_lps, simulate_bags
from .exceptions import ConfigError, DegeneratePairsError
from .loss import Loss, correct
from .model import DecisionFunction, KernelConfig, default_bandwidth, kernel_matrix
from .pairing import MERGERS, BagPair, optimal_weights, pair_optimal, pair_sorted

log = logging.getLogger(__name__)

LAMBDA_GRID = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class TrainConfig:
    lambdas: tuple[float, ...] = LAMBDA_GRID
    folds: int = 5
    gtol: float = 1e-6
    max_iter: int = 500
    history: int = 10
    seed: int = 0
    weight_model: str = "bag"
    pairing: str = "optimal"
    merge: str | None = None
    K: int = 1
    loss: str = "logistic"
    bandwidth: float | None = None
    # lambda used when too few bags remain to hold any out; None means max(lambdas)
    fallback_lambda: float | None = None

    def __post_init__(self):
        if not self.lambdas or any(l <= 0 for l in self.lambdas):
            raise ConfigError("lambda values must be positive")
        if self.folds < 2:
            raise ConfigError("need at least 2 folds")
        if self.weight_model not in ("instance", "bag"):
            raise ConfigError(f"weight model must be instance or bag, got {self.weight_model!r}")
        if self.pairing not in ("optimal", "sorted"):
            raise ConfigError(f"pairing must be optimal or sorted, got {self.pairing!r}")
        if self.merge is not None and self.merge not in MERGERS:
            raise ConfigError(f"merge scheme must be one of {sorted(MERGERS)}")
        if self.K < 1:
            raise ConfigError("K must be a positive integer")
        if not Loss(self.loss).differentiable:
            raise ConfigError(f"{self.loss} loss cannot be trained")


# -- the criterion ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PairedSample:
    """Instances of all weighted pairs flattened into per-instance coefficient arrays.

    The risk is ``sum_j same_j * l_{s_j}(f_j) - other_j * l_{-s_j}(f_j)``.
    """

    X: np.ndarray
    sigma: np.ndarray
    same: np.ndarray
    other: np.ndarray
    loss: Loss

    @classmethod
    def build(cls, pairs: Sequence[BagPair], weights, loss: Loss) -> "PairedSample":
        Xs, sig, same, other = [], [], [], []
        for p, w in zip(pairs, weights):
            if w <= 0:
                continue
            cl = correct(loss, p.kappa)
            for s, bag in ((1, p.plus), (-1, p.minus)):
                a, b = cl.coefficients(s)
                c = w / (2.0 * bag.size)
                Xs.append(bag.instances)
                sig.append(np.full(bag.size, s))
                same.append(np.full(bag.size, c * a))
                other.append(np.full(bag.size, c * b))
        if not Xs:
            raise DegeneratePairsError("no pair carries positive weight")
        return cls(np.vstack(Xs), np.concatenate(sig), np.concatenate(same),
                   np.concatenate(other), loss)

    def risk(self, f: np.ndarray) -> float:
        s = self.sigma
        return float(self.same @ self.loss.value(f, s) - self.other @ self.loss.value(f, -s))

    def risk_grad(self, f: np.ndarray) -> np.ndarray:
        s = self.sigma
        return self.same * self.loss.derivative(f, s) - self.other * self.loss.derivative(f, -s)


def plugin_sample(pairs: Sequence[BagPair], loss: Loss, weight_model: str = "bag") -> PairedSample:
    """Plug observed LPs into kappa and the optimal weights."""
    return PairedSample.build(pairs, optimal_weights(pairs, weight_model), loss)


class Objective:
    """Regularised plug-in risk as a function of the representer coefficients."""

    def __init__(self, sample: PairedSample, lam: float, kernel: KernelConfig,
                 gram: np.ndarray | None = None):
        if not lam >= 0:
            raise ValueError("lambda must be nonnegative")
        self.sample = sample
        self.lam = float(lam)
        self.kernel = kernel
        self.K = kernel_matrix(sample.X, kernel) if gram is None else gram

    @property
    def size(self) -> int:
        return self.sample.X.shape[0]

    def _check(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.size,):
            raise ValueError(f"alpha has shape {alpha.shape}, expected ({self.size},)")
        return alpha

    def value(self, alpha) -> float:
        alpha = self._check(alpha)
        f = self.K @ alpha
        return self.sample.risk(f) + self.lam * float(alpha @ f)

    def gradient(self, alpha) -> np.ndarray:
        return self.value_and_grad(alpha)[1]

    def value_and_grad(self, alpha):
        alpha = self._check(alpha)
        f = self.K @ alpha
        val = self.sample.risk(f) + self.lam * float(alpha @ f)
        grad = self.K @ (self.sample.risk_grad(f) + 2.0 * self.lam * alpha)
        return val, grad

    def decision_function(self, alpha) -> DecisionFunction:
        return DecisionFunction(np.asarray(alpha, dtype=float), self.sample.X, self.kernel)


def objective_value(alpha, obj: Objective) -> float:
    return obj.value(alpha)


def objective_gradient(alpha, obj: Objective) -> np.ndarray:
    return obj.gradient(alpha)


@dataclass
class OptimizeResult:
    alpha: np.ndarray
    value: float
    initial_value: float
    converged: bool
    n_iter: int
    message: str
    trace: list[float] = field(default_factory=list, repr=False)


def minimize(obj: Objective, config: TrainConfig = TrainConfig()) -> OptimizeResult:
    """Limited-memory BFGS from ``alpha = 0``.

    Stops when the gradient infinity-norm drops below ``config.gtol`` or after
    ``config.max_iter`` iterations; ``converged`` reports which happened.
    """
    alpha0 = np.zeros(obj.size)
    f0 = obj.value(alpha0)
    trace = [f0]
    res = _scipy_minimize(
        obj.value_and_grad, alpha0, jac=True, method="L-BFGS-B",
        callback=lambda intermediate_result: trace.append(float(intermediate_result.fun)),
        options=dict(maxcor=config.history, gtol=config.gtol, ftol=0.0,
                     maxiter=config.max_iter, maxfun=20 * config.max_iter),
    )
    alpha, value = res.x, float(res.fun)
    if value > f0:  # never return something worse than the start
        alpha, value = alpha0, f0
    converged = bool(np.max(np.abs(obj.gradient(alpha)), initial=0.0) <= config.gtol)
    if not converged:
        log.debug("L-BFGS stopped without reaching gtol: %s", res.message)
    return OptimizeResult(alpha, value, f0, converged, int(res.nit), str(res.message), trace)


# -- pairing pipeline ----------------------------------------------------------

def _drop_to_even(bags: Sequence[Bag]) -> list[Bag]:
    bags = list(bags)
    if len(bags) % 2:
        # the median-LP bag is the least informative partner for anyone
        order = np.argsort([b.lp for b in bags], kind="stable")
        drop = int(order[len(order) // 2])
        warnings.warn(f"odd number of bags; dropping bag {drop} (median label proportion)",
                      stacklevel=3)
        bags.pop(drop)
    return bags


def make_pairs(bags: Sequence[Bag], config: TrainConfig) -> list[BagPair]:
    """Merge (optional) then pair bags according to ``config``."""
    if config.merge:
        if len(bags) % (2 * config.K):
            raise ConfigError(f"{len(bags)} bags cannot be merged in blocks of 2K = {2 * config.K}")
        merged = MERGERS[config.merge](bags, config.K)
        return [m.to_bag_pair(bags) for m in merged]
    bags = _drop_to_even(bags)
    if config.pairing == "sorted":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return pair_sorted(bags, config.weight_model)
    return pair_optimal(bags, config.weight_model)


@dataclass(eq=False)
class FitResult:
    model: DecisionFunction
    opt: OptimizeResult
    weights: np.ndarray
    pairs: list[BagPair]


def fit_pairs(pairs: Sequence[BagPair], lam: float, kernel: KernelConfig,
              config: TrainConfig, gram: np.ndarray | None = None) -> FitResult:
    weights = optimal_weights(pairs, config.weight_model)
    sample = PairedSample.build(pairs, weights, Loss(config.loss))
    obj = Objective(sample, lam, kernel, gram)
    opt = minimize(obj, config)
    return FitResult(obj.decision_function(opt.alpha), opt, weights, list(pairs))


# -- cross validation ------------------------------------------------------------

@dataclass
class CVResult:
    best_lambda: float
    scores: dict[float, float]
    fold_scores: list[dict[float, float] | None]
    skipped_folds: list[int]
    n_folds: int

    def to_json(self):
        return {
            "best_lambda": self.best_lambda,
            "scores": {repr(k): v for k, v in self.scores.items()},
            "fold_scores": [None if s is None else {repr(k): v for k, v in s.items()}
                            for s in self.fold_scores],
            "skipped_folds": self.skipped_folds,
            "n_folds": self.n_folds,
        }


def _units(n_bags: int, config: TrainConfig) -> list[np.ndarray]:
    """Indivisible groups of bags for fold assignment: merge blocks, else consecutive pairs of slots."""
    size = 2 * config.K if config.merge else 2
    return [np.arange(s, s + size) for s in range(0, n_bags - n_bags % size, size)]


def cross_validate(bags: Sequence[Bag], lambdas: Sequence[float], folds: int, seed: int,
                   config: TrainConfig = TrainConfig(), kernel: KernelConfig | None = None) -> CVResult:
    """Choose lambda by K-fold CV over bags.

    The held-out criterion is the plug-in weighted risk of the validation bags,
    paired and weighted on their own. Folds whose validation pairs all have
    zero LP gap cannot be scored and are skipped. Ties go to the smallest lambda.
    """
    lambdas = sorted(float(l) for l in lambdas)
    if len(lambdas) == 1:
        return CVResult(lambdas[0], {lambdas[0]: math.nan}, [], [], 0)
    bags = list(bags) if config.merge else _drop_to_even(bags)
    if kernel is None:
        kernel = KernelConfig(config.bandwidth or default_bandwidth(np.vstack([b.instances for b in bags])))
    units = _units(len(bags), config)
    n_folds = min(folds, len(units))
    if n_folds < 2:
        raise DegeneratePairsError(f"only {len(units)} pairing unit(s); cannot cross-validate")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(units))
    # under merging keep original bag order within the training and validation subsets
    fold_units = np.array_split(perm, n_folds)
    loss = Loss(config.loss)
    fold_scores: list[dict[float, float] | None] = []
    skipped = []
    for k, held in enumerate(fold_units):
        val_idx = np.sort(np.concatenate([units[u] for u in held]))
        held_set = set(held.tolist())
        tr_idx = np.sort(np.concatenate([units[u] for u in perm if u not in held_set]))
        val_bags = [bags[i] for i in val_idx]
        tr_bags = [bags[i] for i in tr_idx]
        try:
            val_sample = plugin_sample(make_pairs(val_bags, config), loss, config.weight_model)
        except DegeneratePairsError:
            log.info("fold %d: validation pairs all degenerate; skipping", k)
            fold_scores.append(None)
            skipped.append(k)
            continue
        try:
            tr_pairs = make_pairs(tr_bags, config)
            optimal_weights(tr_pairs, config.weight_model)
        except DegeneratePairsError:
            fold_scores.append(None)
            skipped.append(k)
            continue
        scores = {}
        gram = None
        for lam in lambdas:
            fit = fit_pairs(tr_pairs, lam, kernel, config, gram)
            gram = gram if gram is not None else kernel_matrix(fit.model.anchors, kernel)
            scores[lam] = val_sample.risk(fit.model(val_sample.X))
        fold_scores.append(scores)
    used = [s for s in fold_scores if s is not None]
    if not used:
        raise DegeneratePairsError("every cross-validation fold was degenerate")
    mean = {lam: float(np.mean([s[lam] for s in used])) for lam in lambdas}
    best = min(lambdas, key=lambda l: (mean[l], l))
    return CVResult(best, mean, fold_scores, skipped, n_folds)


# -- end-to-end ----------------------------------------------------------------------

@dataclass(eq=False)
class TrainResult:
    model: DecisionFunction
    lam: float
    cv: CVResult | None
    fit: FitResult
    lambda_source: str

    def report(self) -> dict:
        opt = self.fit.opt
        return {
            "lambda": self.lam,
            "lambda_source": self.lambda_source,
            "bandwidth": self.model.kernel.bandwidth,
            "n_pairs": len(self.fit.pairs),
            "n_anchors": int(self.model.anchors.shape[0]),
            "pairs": [{"plus": list(p.plus_index), "minus": list(p.minus_index),
                       "lp_plus": p.plus.lp, "lp_minus": p.minus.lp, "weight": float(w)}
                      for p, w in zip(self.fit.pairs, self.fit.weights)],
            "cv": None if self.cv is None else self.cv.to_json(),
            "optimizer": {"iterations": opt.n_iter, "converged": opt.converged,
                          "message": opt.message, "initial_objective": opt.initial_value,
                          "final_objective": opt.value},
        }


def train_llp(bags: Sequence[Bag], config: TrainConfig = TrainConfig()) -> TrainResult:
    """Full plug-in pipeline: merge/pair, plug in kappa, weight, select lambda by CV, refit on everything."""
    if len(bags) < 2:
        raise ConfigError("need at least two bags")
    X_all = np.vstack([b.instances for b in bags])
    kernel = KernelConfig(config.bandwidth or default_bandwidth(X_all))
    cv = None
    if len(config.lambdas) == 1:
        lam, source = float(config.lambdas[0]), "single"
    else:
        try:
            cv = cross_validate(bags, config.lambdas, config.folds, config.seed, config, kernel)
            lam, source = cv.best_lambda, "cv"
        except DegeneratePairsError as exc:
            lam = config.fallback_lambda or max(config.lambdas)
            warnings.warn(f"cross-validation impossible ({exc}); using fallback lambda {lam:g}",
                          stacklevel=2)
            lam, source = float(lam), "fallback"
    pairs = make_pairs(bags, config)
    fit = fit_pairs(pairs, lam, kernel, config)
    return TrainResult(fit.model, lam, cv, fit, source)


# -- consistency sweep -----------------------------------------------------------------

def sqrt_k_rule(N: int) -> int:
    return max(1, math.ceil(math.sqrt(N)))


def rate_lambda_rule(N: int, K: int, c: float = 1.0) -> float:
    """``lam = c (N/K)^(-1/2)``: tends to 0 while ``lam (N/K) / log(N/K)`` diverges."""
    return c / math.sqrt(max(N // K, 1))


@dataclass(frozen=True)
class SweepProblem:
    cc: ClassConditionals
    bayes_ber: float
    lp: LPDistribution = LPDistribution("uniform", 0.0, 1.0)
    bag_size: int = 8
    test_size: int = 20000


def gaussian_1d_problem(bag_size: int = 8) -> SweepProblem:
    from scipy.stats import norm

    from .bags import Gaussian

    cc = ClassConditionals(Gaussian((1.0,), 1.0), Gaussian((-1.0,), 1.0))
    return SweepProblem(cc, float(norm.cdf(-1.0)), bag_size=bag_size)


def consistency_sweep(problem: SweepProblem, schedule: Sequence[int],
                      k_rule: Callable[[int], int] = sqrt_k_rule,
                      lambda_rule: Callable[[int, int], float] = rate_lambda_rule,
                      seed: int = 0, scheme: str = "bm",
                      config: TrainConfig = TrainConfig()) -> list[dict]:
    """Train on fresh data with ``2N`` bags for each ``N`` and report test BER.

    ``N`` is rounded down to a multiple of ``K = k_rule(N)`` so that bags split into blocks.
    """
    from .evaluation import ber

    rows = []
    rng = np.random.default_rng((seed, 10**6))
    test_labels = np.repeat([1, -1], problem.test_size // 2)
    X_test = problem.cc.sample(test_labels, rng)
    for N in schedule:
        K = k_rule(N)
        N_eff = (N // K) * K
        lam = lambda_rule(N_eff, K)
        lps = sample_lps(problem.lp, 2 * N_eff, (seed, N, 0))
        bags = simulate_bags(lps, problem.bag_size, problem.cc, seed=seed * 100_003 + N)
        cfg = replace(config, merge=scheme, K=K, lambdas=(lam,))
        res = train_llp(bags, cfg)
        rows.append({
            "N": N_eff, "K": K, "M": N_eff // K, "lambda": lam,
            "ber": ber(res.model(X_test), test_labels),
            "bayes_ber": problem.bayes_ber,
            "iterations": res.fit.opt.n_iter,
        })
        log.info("sweep N=%d K=%d lambda=%.4g BER=%.4f", N_eff, K, lam, rows[-1]["ber"])
    return rows
