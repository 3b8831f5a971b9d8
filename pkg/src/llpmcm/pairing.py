"""Turning bags into mutual contamination models.

Bags are paired so that each pair acts as one MCM with contamination
``kappa = (1 - lp_plus, lp_minus)``. Pairing maximises
``sum HM(n_i, n_j) (lp_i - lp_j)^2`` (``model="instance"``) or
``sum (lp_i - lp_j)^2`` (``model="bag"``, the bag-level model drops sizes).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bags import Bag
from .exceptions import DegeneratePairsError

EXACT_LIMIT = 16
GAP_FLOOR = 1e-6
MODELS = ("instance", "bag")


def harmonic_mean(values: Sequence[float]) -> float:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("harmonic mean of an empty sequence")
    if any(v <= 0 for v in vals):
        raise ValueError("harmonic mean needs strictly positive values")
    return len(vals) / math.fsum(1.0 / v for v in vals)


@dataclass(frozen=True, eq=False)
class BagPair:
    """Two bags forming one MCM; ``plus`` has the larger observed LP."""

    plus: Bag
    minus: Bag
    plus_index: tuple[int, ...] = ()
    minus_index: tuple[int, ...] = ()

    def __post_init__(self):
        if self.plus.lp < self.minus.lp:
            raise ValueError("plus bag must have the larger label proportion")

    @property
    def kappa(self) -> tuple[float, float]:
        return 1.0 - self.plus.lp, self.minus.lp

    @property
    def gap(self) -> float:
        return self.plus.lp - self.minus.lp

    @property
    def nbar(self) -> float:
        return harmonic_mean([self.plus.size, self.minus.size])

    def score(self, model: str = "instance") -> float:
        """This pair's contribution to the matching objective."""
        return (self.nbar if model == "instance" else 1.0) * self.gap ** 2


def _edge_weights(lps, sizes, model):
    lps = np.asarray(lps, dtype=float)
    d2 = (lps[:, None] - lps[None, :]) ** 2
    if model == "bag":
        return d2
    if model != "instance":
        raise ValueError(f"model must be one of {MODELS}")
    n = np.asarray(sizes, dtype=float)
    hm = 2.0 / (1.0 / n[:, None] + 1.0 / n[None, :])
    return hm * d2


def matching_objective(matching, lps, sizes=None, model="instance") -> float:
    W = _edge_weights(lps, sizes if sizes is not None else np.ones(len(lps)), model)
    return math.fsum(W[i, j] for i, j in matching)


def _check_even(count):
    if count < 2 or count % 2:
        raise ValueError(f"perfect matching needs an even number (>= 2) of bags, got {count}")


def match_sorted(lps) -> list[tuple[int, int]]:
    """Pair rank r with rank 2N+1-r; each pair is (larger-LP index, smaller-LP index)."""
    _check_even(len(lps))
    order = np.argsort(np.asarray(lps, dtype=float), kind="stable")
    L = len(order)
    return [(int(order[L - 1 - r]), int(order[r])) for r in range(L // 2)]


def _match_dp(W):
    """Exact maximum-weight perfect matching by dynamic programming over subsets."""
    L = W.shape[0]
    full = (1 << L) - 1

    @lru_cache(maxsize=None)
    def solve(mask):
        # always match the lowest free index; returns (value, partner)
        if mask == full:
            return 0.0, -1
        free = full & ~mask
        i = (free & -free).bit_length() - 1
        top, choice = -math.inf, -1
        for j in range(i + 1, L):
            if free >> j & 1:
                v = W[i, j] + solve(mask | (1 << i) | (1 << j))[0]
                if v > top:
                    top, choice = v, j
        return top, choice

    pairs, mask = [], 0
    while mask != full:
        free = full & ~mask
        i = (free & -free).bit_length() - 1
        j = solve(mask)[1]
        pairs.append((i, j))
        mask |= (1 << i) | (1 << j)
    return pairs


def _local_search(pairs, W):
    """2-swap improvement until no exchange of partners increases the objective."""
    pairs = [list(p) for p in pairs]
    improved = True
    while improved:
        improved = False
        for a in range(len(pairs)):
            for b in range(a + 1, len(pairs)):
                i, j = pairs[a]
                k, l = pairs[b]
                cur = W[i, j] + W[k, l]
                alt1 = W[i, k] + W[j, l]
                alt2 = W[i, l] + W[j, k]
                if alt1 > cur + 1e-15 and alt1 >= alt2:
                    pairs[a], pairs[b] = [i, k], [j, l]
                    improved = True
                elif alt2 > cur + 1e-15:
                    pairs[a], pairs[b] = [i, l], [j, k]
                    improved = True
    return [tuple(p) for p in pairs]


def match_optimal(lps, sizes=None, model: str = "instance") -> list[tuple[int, int]]:
    """Maximum-weight perfect matching on the pairing objective.

    Exact for up to ``EXACT_LIMIT`` bags; beyond that, sorted pairing refined
    by 2-swap local search (exact whenever the edge weights ignore sizes or
    all sizes are equal).
    """
    lps = np.asarray(lps, dtype=float)
    _check_even(lps.size)
    if sizes is None:
        sizes = np.ones(lps.size)
    W = _edge_weights(lps, sizes, model)
    if lps.size <= EXACT_LIMIT:
        raw = _match_dp(W)
    else:
        raw = _local_search(match_sorted(lps), W)
    return [(i, j) if lps[i] >= lps[j] else (j, i) for i, j in raw]


def _to_pairs(bags, matching):
    return [BagPair(bags[i], bags[j], (i,), (j,)) for i, j in matching]


def pair_sorted(bags: Sequence[Bag], model: str = "instance") -> list[BagPair]:
    """Sort by observed LP and pair extremes inward.

    Optimal when bag sizes are equal (or sizes are ignored). Under the
    instance model with unequal sizes this warns and uses :func:`pair_optimal`.
    """
    _check_even(len(bags))
    if model == "instance" and len({b.size for b in bags}) > 1:
        warnings.warn("bag sizes differ; sorted pairing is not optimal, using pair_optimal",
                      stacklevel=2)
        return pair_optimal(bags, model)
    return _to_pairs(bags, match_sorted([b.lp for b in bags]))


def pair_optimal(bags: Sequence[Bag], model: str = "instance") -> list[BagPair]:
    lps = [b.lp for b in bags]
    sizes = [b.size for b in bags]
    return _to_pairs(bags, match_optimal(lps, sizes, model))


def optimal_weights(pairs: Sequence[BagPair], model: str = "bag",
                    floor: float = GAP_FLOOR) -> np.ndarray:
    """Weights ``w_i`` proportional to ``nbar_i * gap_i^2`` (instance) or ``gap_i^2`` (bag).

    Pairs with gap below ``floor`` get weight exactly 0.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    gaps = np.array([p.gap for p in pairs], dtype=float)
    raw = gaps ** 2
    if model == "instance":
        raw = raw * np.array([p.nbar for p in pairs])
    raw[gaps < floor] = 0.0
    total = raw.sum()
    if not total > 0:
        raise DegeneratePairsError(
            f"all pairs degenerate: every label-proportion gap is below {floor:g}")
    return raw / total


# -- K-merging schemes ---------------------------------------------------------

@dataclass(frozen=True)
class MergedPair:
    """Index sets of small bags forming one pair of big bags."""

    plus_index: tuple[int, ...]
    minus_index: tuple[int, ...]
    lp_plus: float
    lp_minus: float

    @property
    def gap(self) -> float:
        return self.lp_plus - self.lp_minus

    @property
    def kappa(self) -> tuple[float, float]:
        return 1.0 - self.lp_plus, self.lp_minus

    def to_bag_pair(self, bags: Sequence[Bag]) -> BagPair:
        def union(idx, lp):
            return Bag(np.vstack([bags[i].instances for i in idx]), lp)

        return BagPair(union(self.plus_index, self.lp_plus),
                       union(self.minus_index, self.lp_minus),
                       self.plus_index, self.minus_index)


def _merge_setup(bags, K):
    if K < 1:
        raise ValueError("K must be a positive integer")
    L = len(bags)
    if L == 0 or L % (2 * K):
        raise ValueError(f"number of bags ({L}) must be a positive multiple of 2K = {2 * K}")
    if len({b.size for b in bags}) > 1:
        raise ValueError("merging schemes require equal bag sizes")
    return [b.lp for b in bags]


def _merged(plus, minus, lps):
    plus, minus = tuple(sorted(plus)), tuple(sorted(minus))
    K = len(plus)
    # fsum keeps the means correctly rounded, so equal index sets give equal LPs
    return MergedPair(plus, minus,
                      math.fsum(lps[i] for i in plus) / K,
                      math.fsum(lps[i] for i in minus) / K)


def merge_bp(bags: Sequence[Bag], K: int) -> list[MergedPair]:
    """Blockwise-pairwise merging.

    Each block of ``2K`` consecutive bags is read as ``K`` consecutive pairs;
    the member with the larger LP of each pair joins the positive big bag.
    Ties send the earlier bag to the positive side.
    """
    lps = _merge_setup(bags, K)
    out = []
    for start in range(0, len(lps), 2 * K):
        plus, minus = [], []
        for j in range(start, start + 2 * K, 2):
            if lps[j] >= lps[j + 1]:
                plus.append(j)
                minus.append(j + 1)
            else:
                plus.append(j + 1)
                minus.append(j)
        out.append(_merged(plus, minus, lps))
    return out


def merge_bm(bags: Sequence[Bag], K: int) -> list[MergedPair]:
    """Blockwise-max merging: the K largest LPs of each block form the positive big bag."""
    lps = _merge_setup(bags, K)
    out = []
    for start in range(0, len(lps), 2 * K):
        block = list(range(start, start + 2 * K))
        ranked = sorted(block, key=lambda j: (-lps[j], j))
        out.append(_merged(ranked[:K], ranked[K:], lps))
    return out


MERGERS = {"bp": merge_bp, "bm": merge_bm}


def check_dominates(scheme_a: Sequence[MergedPair], scheme_b: Sequence[MergedPair]) -> bool:
    """True iff every merged pair of ``scheme_a`` has a gap at least that of ``scheme_b``."""
    if len(scheme_a) != len(scheme_b):
        raise ValueError("merged outputs have different numbers of pairs")
    for a, b in zip(scheme_a, scheme_b):
        if len(a.plus_index) != len(b.plus_index) or \
                set(a.plus_index) | set(a.minus_index) != set(b.plus_index) | set(b.minus_index):
            raise ValueError("merged outputs do not share the same block structure")
    return all(a.gap >= b.gap for a, b in zip(scheme_a, scheme_b))


def pairing_report(pairs: Sequence[BagPair] | Sequence[MergedPair], weights, model="bag") -> dict:
    """JSON-ready description of a pairing or merge."""
    rows = []
    objective = 0.0
    for p, w in zip(pairs, weights):
        if isinstance(p, MergedPair):
            contrib = p.gap ** 2
            row = {"plus": list(p.plus_index), "minus": list(p.minus_index),
                   "lp_plus": p.lp_plus, "lp_minus": p.lp_minus}
        else:
            contrib = p.score(model)
            row = {"plus": list(p.plus_index), "minus": list(p.minus_index),
                   "lp_plus": p.plus.lp, "lp_minus": p.minus.lp, "nbar": p.nbar}
        row.update(kappa=list(p.kappa), gap=p.gap, weight=float(w), objective=contrib)
        objective += contrib
        rows.append(row)
    return {"model": model, "objective": objective, "pairs": rows}
