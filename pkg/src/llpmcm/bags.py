"""Bags, class-conditional samplers, label-proportion generators and the bag manifest format."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .exceptions import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Bag:
    """An unlabeled group of instances annotated with its observed label proportion.

    ``true_lp`` and ``hidden_labels`` are set only by simulators and are never
    read by the training code.
    """

    instances: np.ndarray
    lp: float
    true_lp: float | None = None
    hidden_labels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.instances, dtype=float))
        if X.shape[0] < 1:
            raise ValueError("a bag needs at least one instance")
        if not 0.0 <= self.lp <= 1.0:
            raise ValueError(f"label proportion {self.lp} outside [0, 1]")
        X.setflags(write=False)
        object.__setattr__(self, "instances", X)

    @property
    def size(self) -> int:
        return self.instances.shape[0]

    @property
    def dim(self) -> int:
        return self.instances.shape[1]


def empirical_lp(labels: Sequence[int]) -> float:
    """Fraction of +1 labels, computed exactly then rounded once."""
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("cannot compute the label proportion of an empty bag")
    if not np.all(np.isin(y, (-1, 1))):
        raise ValueError("labels must be +1 or -1")
    return float(Fraction(int(np.sum(y == 1)), int(y.size)))


# -- class conditionals -------------------------------------------------------

class Sampler(Protocol):
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray: ...


@dataclass(frozen=True)
class Gaussian:
    """Isotropic Gaussian ``N(mean, scale^2 I)``."""

    mean: tuple[float, ...]
    scale: float = 1.0

    def sample(self, rng, size):
        mu = np.asarray(self.mean, dtype=float)
        return mu + self.scale * rng.standard_normal((size, mu.size))

    @property
    def dim(self):
        return len(self.mean)


@dataclass(frozen=True)
class Uniform01:
    """Uniform density on [0, 1]."""

    def sample(self, rng, size):
        return rng.random((size, 1))

    def cdf(self, x):
        return np.clip(x, 0.0, 1.0)

    dim = 1


@dataclass(frozen=True)
class Triangular01:
    """Density 2x on [0, 1]; sampled as sqrt(U)."""

    def sample(self, rng, size):
        return np.sqrt(rng.random((size, 1)))

    def cdf(self, x):
        return np.clip(x, 0.0, 1.0) ** 2

    dim = 1


@dataclass(frozen=True)
class ClassConditionals:
    positive: Sampler
    negative: Sampler

    def sample(self, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw one instance per label from ``P_{label}``, independently given the labels."""
        labels = np.asarray(labels)
        n_pos = int(np.sum(labels == 1))
        Xp = self.positive.sample(rng, n_pos)
        Xn = self.negative.sample(rng, labels.size - n_pos)
        X = np.empty((labels.size, Xp.shape[1] if n_pos else Xn.shape[1]))
        X[labels == 1] = Xp
        X[labels != 1] = Xn
        return X


def gaussian_pair(dim: int = 2, separation: float = 1.0, scale: float = 1.0) -> ClassConditionals:
    """Gaussians centred at ``+-(separation, ..., separation)``."""
    mu = (float(separation),) * dim
    return ClassConditionals(Gaussian(mu, scale), Gaussian(tuple(-m for m in mu), scale))


# -- label-proportion distributions ------------------------------------------

@dataclass(frozen=True)
class LPDistribution:
    """Generator of true label proportions.

    kind ``constant`` uses ``value``; ``uniform`` draws iid from ``[low, high]``;
    ``walk`` is the correlated walk ``g_{j+1} = g_j + clamp(w_j, -g_j, 1 - g_j)``
    with ``w_j ~ U(-scale, scale)`` started at ``start``.
    """

    kind: str = "uniform"
    low: float = 0.0
    high: float = 0.5
    value: float = 0.5
    scale: float = 1.0
    start: float = 0.5

    def __post_init__(self):
        if self.kind == "uniform":
            if not 0.0 <= self.low <= self.high <= 1.0:
                raise ValueError(f"invalid uniform range [{self.low}, {self.high}]")
        elif self.kind == "constant":
            if not 0.0 <= self.value <= 1.0:
                raise ValueError(f"constant LP {self.value} outside [0, 1]")
        elif self.kind == "walk":
            if self.scale <= 0 or not 0.0 <= self.start <= 1.0:
                raise ValueError("walk needs scale > 0 and start in [0, 1]")
        else:
            raise ValueError(f"unknown LP distribution kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "LPDistribution":
        """Parse ``constant:0.5``, ``uniform:0,0.5`` or ``walk:0.3`` (optionally ``walk:0.3,0.5``)."""
        kind, _, args = text.partition(":")
        try:
            vals = [float(v) for v in args.split(",") if v.strip()]
            if kind == "constant":
                return cls("constant", value=vals[0])
            if kind == "uniform":
                return cls("uniform", low=vals[0], high=vals[1])
            if kind == "walk":
                return cls("walk", scale=vals[0], start=vals[1] if len(vals) > 1 else 0.5)
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"bad LP distribution {text!r}: {exc}") from exc
        raise ConfigError(f"unknown LP distribution {text!r}")

    def __str__(self):
        if self.kind == "constant":
            return f"constant:{self.value:g}"
        if self.kind == "uniform":
            return f"uniform:{self.low:g},{self.high:g}"
        return f"walk:{self.scale:g},{self.start:g}"


def walk_step(gamma: float, w: float) -> float:
    """One step of the truncated walk: the increment is clamped to ``[-gamma, 1 - gamma]``."""
    return gamma + min(max(w, -gamma), 1.0 - gamma)


def sample_lps(dist: LPDistribution, count: int, seed: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    if dist.kind == "constant":
        return np.full(count, dist.value)
    if dist.kind == "uniform":
        return rng.uniform(dist.low, dist.high, size=count)
    out = np.empty(count)
    g = dist.start
    w = rng.uniform(-dist.scale, dist.scale, size=count)
    for j in range(count):
        out[j] = g
        g = walk_step(g, w[j])
    return out


# -- bag samplers --------------------------------------------------------------

def _bag_from_labels(labels, gamma, cc, rng) -> Bag:
    X = cc.sample(labels, rng)
    return Bag(X, empirical_lp(labels), true_lp=float(gamma), hidden_labels=labels)


def sample_bag_ciim(gamma: float, n: int, cc: ClassConditionals, seed) -> Bag:
    """Labels iid Bernoulli(gamma), then each instance drawn from its class conditional."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma {gamma} outside [0, 1]")
    rng = np.random.default_rng(seed)
    labels = np.where(rng.random(n) < gamma, 1, -1)
    return _bag_from_labels(labels, gamma, cc, rng)


def draw_count_cibm(gamma: float, n: int, rho: float, rng: np.random.Generator) -> int:
    """Positive count from a Beta-Binomial with mean ``n * gamma`` and intra-bag correlation ``rho``.

    ``rho = 0`` is Binomial(n, gamma); ``rho = 1`` gives all-equal labels.
    """
    if gamma <= 0.0 or gamma >= 1.0 or rho <= 0.0:
        return int(rng.binomial(n, gamma))
    if rho >= 1.0:
        return n if rng.random() < gamma else 0
    c = (1.0 - rho) / rho
    p = rng.beta(gamma * c, (1.0 - gamma) * c)
    return int(rng.binomial(n, p))


def sample_bag_cibm(gamma: float, n: int, cc: ClassConditionals, rho: float, seed) -> Bag:
    """Label-dependent bag: exchangeable labels with E[lp] = gamma, instances independent given labels."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma {gamma} outside [0, 1]")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"dependence rho {rho} outside [0, 1]")
    rng = np.random.default_rng(seed)
    count = draw_count_cibm(gamma, n, rho, rng)
    labels = np.full(n, -1)
    labels[rng.permutation(n)[:count]] = 1
    return _bag_from_labels(labels, gamma, cc, rng)


def simulate_bags(lps: Sequence[float], n: int, cc: ClassConditionals, seed: int,
                  model: str = "ciim", rho: float = 0.0) -> list[Bag]:
    """One bag per label proportion; bag ``i`` uses the seed ``(seed, i)``."""
    bags = []
    for i, g in enumerate(lps):
        s = (seed, i)
        if model == "ciim":
            bags.append(sample_bag_ciim(float(g), n, cc, s))
        elif model == "cibm":
            bags.append(sample_bag_cibm(float(g), n, cc, rho, s))
        else:
            raise ValueError(f"unknown bag model {model!r}")
    return bags


# -- manifest I/O --------------------------------------------------------------

MANIFEST = "manifest.csv"


def save_bags(bags: Sequence[Bag], directory, hidden: bool = True) -> Path:
    """Write one CSV per bag plus ``manifest.csv`` (bag_id, n, lp, file).

    Simulation ground truth (true LP and hidden labels) goes to a separate
    ``hidden/`` directory that the loader never reads.
    """
    out = Path(directory)
    (out / "bags").mkdir(parents=True, exist_ok=True)
    rows = []
    for i, bag in enumerate(bags):
        name = f"bags/bag_{i:05d}.csv"
        header = [f"x{k}" for k in range(bag.dim)]
        np.savetxt(out / name, bag.instances, delimiter=",", header=",".join(header),
                   comments="", fmt="%.17g")
        rows.append((i, bag.size, repr(float(bag.lp)), name))
    with open(out / MANIFEST, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bag_id", "n", "lp", "file"])
        w.writerows(rows)
    if hidden and any(b.hidden_labels is not None for b in bags):
        (out / "hidden").mkdir(exist_ok=True)
        with open(out / "hidden" / "labels.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bag_id", "true_lp", "labels"])
            for i, bag in enumerate(bags):
                labels = "" if bag.hidden_labels is None else " ".join(map(str, bag.hidden_labels))
                w.writerow([i, "" if bag.true_lp is None else repr(bag.true_lp), labels])
    return out / MANIFEST


def load_bags(directory) -> list[Bag]:
    """Read a manifest directory; only features and observed LPs are loaded."""
    root = Path(directory)
    path = root / MANIFEST if root.is_dir() else root
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    bags = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                X = np.loadtxt(path.parent / row["file"], delimiter=",", skiprows=1, ndmin=2)
                n, lp = int(row["n"]), float(row["lp"])
            except (KeyError, ValueError, OSError) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            if X.shape[0] != n:
                raise ConfigError(f"{path}:{lineno}: manifest says n={n}, file has {X.shape[0]} rows")
            bags.append(Bag(X, lp))
    if not bags:
        raise ConfigError(f"manifest {path} lists no bags")
    return bags
