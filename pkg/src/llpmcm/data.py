"""CSV ingestion, standardisation, and bag assembly from labeled data."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bags import Bag, LPDistribution, empirical_lp, sample_lps
from .exceptions import ConfigError, LLPError

log = logging.getLogger(__name__)

MISSING = {"", "?", "NA", "NaN", "nan"}


@dataclass
class Schema:
    """Column roles for a CSV file.

    ``columns`` maps name to ``"numeric"`` or ``"categorical"``; categorical
    columns may list their categories (otherwise they are collected from the
    file in sorted order).
    """

    label: str
    positive: str
    columns: dict[str, str] = field(default_factory=dict)
    categories: dict[str, list[str]] = field(default_factory=dict)
    names: list[str] | None = None  # set for header-less files

    @classmethod
    def parse(cls, text: str) -> "Schema":
        """Parse ``key: value`` lines.

        ``label``, ``positive`` and ``names`` are reserved keys; every other key
        is a column name with value ``numeric``, ``categorical`` or
        ``categorical(a, b, c)``. ``names`` lists every column of a file that
        has no header row. Columns not mentioned are ignored. Blank lines and
        ``#`` comments are ignored.
        """
        label = positive = names = None
        cols, cats = {}, {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise ConfigError(f"schema line {lineno}: expected 'key: value'")
            key, value = key.strip(), value.strip()
            if key == "label":
                label = value
            elif key == "positive":
                positive = value
            elif key == "names":
                names = [n.strip() for n in value.split(",") if n.strip()]
            elif value == "numeric":
                cols[key] = "numeric"
            elif value.startswith("categorical"):
                cols[key] = "categorical"
                inner = value[len("categorical"):].strip()
                if inner:
                    if not (inner.startswith("(") and inner.endswith(")")):
                        raise ConfigError(f"schema line {lineno}: bad category list {inner!r}")
                    cats[key] = [c.strip() for c in inner[1:-1].split(",") if c.strip()]
            else:
                raise ConfigError(f"schema line {lineno}: unknown column kind {value!r}")
        if label is None or positive is None:
            raise ConfigError("schema must name 'label' and 'positive'")
        return cls(label, positive, cols, cats, names)

    @classmethod
    def load(cls, path) -> "Schema":
        try:
            return cls.parse(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read schema {path}: {exc}") from exc


@dataclass(eq=False)
class Dataset:
    """Encoded features (one-hot for categoricals) and +-1 labels."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    numeric: np.ndarray  # bool mask over columns of X
    standardization: dict | None = None

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.numeric,
                       self.standardization)


def load_csv(path, schema: Schema) -> Dataset:
    """Parse a headed CSV into a :class:`Dataset`; rows with missing values are dropped."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"dataset not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        if schema.names is not None:
            header, first_line = list(schema.names), 1
        else:
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise LLPError(f"{path}: empty file") from None
            first_line = 2
        for name in [schema.label, *schema.columns]:
            if name not in header:
                raise LLPError(f"{path}: column {name!r} not in header")
        pos = {h: i for i, h in enumerate(header)}
        rows, dropped = [], 0
        for lineno, raw in enumerate(reader, first_line):
            if not raw or all(not c.strip() for c in raw) or raw[0].startswith("|"):
                continue
            if len(raw) != len(header):
                raise LLPError(f"{path}:{lineno}: expected {len(header)} fields, got {len(raw)}")
            vals = [c.strip() for c in raw]
            if any(vals[pos[n]] in MISSING for n in [schema.label, *schema.columns]):
                dropped += 1
                continue
            rows.append((lineno, vals))
    if dropped:
        log.warning("%s: dropped %d rows with missing values", path, dropped)
    if not rows:
        raise LLPError(f"{path}: no complete rows")

    y = np.array([1 if v[pos[schema.label]].rstrip(".") == schema.positive.rstrip(".") else -1
                  for _, v in rows])
    blocks, names, numeric = [], [], []
    for name, kind in schema.columns.items():
        col = [(ln, v[pos[name]]) for ln, v in rows]
        if kind == "numeric":
            out = np.empty(len(col))
            for k, (ln, s) in enumerate(col):
                try:
                    out[k] = float(s)
                except ValueError:
                    raise LLPError(f"{path}:{ln}: column {name!r}: cannot parse {s!r} as a number") from None
            blocks.append(out[:, None])
            names.append(name)
            numeric.append(True)
        else:
            cats = schema.categories.get(name) or sorted({s for _, s in col})
            index = {c: i for i, c in enumerate(cats)}
            out = np.zeros((len(col), len(cats)))
            for k, (ln, s) in enumerate(col):
                if s not in index:
                    raise LLPError(f"{path}:{ln}: column {name!r}: unknown category {s!r}")
                out[k, index[s]] = 1.0
            blocks.append(out)
            names.extend(f"{name}={c}" for c in cats)
            numeric.extend([False] * len(cats))
    X = np.hstack(blocks) if blocks else np.empty((len(rows), 0))
    return Dataset(X, y, names, np.array(numeric, dtype=bool))


def fit_standardization(ds: Dataset) -> dict:
    cols = np.flatnonzero(ds.numeric)
    mean = ds.X[:, cols].mean(axis=0)
    std = ds.X[:, cols].std(axis=0)
    bad = [ds.feature_names[c] for c, s in zip(cols, std) if s == 0]
    if bad:
        raise LLPError(f"zero-variance numeric column(s): {', '.join(bad)}")
    return {"columns": cols.tolist(), "mean": mean.tolist(), "std": std.tolist(),
            "fitted_on_rows": len(ds)}


def preprocess(ds: Dataset, params: dict | None = None) -> Dataset:
    """Standardise numeric columns to mean 0, variance 1.

    Pass ``params`` from the training split to transform a test split; without
    it the parameters are fitted on ``ds`` itself. One-hot columns pass through.
    """
    params = fit_standardization(ds) if params is None else params
    X = ds.X.copy()
    cols = params["columns"]
    X[:, cols] = (X[:, cols] - np.asarray(params["mean"])) / np.asarray(params["std"])
    return Dataset(X, ds.y.copy(), ds.feature_names, ds.numeric, params)


@dataclass(eq=False)
class Assembled:
    bags: list[Bag]
    test: Dataset
    lps: np.ndarray
    train_rows: np.ndarray


def assemble_bags(ds: Dataset, bag_size: int, lp_dist: LPDistribution, total: int | None = None,
                  seed: int = 0, n_bags: int | None = None, standardize: bool = True) -> Assembled:
    """Build bags with prescribed label proportions from a labeled dataset.

    Fixed-T design: ``total`` instances, ``total / bag_size`` bags. Fixed-N
    design: pass ``n_bags`` instead. Each bag gets ``round(n * gamma)``
    positives drawn without replacement from the class pools; everything not
    used for training becomes the test set. Standardisation is fitted on the
    training rows only.
    """
    if n_bags is None:
        if total is None or total % bag_size:
            raise ConfigError("total must be a multiple of the bag size")
        n_bags = total // bag_size
    rng = np.random.default_rng(seed)
    lps = sample_lps(lp_dist, n_bags, int(rng.integers(2**31)))
    counts = np.floor(bag_size * lps + 0.5).astype(int)
    pos_pool = rng.permutation(np.flatnonzero(ds.y == 1))
    neg_pool = rng.permutation(np.flatnonzero(ds.y == -1))
    need_pos, need_neg = int(counts.sum()), int((bag_size - counts).sum())
    if need_pos > pos_pool.size or need_neg > neg_pool.size:
        raise LLPError(f"class pool exhausted: need {need_pos} positives / {need_neg} negatives, "
                       f"have {pos_pool.size} / {neg_pool.size}")
    rows, p, q = [], 0, 0
    for c in counts:
        idx = np.r_[pos_pool[p:p + c], neg_pool[q:q + bag_size - c]]
        p, q = p + c, q + bag_size - c
        rows.append(rng.permutation(idx))
    train_rows = np.concatenate(rows)
    test_mask = np.ones(len(ds), dtype=bool)
    test_mask[train_rows] = False
    if standardize and ds.numeric.any():
        params = fit_standardization(ds.subset(train_rows))
        ds = preprocess(ds, params)
    bags = [Bag(ds.X[r], empirical_lp(ds.y[r]), true_lp=float(g), hidden_labels=ds.y[r])
            for r, g in zip(rows, lps)]
    return Assembled(bags, ds.subset(np.flatnonzero(test_mask)), lps, train_rows)


def save_test_set(path, X, y) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header = ",".join([f"x{k}" for k in range(X.shape[1])] + ["label"])
    np.savetxt(path, np.column_stack([X, y]), delimiter=",", header=header, comments="", fmt="%.17g")


def load_test_set(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"test set not found: {path}")
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, :-1], arr[:, -1].astype(int)
