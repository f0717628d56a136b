"""Reference selectors: single best solver, virtual best solver, random forest.

The forest is a plain CART/Gini classification ensemble predicting the best
algorithm per instance from hand-crafted features. Each tree draws its own
generator from ``mix64(seed + tree_index)``, so serial and parallel training
produce the same model.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .aslib import Scenario
from .errors import ColumnMismatch
from .serialize import mix64

MAX_THRESHOLDS = 64


def single_best(scenario: Scenario, train_instances: Iterable[str]) -> int:
    idx = scenario.indices(train_instances)
    if idx.size == 0:
        raise ValueError("single best solver needs at least one training instance")
    return single_best_from_matrix(scenario.par10_matrix[idx])


def single_best_from_matrix(par10: np.ndarray) -> int:
    return int(np.argmin(np.asarray(par10, dtype=float).mean(axis=0)))


def virtual_best_par10(scenario: Scenario, instance: str) -> float:
    return float(scenario.par10_matrix[scenario.index_of(instance)].min())


def best_algorithm_labels(par10: np.ndarray) -> np.ndarray:
    """Per-instance argmin of PAR10, lowest index on ties."""
    return np.argmin(np.asarray(par10, dtype=float), axis=1)


# --- feature preprocessing ------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeaturePreprocessor:
    medians: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.medians)


def fit_preprocessor(features) -> FeaturePreprocessor:
    """Median imputation followed by standard scaling, fitted on training rows.

    Columns that are entirely missing impute to 0 and scale with mean 0,
    std 1; zero-variance columns scale with std 1.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a non-empty 2-D feature matrix")
    all_missing = np.all(np.isnan(x), axis=0)
    medians = np.zeros(x.shape[1])
    if (~all_missing).any():
        medians[~all_missing] = np.nanmedian(x[:, ~all_missing], axis=0)
    filled = np.where(np.isnan(x), medians, x)
    means = filled.mean(axis=0)
    stds = filled.std(axis=0)
    return FeaturePreprocessor(medians, means, stds)


def apply_preprocessor(pre: FeaturePreprocessor, rows) -> np.ndarray:
    x = np.asarray(rows, dtype=float)
    if x.shape[-1] != pre.n_features:
        raise ColumnMismatch(f"expected {pre.n_features} feature columns, got {x.shape[-1]}")
    filled = np.where(np.isnan(x), pre.medians, x)
    scale = np.where(pre.stds > 0, pre.stds, 1.0)
    return (filled - pre.means) / scale


# --- random forest ------------------------------------------------------


@dataclass(frozen=True)
class RandomForestConfig:
    n_trees: int = 100
    max_features: str = "sqrt"
    seed: int = 0
    bootstrap: bool = True  # False trains every tree on the full sample (test hook)

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_features != "sqrt":
            raise ValueError("only max_features='sqrt' is supported")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; leaves have ``feature == -1`` and carry ``label``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            rows = np.nonzero(f >= 0)[0]
            if rows.size == 0:
                return self.label[node]
            cur = node[rows]
            go_left = x[rows, f[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])


def _gini_sums(counts: np.ndarray) -> np.ndarray:
    """n * gini for each row of class counts, i.e. n - sum(c^2)/n."""
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = n - (counts**2).sum(axis=-1) / n
    return np.where(n > 0, g, 0.0)


def _candidate_thresholds(values: np.ndarray) -> np.ndarray:
    uniq = np.unique(values)
    if uniq.size < 2:
        return uniq[:0]
    mids = (uniq[:-1] + uniq[1:]) / 2.0
    if mids.size > MAX_THRESHOLDS:
        pick = np.unique(np.round(np.linspace(0, mids.size - 1, MAX_THRESHOLDS)).astype(int))
        mids = mids[pick]
    return mids


def _best_split(x: np.ndarray, y: np.ndarray, n_classes: int, feats: np.ndarray):
    """Return (feature, threshold) of the best Gini split or None if nothing improves."""
    parent = _gini_sums(np.bincount(y, minlength=n_classes).astype(float))
    best_score, best = parent, None
    onehot = np.eye(n_classes)[y]
    for f in feats:
        col = x[:, f]
        thresholds = _candidate_thresholds(col)
        if thresholds.size == 0:
            continue
        order = np.argsort(col, kind="stable")
        cum = np.vstack([np.zeros(n_classes), np.cumsum(onehot[order], axis=0)])
        pos = np.searchsorted(col[order], thresholds, side="right")
        left = cum[pos]
        right = cum[-1] - left
        score = _gini_sums(left) + _gini_sums(right)
        k = int(np.argmin(score))
        # strict improvement with a relative tolerance against rounding noise
        if score[k] < best_score - 1e-12 * max(1.0, parent):
            best_score, best = score[k], (int(f), float(thresholds[k]))
    return best


def _grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, rng: np.random.Generator) -> Tree:
    n_feat = x.shape[1]
    m = max(1, int(np.ceil(np.sqrt(n_feat)))) if n_feat else 0
    feature, threshold, left, right, label = [], [], [], [], []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        label.append(0)
        return len(feature) - 1

    stack = [(new_node(), np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        ys = y[rows]
        counts = np.bincount(ys, minlength=n_classes)
        label[node] = int(np.argmax(counts))
        if counts.max() == len(rows) or m == 0:
            continue
        feats = rng.choice(n_feat, size=m, replace=False)
        split = _best_split(x[rows], ys, n_classes, feats)
        if split is None:
            continue
        f, t = split
        go_left = x[rows, f] <= t
        feature[node], threshold[node] = f, t
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], rows[~go_left]))
        stack.append((left[node], rows[go_left]))

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(label, dtype=np.int64),
    )


@dataclass(frozen=True, eq=False)
class RandomForestModel:
    trees: tuple[Tree, ...]
    n_features: int
    n_classes: int

    def votes(self, rows) -> np.ndarray:
        """Per-row vote counts over classes, shape ``(n_rows, n_classes)``."""
        x = np.atleast_2d(np.asarray(rows, dtype=float))
        if x.shape[1] != self.n_features:
            raise ColumnMismatch(f"expected {self.n_features} columns, got {x.shape[1]}")
        out = np.zeros((x.shape[0], self.n_classes))
        for tree in self.trees:
            out[np.arange(x.shape[0]), tree.predict(x)] += 1
        return out

    def predict(self, rows) -> np.ndarray:
        return np.argmax(self.votes(rows), axis=1)


def rf_train(
    features,
    labels: Sequence[int],
    cfg: RandomForestConfig = RandomForestConfig(),
    n_classes: int | None = None,
    jobs: int = 1,
) -> RandomForestModel:
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or y.size == 0:
        raise ValueError("need matching, non-empty feature rows and labels")
    if np.isnan(x).any():
        raise ValueError("features must be imputed before training")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    n = len(y)

    def one_tree(t: int) -> Tree:
        rng = np.random.default_rng(mix64(cfg.seed + t))
        rows = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        return _grow_tree(x[rows], y[rows], n_classes, rng)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = tuple(pool.map(one_tree, range(cfg.n_trees)))
    else:
        trees = tuple(one_tree(t) for t in range(cfg.n_trees))
    return RandomForestModel(trees, x.shape[1], n_classes)


def rf_predict(model: RandomForestModel, row) -> int:
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise ColumnMismatch("rf_predict takes a single feature row")
    return int(model.predict(row[None, :])[0])


# --- model files ------------------------------------------------------------

_MAGIC = b"ZFRF"
_VERSION = 1


def save_forest(model: RandomForestModel, path: str | Path) -> None:
    """Write ``ZFRF`` | version | n_trees | n_features | n_classes, then per tree its node arrays."""
    parts = [_MAGIC, struct.pack("<IIII", _VERSION, len(model.trees), model.n_features, model.n_classes)]
    for tree in model.trees:
        parts.append(struct.pack("<I", len(tree.feature)))
        parts.append(tree.feature.astype("<i8").tobytes())
        parts.append(tree.threshold.astype("<f8").tobytes())
        parts.append(tree.left.astype("<i8").tobytes())
        parts.append(tree.right.astype("<i8").tobytes())
        parts.append(tree.label.astype("<i8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_forest(path: str | Path) -> RandomForestModel:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path} is not a forest file")
    version, n_trees, n_features, n_classes = struct.unpack_from("<IIII", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported forest file version {version}")
    off = 20
    trees = []
    for _ in range(n_trees):
        (nodes,) = struct.unpack_from("<I", data, off)
        off += 4
        arrays = []
        for dtype in ("<i8", "<f8", "<i8", "<i8", "<i8"):
            arrays.append(np.frombuffer(data, dtype=dtype, count=nodes, offset=off).astype(dtype[1:]))
            off += 8 * nodes
        trees.append(Tree(*arrays))
    return RandomForestModel(tuple(trees), n_features, n_classes)
