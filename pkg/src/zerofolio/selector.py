"""Weighted k-nearest-neighbour algorithm selection over instance embeddings.

For a query embedding ``e`` the score of algorithm ``a`` is
``sum_i w_i * t[i, a]`` over the ``k`` nearest training instances, where
``t`` holds training PAR10 values and ``w_i = 1 / dist(e, e_i)`` (or 1 under
uniform weighting). The algorithm with the lowest score is selected.

Conventions used throughout:

* ties (neighbour distances, equal scores) go to the lowest index;
* if any neighbour sits at distance exactly 0, only the zero-distance
  neighbours vote, with equal weight;
* ``k`` larger than the training set is clamped to its size.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet, InvalidAlpha, LengthMismatch


class Metric(str, enum.Enum):
    MANHATTAN = "manhattan"
    COSINE = "cosine"


class Weighting(str, enum.Enum):
    INVERSE_DISTANCE = "inverse"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class SelectorConfig:
    k: int = 10
    metric: Metric = Metric.MANHATTAN
    weighting: Weighting = Weighting.INVERSE_DISTANCE

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "weighting", Weighting(self.weighting))


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"dimension {a.shape[-1]} != {b.shape[-1]}")


def manhattan_distance(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_dims(a, b)
    return float(np.abs(a - b).sum())


def cosine_distance(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_dims(a, b)
    return float(pairwise_distances(a, b[None, :], Metric.COSINE)[0])


def pairwise_distances(query: np.ndarray, points: np.ndarray, metric: Metric) -> np.ndarray:
    """Distances from one query to each row of ``points``."""
    query = np.asarray(query, dtype=float)
    points = np.asarray(points, dtype=float)
    _check_dims(query, points)
    if metric is Metric.MANHATTAN:
        return np.abs(points - query).sum(axis=1)
    qn = np.linalg.norm(query)
    pn = np.linalg.norm(points, axis=1)
    denom = qn * pn
    with np.errstate(invalid="ignore", divide="ignore"):
        d = 1.0 - (points @ query) / denom
    d[denom == 0] = 1.0
    # rounding can push 1 - cos slightly outside [0, 2], or leave an exact
    # duplicate a hair above 0; pin both so the zero-distance rule applies
    np.clip(d, 0.0, 2.0, out=d)
    d[np.all(points == query, axis=1) & (denom > 0)] = 0.0
    return d


@dataclass(frozen=True, eq=False)
class TrainedSelector:
    embeddings: np.ndarray  # (n_train, D)
    par10: np.ndarray  # (n_train, n_algorithms)
    config: SelectorConfig = SelectorConfig()

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=float)
        par = np.asarray(self.par10, dtype=float)
        if emb.ndim != 2 or par.ndim != 2:
            raise ValueError("embeddings and par10 must be 2-D arrays")
        if emb.shape[0] != par.shape[0]:
            raise LengthMismatch(f"{emb.shape[0]} embeddings but {par.shape[0]} PAR10 rows")
        if np.any(par < 0):
            raise ValueError("PAR10 values must be non-negative")
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "par10", par)

    @property
    def n_algorithms(self) -> int:
        return self.par10.shape[1]

    def scores(self, query) -> np.ndarray:
        return score_algorithms(query, self)

    def select(self, query) -> int:
        return select(self.scores(query))


def nearest_neighbors(query, sel: TrainedSelector) -> list[tuple[int, float]]:
    n = sel.embeddings.shape[0]
    if n == 0:
        raise EmptyTrainingSet("no training instances")
    dist = pairwise_distances(query, sel.embeddings, sel.config.metric)
    order = np.argsort(dist, kind="stable")[: min(sel.config.k, n)]
    return [(int(i), float(dist[i])) for i in order]


def neighbor_weights(distances: np.ndarray, weighting: Weighting) -> np.ndarray:
    distances = np.asarray(distances, dtype=float)
    zero = distances == 0
    if zero.any():
        return zero.astype(float)
    if weighting is Weighting.UNIFORM:
        return np.ones_like(distances)
    return 1.0 / distances


def score_algorithms(query, sel: TrainedSelector) -> np.ndarray:
    nbrs = nearest_neighbors(query, sel)
    idx = np.array([i for i, _ in nbrs])
    w = neighbor_weights(np.array([d for _, d in nbrs]), sel.config.weighting)
    return w @ sel.par10[idx]


def select(scores) -> int:
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("no scores to select from")
    return int(np.argmin(scores))


def vote_scores(per_seed: Sequence[np.ndarray]) -> np.ndarray:
    if not per_seed:
        raise ValueError("need at least one score vector")
    lengths = {len(s) for s in per_seed}
    if len(lengths) != 1:
        raise LengthMismatch(f"score vectors of lengths {sorted(lengths)}")
    stacked = np.asarray(per_seed, dtype=float)
    # shifted mean: exact when every seed agrees, and no worse than a plain mean otherwise
    base = stacked[0]
    dev = stacked - base
    return base + np.array([math.fsum(col) for col in dev.T]) / len(stacked)


def minmax_normalize(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        return np.zeros_like(scores)
    return (scores - lo) / (hi - lo)


def hybrid_soft_vote(a, b, alpha: float = 0.5) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidAlpha(f"alpha must lie in [0, 1], got {alpha}")
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"score vectors of lengths {len(a)} and {len(b)}")
    return alpha * minmax_normalize(a) + (1.0 - alpha) * minmax_normalize(b)


def concatenate_features(embeddings: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Join embeddings with (already standardized) hand-crafted features column-wise."""
    embeddings = np.atleast_2d(embeddings)
    features = np.atleast_2d(features)
    if embeddings.shape[0] != features.shape[0]:
        raise LengthMismatch("embedding and feature row counts differ")
    return np.hstack([embeddings, features])
