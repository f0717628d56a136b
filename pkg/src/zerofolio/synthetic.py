"""Synthetic scenarios with known structure, for tests and sanity experiments.

Instances fall into well-separated clusters in embedding space; each cluster
is dominated by one algorithm. Every seed perturbs the embeddings with its own
jitter, standing in for the variation that different line shuffles induce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aslib import Scenario
from .embed import PrecomputedEmbeddings


@dataclass(frozen=True)
class ClusterScenarioConfig:
    n_clusters: int = 3
    n_per_cluster: int = 40
    dim: int = 8
    n_folds: int = 10
    separation: float = 20.0
    spread: float = 1.0
    seed_jitter: float = 1.0
    seeds: tuple[int, ...] = (0, 1)
    label_noise: float = 0.0
    cutoff: float = 100.0
    rng_seed: int = 0


def _runtime_row(rng: np.random.Generator, n_alg: int, best: int, cutoff: float):
    runtimes = np.empty(n_alg)
    solved = np.ones(n_alg, dtype=bool)
    for a in range(n_alg):
        if a == best:
            runtimes[a] = rng.uniform(1.0, 0.1 * cutoff)
        elif rng.random() < 0.5:
            runtimes[a] = rng.uniform(0.2 * cutoff, 0.9 * cutoff)
        else:
            runtimes[a] = cutoff
            solved[a] = False
    return runtimes, solved


def clustered_scenario(cfg: ClusterScenarioConfig = ClusterScenarioConfig()):
    """Return ``(scenario, embeddings, true_cluster)`` for the given configuration.

    With ``label_noise > 0`` that fraction of instances gets a runtime profile
    dominated by a different cluster's algorithm, while keeping its embedding.
    """
    if cfg.dim < cfg.n_clusters:
        raise ValueError("dim must be at least n_clusters")
    rng = np.random.default_rng(cfg.rng_seed)
    n_alg = cfg.n_clusters
    n = cfg.n_clusters * cfg.n_per_cluster
    cluster = np.repeat(np.arange(cfg.n_clusters), cfg.n_per_cluster)
    centers = np.zeros((cfg.n_clusters, cfg.dim))
    centers[np.arange(cfg.n_clusters), np.arange(cfg.n_clusters)] = cfg.separation
    base = centers[cluster] + cfg.spread * rng.normal(size=(n, cfg.dim))

    best = cluster.copy()
    n_noisy = int(round(cfg.label_noise * n))
    if n_noisy:
        noisy = rng.choice(n, size=n_noisy, replace=False)
        best[noisy] = (cluster[noisy] + rng.integers(1, n_alg, size=n_noisy)) % n_alg

    runtimes = np.empty((n, n_alg))
    solved = np.empty((n, n_alg), dtype=bool)
    for i in range(n):
        runtimes[i], solved[i] = _runtime_row(rng, n_alg, best[i], cfg.cutoff)

    ids = [f"inst{i:04d}" for i in range(n)]
    fold_of = np.empty(n, dtype=int)
    fold_of[rng.permutation(n)] = np.arange(n) % cfg.n_folds + 1
    scenario = Scenario(
        name="SYNTH-CLUSTERS",
        algorithms=tuple(f"alg{a}" for a in range(n_alg)),
        cutoff_seconds=cfg.cutoff,
        instances=tuple(ids),
        runtimes=runtimes,
        solved=solved,
        folds=dict(zip(ids, fold_of.tolist())),
        features=base[:, : min(3, cfg.dim)] + rng.normal(size=(n, min(3, cfg.dim))),
        feature_names=tuple(f"f{j}" for j in range(min(3, cfg.dim))),
    )
    vectors = {}
    for s in cfg.seeds:
        jitter = np.random.default_rng([cfg.rng_seed, s]).normal(size=(n, cfg.dim))
        emb = base + cfg.seed_jitter * jitter
        vectors[s] = dict(zip(ids, emb))
    return scenario, PrecomputedEmbeddings(vectors), cluster
