"""Embedding backends and per-fold embedding sources.

Two backends share one contract (one finite vector per text, constant
dimensionality): an OpenAI-compatible ``POST /embeddings`` client and the
offline hashed TF-IDF model from :mod:`zerofolio.tfidf`.
"""

from __future__ import annotations

import enum
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import httpx
import numpy as np

from .errors import AuthError, BackendError, DimensionMismatch, RateLimited
from .tfidf import TfIdfModel, bucket_counts, fit_corpus, fit_from_counts

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "ZEROFOLIO_API_KEY"


class BackendKind(str, enum.Enum):
    REMOTE = "remote"
    TFIDF = "tfidf"


@dataclass(frozen=True)
class BackendConfig:
    kind: BackendKind = BackendKind.TFIDF
    model_id: str = ""
    endpoint_url: str = ""
    dimensions: int = 3072
    ngram_range: tuple[int, int] = (2, 4)
    max_parallel: int = 8
    max_retries: int = 5
    batch_size: int = 64
    backoff_seconds: float = 1.0
    timeout_seconds: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BackendKind(self.kind))
        object.__setattr__(self, "ngram_range", tuple(self.ngram_range))
        if self.kind is BackendKind.REMOTE and not (self.model_id and self.endpoint_url):
            raise ValueError("remote backend needs model_id and endpoint_url")
        lo, hi = self.ngram_range
        if not 1 <= lo <= hi:
            raise ValueError(f"invalid ngram_range {self.ngram_range}")
        if self.dimensions < 1 or self.max_parallel < 1 or self.batch_size < 1 or self.max_retries < 0:
            raise ValueError("dimensions, max_parallel and batch_size must be positive")

    @property
    def cache_model_id(self) -> str:
        if self.kind is BackendKind.REMOTE:
            return self.model_id
        lo, hi = self.ngram_range
        return f"tfidf-d{self.dimensions}-n{lo}-{hi}"


# --- remote backend ----------------------------------------------------------

_RETRYABLE = {408, 409, 429}


def _embeddings_url(endpoint: str) -> str:
    endpoint = endpoint.rstrip("/")
    return endpoint if endpoint.endswith("/embeddings") else endpoint + "/embeddings"


def _post_batch(
    client: httpx.Client, url: str, texts: Sequence[str], config: BackendConfig
) -> list[list[float]]:
    payload = {"model": config.model_id, "input": list(texts)}
    last_status, last_body = None, ""
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(config.backoff_seconds * 2 ** (attempt - 1))
        try:
            resp = client.post(url, json=payload)
        except httpx.TransportError as exc:
            last_status, last_body = None, str(exc)
            log.debug("transport error on attempt %d: %s", attempt + 1, exc)
            continue
        if resp.status_code in (401, 403):
            raise AuthError(resp.status_code, resp.text)
        if resp.status_code in _RETRYABLE or resp.status_code >= 500:
            last_status, last_body = resp.status_code, resp.text
            log.debug("retryable status %d on attempt %d", resp.status_code, attempt + 1)
            continue
        if resp.status_code != 200:
            raise BackendError(resp.status_code, resp.text)
        try:
            data = resp.json()["data"]
            if all("index" in item for item in data):
                data = sorted(data, key=lambda item: item["index"])
            vectors = [item["embedding"] for item in data]
        except (ValueError, KeyError, TypeError):
            raise BackendError(resp.status_code, resp.text) from None
        if len(vectors) != len(texts):
            raise BackendError(resp.status_code, f"expected {len(texts)} embeddings, got {len(vectors)}")
        return vectors
    if last_status == 429:
        raise RateLimited(429, last_body)
    raise BackendError(last_status, last_body)


def embed_remote(
    texts: Sequence[str],
    config: BackendConfig,
    api_key: str | None = None,
    transport: httpx.BaseTransport | None = None,
) -> list[np.ndarray]:
    """Embed ``texts`` in input order through an OpenAI-compatible endpoint."""
    if config.kind is not BackendKind.REMOTE:
        raise ValueError("embed_remote needs a remote backend config")
    if any(not t for t in texts):
        raise ValueError("remote embedding inputs must be non-empty")
    if not texts:
        return []
    headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
    url = _embeddings_url(config.endpoint_url)
    batches = [texts[i : i + config.batch_size] for i in range(0, len(texts), config.batch_size)]
    with httpx.Client(headers=headers, timeout=config.timeout_seconds, transport=transport) as client:
        with ThreadPoolExecutor(max_workers=min(config.max_parallel, len(batches))) as pool:
            results = list(pool.map(lambda b: _post_batch(client, url, b, config), batches))
    vectors = [np.asarray(v, dtype=float) for batch in results for v in batch]
    dims = {v.shape for v in vectors}
    if len(dims) != 1 or vectors[0].ndim != 1 or vectors[0].size == 0:
        raise DimensionMismatch(f"provider returned inconsistent dimensions: {sorted(dims)}")
    if not all(np.all(np.isfinite(v)) for v in vectors):
        raise BackendError(200, "provider returned non-finite values")
    return vectors


# --- TF-IDF backend ----------------------------------------------------------


def tfidf_fit(corpus: Sequence[str], config: BackendConfig) -> TfIdfModel:
    if config.kind is not BackendKind.TFIDF:
        raise ValueError("tfidf_fit needs a tfidf backend config")
    return fit_corpus(corpus, config.dimensions, config.ngram_range)


def tfidf_embed(text: str, model: TfIdfModel) -> np.ndarray:
    return model.transform_counts(model.counts(text))


# --- embedding sources for cross-validation ----------------------------------


class EmbeddingSource(Protocol):
    """Supplies train/test embedding matrices for one fold and one seed."""

    seeds: tuple[int, ...]

    def available(self) -> set[str]: ...

    def fold_vectors(
        self, seed: int, train: Sequence[str], test: Sequence[str]
    ) -> tuple[np.ndarray, np.ndarray]: ...


def _stack(vectors: list[np.ndarray], dim: int) -> np.ndarray:
    if not vectors:
        return np.zeros((0, dim))
    return np.vstack(vectors)


class PrecomputedEmbeddings:
    """Fixed vectors per (seed, instance); used for remote embeddings and direct injection."""

    def __init__(self, vectors: Mapping[int, Mapping[str, np.ndarray]]):
        if not vectors:
            raise ValueError("no seeds given")
        self.seeds = tuple(vectors)
        self._vectors = {s: {i: np.asarray(v, dtype=float) for i, v in m.items()} for s, m in vectors.items()}
        dims = {v.shape for m in self._vectors.values() for v in m.values()}
        if len(dims) > 1:
            raise DimensionMismatch(f"embeddings have mixed shapes {sorted(dims)}")
        self.dimensions = dims.pop()[0] if dims else 0

    def available(self) -> set[str]:
        sets = [set(m) for m in self._vectors.values()]
        return set.intersection(*sets)

    def fold_vectors(self, seed, train, test):
        m = self._vectors[seed]
        return (
            _stack([m[i] for i in train], self.dimensions),
            _stack([m[i] for i in test], self.dimensions),
        )


class TfIdfEmbeddings:
    """Serialized texts per (seed, instance); the TF-IDF model is refit on each training fold."""

    def __init__(self, texts: Mapping[int, Mapping[str, str]], config: BackendConfig):
        if not texts:
            raise ValueError("no seeds given")
        self.seeds = tuple(texts)
        self.config = config
        self._counts = {
            s: {i: bucket_counts(t, config.dimensions, config.ngram_range) for i, t in m.items()}
            for s, m in texts.items()
        }

    def available(self) -> set[str]:
        return set.intersection(*[set(m) for m in self._counts.values()])

    def model(self, seed: int, train: Sequence[str]) -> TfIdfModel:
        counts = self._counts[seed]
        return fit_from_counts([counts[i] for i in train], self.config.dimensions, self.config.ngram_range)

    def fold_vectors(self, seed, train, test):
        counts = self._counts[seed]
        model = self.model(seed, train)
        dim = self.config.dimensions
        return (
            _stack([model.transform_counts(counts[i]) for i in train], dim),
            _stack([model.transform_counts(counts[i]) for i in test], dim),
        )

