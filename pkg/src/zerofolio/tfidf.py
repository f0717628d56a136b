"""Offline embedding backend: hashed TF-IDF over character n-grams.

N-grams are hashed with 64-bit FNV-1a over their UTF-8 bytes and folded into
``dimensions`` buckets, so vectors are bit-identical across platforms.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


@lru_cache(maxsize=1 << 20)
def _ngram_hash(gram: str) -> int:
    return fnv1a_64(gram.encode("utf-8", errors="surrogatepass"))


def ngrams(text: str, ngram_range: tuple[int, int]) -> Iterable[str]:
    lo, hi = ngram_range
    for n in range(lo, hi + 1):
        for i in range(len(text) - n + 1):
            yield text[i : i + n]


def bucket_counts(text: str, dimensions: int, ngram_range: tuple[int, int] = (2, 4)) -> dict[int, int]:
    """Raw n-gram counts per hash bucket (the term frequencies)."""
    counts: Counter[int] = Counter()
    for gram in ngrams(text, ngram_range):
        counts[_ngram_hash(gram) % dimensions] += 1
    return dict(counts)


@dataclass(frozen=True)
class TfIdfModel:
    idf: np.ndarray
    ngram_range: tuple[int, int]
    n_documents: int

    @property
    def dimensions(self) -> int:
        return len(self.idf)

    def counts(self, text: str) -> dict[int, int]:
        return bucket_counts(text, self.dimensions, self.ngram_range)

    def transform_counts(self, counts: dict[int, int]) -> np.ndarray:
        vec = np.zeros(self.dimensions)
        if counts:
            idx = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
            tf = np.fromiter(counts.values(), dtype=float, count=len(counts))
            vec[idx] = tf * self.idf[idx]
        norm = np.sqrt(np.dot(vec, vec))
        if norm > 0:
            vec /= norm
        return vec


def fit_from_counts(
    documents: Sequence[dict[int, int]], dimensions: int, ngram_range: tuple[int, int] = (2, 4)
) -> TfIdfModel:
    if not documents:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    df = np.zeros(dimensions)
    for counts in documents:
        if counts:
            df[np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))] += 1
    n = len(documents)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    idf.setflags(write=False)
    return TfIdfModel(idf, tuple(ngram_range), n)


def fit_corpus(corpus: Sequence[str], dimensions: int, ngram_range: tuple[int, int]) -> TfIdfModel:
    return fit_from_counts([bucket_counts(t, dimensions, ngram_range) for t in corpus], dimensions, ngram_range)
