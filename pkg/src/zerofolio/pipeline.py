"""File-level plumbing between manifests, serialization, backends and the cache."""

from __future__ import annotations

import base64
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import httpx
import numpy as np

from .aslib import InstanceManifest
from .cache import CacheKey, cache_get, cache_put
from .embed import BackendConfig, BackendKind, embed_remote
from .errors import AuthError, BackendError, DataError
from .serialize import SerializationConfig, read_instance_files, serialize_instance
from .tfidf import TfIdfModel, bucket_counts, fit_from_counts

log = logging.getLogger(__name__)

Texts = dict[int, dict[str, str]]
Vectors = dict[int, dict[str, np.ndarray]]


@dataclass
class EmbedSummary:
    embedded: int = 0
    cached: int = 0
    failed: int = 0
    failures: list[tuple[str, int, str]] = field(default_factory=list)

    def fail(self, instance: str, seed: int, reason: str) -> None:
        self.failed += 1
        self.failures.append((instance, seed, reason))


def serialize_manifest(
    manifest: InstanceManifest,
    instances: Sequence[str],
    seeds: Sequence[int],
    budget_chars: int,
    shuffle: bool,
    summary: Optional[EmbedSummary] = None,
) -> Texts:
    """Serialized text per (seed, instance) for manifest instances; unreadable ones are skipped."""
    texts: Texts = {s: {} for s in seeds}
    for inst in manifest.restrict(instances):
        try:
            blobs = read_instance_files(manifest[inst])
        except (OSError, DataError) as exc:
            log.warning("cannot read instance %s: %s", inst, exc)
            if summary is not None:
                for s in seeds:
                    summary.fail(inst, s, str(exc))
            continue
        for s in seeds:
            cfg = SerializationConfig(budget_chars=budget_chars, seed=s, shuffle=shuffle)
            texts[s][inst] = serialize_instance(blobs, cfg)
    return texts


def corpus_fingerprint(texts: Mapping[str, str]) -> str:
    h = hashlib.sha256()
    for inst in sorted(texts):
        h.update(inst.encode("utf-8", errors="surrogatepass") + b"\0")
        h.update(hashlib.sha256(texts[inst].encode("utf-8", errors="surrogatepass")).digest())
    return h.hexdigest()[:16]


def tfidf_model_id(backend: BackendConfig, corpus: Mapping[str, str]) -> str:
    return f"{backend.cache_model_id}-c{corpus_fingerprint(corpus)}"


def fit_tfidf_corpus(texts: Mapping[str, str], backend: BackendConfig) -> TfIdfModel:
    counts = [bucket_counts(texts[i], backend.dimensions, backend.ngram_range) for i in sorted(texts)]
    return fit_from_counts(counts, backend.dimensions, backend.ngram_range)


def _embed_remote_isolated(
    texts: list[str],
    backend: BackendConfig,
    api_key: Optional[str],
    transport: Optional[httpx.BaseTransport],
) -> list[Optional[np.ndarray] | BackendError]:
    """Embed in batches; a failed batch is retried text by text so one bad input fails alone."""
    size = backend.batch_size
    chunks = [texts[i : i + size] for i in range(0, len(texts), size)]

    def run(chunk: list[str]):
        try:
            return embed_remote(chunk, backend, api_key, transport)
        except AuthError:
            raise
        except BackendError:
            if len(chunk) == 1:
                raise
        out = []
        for t in chunk:
            try:
                out.append(embed_remote([t], backend, api_key, transport)[0])
            except AuthError:
                raise
            except BackendError as exc:
                out.append(exc)
        return out

    results: list = []
    with ThreadPoolExecutor(max_workers=max(1, min(backend.max_parallel, len(chunks)))) as pool:
        futures = [pool.submit(run, c) for c in chunks]
        for fut, chunk in zip(futures, chunks):
            try:
                results.extend(fut.result())
            except AuthError:
                raise
            except BackendError as exc:
                results.extend([exc] * len(chunk))
    return results


def embed_texts(
    texts: Texts,
    backend: BackendConfig,
    cache_dir: str | Path,
    api_key: Optional[str] = None,
    transport: Optional[httpx.BaseTransport] = None,
    summary: Optional[EmbedSummary] = None,
) -> tuple[Vectors, dict[int, str]]:
    """Look every text up in the cache and embed the misses.

    TF-IDF models are fitted on the full corpus of each seed; their cache
    model id carries a fingerprint of that corpus. Returns the vectors and
    the cache model id used per seed.
    """
    summary = summary if summary is not None else EmbedSummary()
    vectors: Vectors = {}
    model_ids: dict[int, str] = {}
    for seed, per_inst in texts.items():
        vectors[seed] = {}
        if backend.kind is BackendKind.TFIDF:
            model_id = tfidf_model_id(backend, per_inst)
        else:
            model_id = backend.model_id
        model_ids[seed] = model_id
        missing: list[tuple[str, CacheKey]] = []
        for inst in sorted(per_inst):
            key = CacheKey.for_text(per_inst[inst], model_id)
            vec = cache_get(key, cache_dir)
            if vec is None:
                missing.append((inst, key))
            else:
                vectors[seed][inst] = vec
                summary.cached += 1
        if not missing:
            continue
        if backend.kind is BackendKind.TFIDF:
            model = fit_tfidf_corpus(per_inst, backend)
            fresh = [model.transform_counts(model.counts(per_inst[i])) for i, _ in missing]
        else:
            todo = [(i, k) for i, k in missing if per_inst[i]]
            for i, _ in missing:
                if not per_inst[i]:
                    summary.fail(i, seed, "empty serialized text")
            missing = todo
            fresh = _embed_remote_isolated([per_inst[i] for i, _ in missing], backend, api_key, transport)
        for (inst, key), vec in zip(missing, fresh):
            if isinstance(vec, BackendError):
                summary.fail(inst, seed, str(vec))
                continue
            cache_put(key, vec, cache_dir)
            vectors[seed][inst] = vec
            summary.embedded += 1
    return vectors, model_ids


# --- saved selector state -------------------------------------------------------

STATE_VERSION = 1


def _encode_array(a: np.ndarray) -> str:
    return base64.b64encode(np.asarray(a, dtype="<f8").tobytes()).decode("ascii")


def _decode_array(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f8").astype(float)


def save_state(
    path: str | Path,
    *,
    scenario_name: str,
    algorithms: Sequence[str],
    instances: Sequence[str],
    par10: np.ndarray,
    selector: Mapping,
    seeds: Sequence[int],
    serialization: Mapping,
    backend: BackendConfig,
    cache_refs: Mapping[int, Mapping[str, str]],
    model_ids: Mapping[int, str],
    idf: Optional[Mapping[int, np.ndarray]] = None,
) -> None:
    """Persist what ``select`` needs: cache references and the PAR10 matrix, not raw vectors."""
    state = {
        "schema_version": STATE_VERSION,
        "scenario": scenario_name,
        "algorithms": list(algorithms),
        "instances": list(instances),
        "par10": [[float(v) for v in row] for row in np.asarray(par10)],
        "selector": dict(selector),
        "seeds": [int(s) for s in seeds],
        "serialization": dict(serialization),
        "backend": {
            "kind": backend.kind.value,
            "model_id": backend.model_id,
            "endpoint_url": backend.endpoint_url,
            "dimensions": backend.dimensions,
            "ngram_range": list(backend.ngram_range),
        },
        "cache_refs": {str(s): dict(refs) for s, refs in cache_refs.items()},
        "model_ids": {str(s): m for s, m in model_ids.items()},
        "tfidf_idf": {str(s): _encode_array(v) for s, v in (idf or {}).items()},
    }
    Path(path).write_text(json.dumps(state, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_state(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no trained selector state at {path}")
    state = json.loads(path.read_text(encoding="utf-8"))
    if state.get("schema_version") != STATE_VERSION:
        raise DataError(f"unsupported state version {state.get('schema_version')}")
    state["tfidf_idf"] = {int(s): _decode_array(v) for s, v in state["tfidf_idf"].items()}
    state["cache_refs"] = {int(s): refs for s, refs in state["cache_refs"].items()}
    state["model_ids"] = {int(s): m for s, m in state["model_ids"].items()}
    return state


def state_training_vectors(state: dict, seed: int, cache_dir: str | Path) -> np.ndarray:
    refs = state["cache_refs"][seed]
    model_id = state["model_ids"][seed]
    rows = []
    for inst in state["instances"]:
        key = CacheKey(bytes.fromhex(refs[inst]), model_id)
        vec = cache_get(key, cache_dir)
        if vec is None:
            raise DataError(f"cache entry for training instance {inst} (seed {seed}) is missing")
        rows.append(vec)
    return np.vstack(rows)
