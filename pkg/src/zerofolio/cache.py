"""Persistent on-disk embedding cache.

Layout: ``<store>/<sha256 hex of text>/<model id>.vec``. A record is the
dimension as little-endian uint32, the values as little-endian float64, and a
CRC32 of everything before it as little-endian uint32.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

import numpy as np

from .errors import CacheCorrupt


@dataclass(frozen=True)
class CacheKey:
    content_hash: bytes
    model_id: str

    @classmethod
    def for_text(cls, text: str, model_id: str) -> "CacheKey":
        digest = hashlib.sha256(text.encode("utf-8", errors="surrogatepass")).digest()
        return cls(digest, model_id)

    @property
    def hex(self) -> str:
        return self.content_hash.hex()

    def path(self, store: str | Path) -> Path:
        # model ids such as "openai/text-embedding-3-large" must stay one path component
        return Path(store) / self.hex / f"{quote(self.model_id, safe='')}.vec"


def encode_record(values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype="<f8")
    body = struct.pack("<I", len(values)) + values.tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def decode_record(data: bytes, key: CacheKey) -> np.ndarray:
    if len(data) < 8:
        raise CacheCorrupt(key, "record too short")
    (dim,) = struct.unpack_from("<I", data, 0)
    if len(data) != 4 + 8 * dim + 4:
        raise CacheCorrupt(key, "length does not match header")
    body, (crc,) = data[:-4], struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(body) != crc:
        raise CacheCorrupt(key)
    return np.frombuffer(body, dtype="<f8", offset=4).astype(float)


def cache_get(key: CacheKey, store: str | Path) -> np.ndarray | None:
    path = key.path(store)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        return None
    return decode_record(data, key)


def cache_put(key: CacheKey, vec: np.ndarray, store: str | Path) -> None:
    path = key.path(store)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".vec")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(encode_record(vec))
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
