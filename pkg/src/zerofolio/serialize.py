"""Render raw instance files as truncated, optionally line-shuffled text.

The shuffle is Fisher-Yates driven by splitmix64 so that a given
``(lines, seed)`` pair yields the same permutation on every platform. That
keeps embedding caches, which are keyed on the serialized text, portable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence, Union

from .errors import InstanceTooLarge

MASK64 = (1 << 64) - 1
DEFAULT_BUDGET = 10_000
MAX_FILE_BYTES = 256 * 1024 * 1024

Blob = Union[str, bytes]


@dataclass(frozen=True)
class SerializationConfig:
    budget_chars: int = DEFAULT_BUDGET
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.budget_chars < 1:
            raise ValueError("budget_chars must be >= 1")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def splitmix64(state: int) -> Iterator[int]:
    """Infinite splitmix64 stream seeded with ``state``."""
    state &= MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        yield z ^ (z >> 31)


def mix64(value: int) -> int:
    """First splitmix64 output for ``value``; used to derive sub-seeds."""
    return next(splitmix64(value))


def shuffle_lines(lines: Sequence[str], seed: int) -> list[str]:
    out = list(lines)
    rng = splitmix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = next(rng) % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def to_text(blob: Blob) -> str:
    if isinstance(blob, bytes):
        return blob.decode("utf-8", errors="replace")
    return blob


def split_lines(text: str) -> list[str]:
    """Split on ``\\n``, dropping a trailing ``\\r`` per line and the empty tail."""
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]


def instance_lines(files: Sequence[Blob]) -> list[str]:
    lines: list[str] = []
    for blob in files:
        lines.extend(split_lines(to_text(blob)))
    return lines


def serialize_instance(files: Sequence[Blob], config: SerializationConfig) -> str:
    if not files:
        raise ValueError("an instance needs at least one file")
    lines = instance_lines(files)
    if config.shuffle:
        lines = shuffle_lines(lines, config.seed)
    return "\n".join(lines)[: config.budget_chars]


def read_instance_files(paths: Sequence[str | Path], max_bytes: int = MAX_FILE_BYTES) -> list[bytes]:
    blobs = []
    for p in paths:
        p = Path(p)
        size = p.stat().st_size
        if size > max_bytes:
            raise InstanceTooLarge(f"{p} is {size} bytes, limit is {max_bytes}")
        blobs.append(p.read_bytes())
    return blobs
