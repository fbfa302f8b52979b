"""Prioritized local cache tiers with capacity accounting.

A tier tracks its ``used`` bytes as an in-memory counter that is corrected
lazily by :meth:`CacheLocation.verify_used`, which asks the filesystem which
block files the eviction worker has already removed. One prefetch worker
writes, one evictor deletes, readers read; ``used`` updates are guarded by a
per-tier lock.
"""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BlockIOError, StorageConfigError, StorageFullError


class BlockState(enum.IntEnum):
    """Lifecycle of one cached block; transitions only move forward."""

    FETCHING = 0
    CACHED = 1
    MARKED_EVICT = 2
    EVICTED = 3


@dataclass(frozen=True, order=True)
class BlockKey:
    """Position of a block: which file, which block within it."""

    file_index: int
    block_index: int

    def __post_init__(self) -> None:
        if self.file_index < 0 or self.block_index < 0:
            raise ValueError(f"negative block key: {self}")


@dataclass
class BlockRecord:
    key: BlockKey
    size: int
    location: "CacheLocation | None"
    state: BlockState

    def advance(self, new_state: BlockState) -> None:
        if new_state < self.state:
            raise ValueError(f"backward transition {self.state.name} -> {new_state.name}")
        self.state = new_state


class CacheLocation:
    """One cache directory with a byte capacity and a priority rank
    (lower rank is preferred)."""

    def __init__(self, path: Path | str, capacity: int, priority: int = 0):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.path = Path(path)
        self.capacity = capacity
        self.priority = priority
        self.path.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._used = 0
        self._peak_used = 0
        # blocks written here and not yet reclaimed by verify_used
        self._unreclaimed: dict[BlockKey, int] = {}

    def __repr__(self) -> str:
        return f"CacheLocation({self.path}, capacity={self.capacity}, priority={self.priority})"

    @property
    def used(self) -> int:
        with self._lock:
            return self._used

    @property
    def peak_used(self) -> int:
        with self._lock:
            return self._peak_used

    @property
    def free(self) -> int:
        with self._lock:
            return self.capacity - self._used

    def block_path(self, key: BlockKey) -> Path:
        return self.path / f"{key.file_index}.{key.block_index}.blk"

    def write_block(self, key: BlockKey, payload: bytes) -> int:
        """Persist one block, charging its true byte size against capacity."""
        n = len(payload)
        with self._lock:
            if self.capacity - self._used < n:
                raise StorageFullError(
                    f"{self.path}: need {n}, free {self.capacity - self._used}"
                )
            self._used += n
            self._peak_used = max(self._peak_used, self._used)
        try:
            self.block_path(key).write_bytes(payload)
        except OSError as exc:
            with self._lock:
                self._used -= n
            raise BlockIOError(f"writing {self.block_path(key)}: {exc}") from exc
        with self._lock:
            self._unreclaimed[key] = n
        return n

    def verify_used(self, expected: Sequence[BlockKey] | None = None) -> int:
        """Reclaim accounting for blocks whose files the evictor removed.

        ``expected`` defaults to every block written here and not yet
        reclaimed. Returns the bytes reclaimed.
        """
        with self._lock:
            keys = list(expected) if expected is not None else list(self._unreclaimed)
        reclaimed = 0
        for key in keys:
            path = self.block_path(key)
            try:
                path.stat()
            except FileNotFoundError:
                with self._lock:
                    size = self._unreclaimed.pop(key, None)
                    if size is not None:
                        self._used -= size
                        reclaimed += size
            except OSError as exc:
                raise BlockIOError(f"stat {path}: {exc}") from exc
        return reclaimed


def block_path(loc: CacheLocation, key: BlockKey) -> Path:
    """Deterministic, collision-free file name for a block in a tier."""
    return loc.block_path(key)


def write_block(loc: CacheLocation, key: BlockKey, payload: bytes) -> BlockRecord:
    """Write a block and return a fresh record in state CACHED."""
    n = loc.write_block(key, payload)
    return BlockRecord(key, n, loc, BlockState.CACHED)


def choose_location(tiers: Iterable[CacheLocation], nbytes: int) -> CacheLocation | None:
    """Highest-priority tier with room for ``nbytes``, refreshing each tier's
    accounting via ``verify_used`` when its first check fails. ``None`` means
    every tier is full right now (wait and retry)."""
    for loc in sorted(tiers, key=lambda t: t.priority):
        if loc.free >= nbytes:
            return loc
        loc.verify_used()
        if loc.free >= nbytes:
            return loc
    return None


def validate_tiers(tiers: Sequence[CacheLocation], blocksize: int) -> None:
    """Startup validation: tier list sane and able to hold at least one block."""
    if not tiers:
        raise StorageConfigError("no cache tiers configured")
    priorities = [t.priority for t in tiers]
    if len(set(priorities)) != len(priorities):
        raise StorageConfigError(f"duplicate tier priorities: {priorities}")
    if blocksize > max(t.capacity for t in tiers):
        raise StorageConfigError(
            f"block size {blocksize} exceeds every tier capacity "
            f"(largest is {max(t.capacity for t in tiers)})"
        )


def parse_tier_spec(spec: str, base_priority: int = 0) -> list[CacheLocation]:
    """Parse ``path:bytes[,path:bytes...]``; list order sets priority."""
    tiers = []
    for rank, part in enumerate(filter(None, spec.split(","))):
        path, _, size = part.rpartition(":")
        if not path:
            raise ValueError(f"tier spec {part!r} is not path:bytes")
        tiers.append(CacheLocation(path, parse_size(size), base_priority + rank))
    return tiers


_SIZE_SUFFIXES = {
    "k": 1024, "kb": 1000, "kib": 1024,
    "m": 1024**2, "mb": 1000**2, "mib": 1024**2,
    "g": 1024**3, "gb": 1000**3, "gib": 1024**3,
}


def parse_size(text: str) -> int:
    """Parse a byte count like ``65536``, ``64MiB``, ``2g``."""
    s = text.strip().lower()
    for suffix in sorted(_SIZE_SUFFIXES, key=len, reverse=True):
        if s.endswith(suffix):
            return int(float(s[: -len(suffix)]) * _SIZE_SUFFIXES[suffix])
    return int(s)
