"""File-like stream over a set of remote objects, served from prefetched
blocks.

The active block is held in memory so tiny sub-block reads (the streamline
loader's 4-byte-then-point-block pattern) never touch the filesystem. Reads
block until the covering block is cached; a block is flagged for eviction
the moment its last byte has been handed to the caller. Backward seeks are
served by direct store reads so the prefetch sequence is never disturbed.
"""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass

from .cache import BlockKey, BlockState, CacheLocation, validate_tiers
from .errors import BlockIOError, OutOfRangeError, RollreadError
from .evict import DEFAULT_INTERVAL, EvictionPlan, EvictionReport, get_all_blocks, run_evictor
from .fileset import FileSet
from .prefetch import PrefetchConfig, PrefetchReport, PrefetchState, run_prefetch
from .store import ObjectStore

log = logging.getLogger(__name__)

SEEK_SET, SEEK_CUR, SEEK_END = 0, 1, 2


@dataclass
class ReadReport:
    wall_seconds: float
    bytes_read: int
    cache_hits: int
    waits: int
    fallback_reads: int
    prefetch: PrefetchReport | None
    eviction: EvictionReport | None


class _ActiveBlock:
    __slots__ = ("key", "data", "start", "end")

    def __init__(self, key: BlockKey, data: bytes, start: int, end: int):
        self.key = key
        self.data = data
        self.start = start
        self.end = end


class PrefetchStream:
    """One consumer at a time; the prefetch worker and evictor run behind it."""

    def __init__(
        self,
        store: ObjectStore,
        fs: FileSet,
        tiers: list[CacheLocation],
        *,
        evict_interval: float = DEFAULT_INTERVAL,
        poll_interval: float = 0.01,
        retries: int = 3,
        retry_wait: float = 0.1,
        wait_poll: float = 0.05,
    ):
        validate_tiers(tiers, fs.blocksize)
        self.store = store
        self.fs = fs
        self.tiers = tiers
        self.position = 0
        self._frontier = 0          # furthest byte handed out by forward reads
        self._active: _ActiveBlock | None = None
        self._wait_poll = wait_poll
        self._closed = False
        self._report: ReadReport | None = None
        self._t0 = time.perf_counter()

        self.bytes_read = 0
        self.cache_hits = 0
        self.waits = 0
        self.fallback_reads = 0

        self.state = PrefetchState(fs)
        self._prefetch_report: PrefetchReport | None = None
        self._eviction_report: EvictionReport | None = None
        self._evictor_error: Exception | None = None
        self._stop_evict = threading.Event()

        plan = EvictionPlan(get_all_blocks(fs, tiers), interval=evict_interval)
        cfg = PrefetchConfig(poll_interval=poll_interval, retries=retries, retry_wait=retry_wait)
        self._prefetch_thread = threading.Thread(
            target=self._run_prefetch, args=(cfg,), name="rollread-prefetch", daemon=True
        )
        self._evict_thread = threading.Thread(
            target=self._run_evictor, args=(plan,), name="rollread-evict", daemon=True
        )
        self._prefetch_thread.start()
        self._evict_thread.start()

    def _run_prefetch(self, cfg: PrefetchConfig) -> None:
        self._prefetch_report = run_prefetch(self.store, self.fs, self.tiers, self.state, cfg)

    def _run_evictor(self, plan: EvictionPlan) -> None:
        try:
            self._eviction_report = run_evictor(plan, self.state, self._stop_evict)
        except RollreadError as exc:
            self._evictor_error = exc

    # --- file-like surface -------------------------------------------------

    @property
    def total_size(self) -> int:
        return self.fs.total_size

    def tell(self) -> int:
        return self.position

    def read(self, n: int = -1) -> bytes:
        """Up to ``n`` bytes from the current position (shorter only at end
        of stream); ``-1`` reads to the end. Blocks until the covering block
        is cached; reads spanning block or file boundaries are stitched."""
        if self._closed:
            raise ValueError("read on closed stream")
        if n < 0:
            n = self.total_size - self.position
        parts: list[bytes] = []
        while n > 0 and self.position < self.total_size:
            if self.position < self._frontier:
                part = self._fallback_read(min(n, self._frontier - self.position))
            else:
                part = self._read_from_block(n)
            parts.append(part)
            n -= len(part)
        self.bytes_read += sum(map(len, parts))
        if len(parts) == 1:
            return parts[0]
        return b"".join(parts)

    def seek(self, offset: int, whence: int = SEEK_SET) -> int:
        """Absolute positioning in [0, total_size]. Forward seeks behave as
        read-and-discard; reads behind the high-water mark fall back to
        direct store reads."""
        if whence == SEEK_CUR:
            offset += self.position
        elif whence == SEEK_END:
            offset += self.total_size
        elif whence != SEEK_SET:
            raise ValueError(f"bad whence {whence}")
        if not 0 <= offset <= self.total_size:
            raise OutOfRangeError(f"seek to {offset} outside [0, {self.total_size}]")
        self.position = offset
        if self._active is not None and not (self._active.start <= offset < self._active.end):
            self._active = None
        return offset

    def close(self) -> ReadReport:
        """Stop both workers, run the final eviction sweep, return counters.
        Idempotent."""
        if self._closed:
            assert self._report is not None
            return self._report
        self._closed = True
        self.state.stop()
        self._prefetch_thread.join()
        self._stop_evict.set()
        self._evict_thread.join()
        self._report = ReadReport(
            wall_seconds=time.perf_counter() - self._t0,
            bytes_read=self.bytes_read,
            cache_hits=self.cache_hits,
            waits=self.waits,
            fallback_reads=self.fallback_reads,
            prefetch=self._prefetch_report,
            eviction=self._eviction_report,
        )
        if self._evictor_error is not None:
            raise self._evictor_error
        return self._report

    def __enter__(self) -> "PrefetchStream":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # --- internals -----------------------------------------------------------

    def _read_from_block(self, n: int) -> bytes:
        block = self._ensure_active_block()
        off = self.position - block.start
        take = min(n, block.end - self.position)
        if off == 0 and take == len(block.data):
            part = block.data
        else:
            part = block.data[off:off + take]
        self.position += take
        self._frontier = max(self._frontier, self.position)
        if self.position >= block.end:
            self.state.mark_evict(block.key)
            self._active = None
        return part

    def _ensure_active_block(self) -> _ActiveBlock:
        key = self.fs.key_at(self.position)
        if self._active is not None and self._active.key == key:
            return self._active
        rec, handoff = self._wait_for_cached(key)
        start, end = self.fs.block_span(key)
        if handoff is not None:
            data = handoff
        elif rec.state >= BlockState.MARKED_EVICT:
            data = self._refetch_block(key)
        else:
            assert rec.location is not None
            try:
                data = rec.location.block_path(key).read_bytes()
            except FileNotFoundError:
                log.warning("cached block %s vanished, refetching", key)
                data = self._refetch_block(key)
            except OSError as exc:
                raise BlockIOError(f"reading cached block {key}: {exc}") from exc
        if len(data) != end - start:
            raise BlockIOError(
                f"block {key} is {len(data)} bytes, expected {end - start}"
            )
        self._active = _ActiveBlock(key, data, start, end)
        return self._active

    def _wait_for_cached(self, key: BlockKey):
        with self.state.cond:
            waited = False
            while True:
                rec = self.state.records.get(key)
                if rec is not None and rec.state >= BlockState.CACHED:
                    break
                if self.state.failure is not None:
                    raise self.state.failure
                if not self.state.fetch:
                    raise BlockIOError(f"stream stopped before block {key} was cached")
                self._drain_passed_blocks_locked()
                waited = True
                self.state.cond.wait(self._wait_poll)
            if waited:
                self.waits += 1
            else:
                self.cache_hits += 1
            handoff = None
            if (
                rec.state is BlockState.CACHED
                and self.state.handoff is not None
                and self.state.handoff[0] == key
            ):
                handoff = self.state.handoff[1]
            return rec, handoff

    def _drain_passed_blocks_locked(self) -> None:
        # While waiting (only after a forward seek skipped data), release any
        # cached blocks lying entirely behind the position so a bounded cache
        # keeps rolling toward the block being waited on.
        for rec in list(self.state.records.values()):
            if rec.state != BlockState.CACHED:
                continue
            _, end = self.fs.block_span(rec.key)
            if end <= self.position:
                rec.advance(BlockState.MARKED_EVICT)
                self.state.evict_queue.append(rec.key)

    def _refetch_block(self, key: BlockKey) -> bytes:
        self.fallback_reads += 1
        return self.store.get_range(
            self.fs.refs[key.file_index],
            key.block_index * self.fs.blocksize,
            self.fs.block_size_of(key),
        )

    def _fallback_read(self, n: int) -> bytes:
        """Direct store read bypassing the cache, split at file boundaries."""
        parts: list[bytes] = []
        while n > 0 and self.position < self.total_size:
            i, file_off = self.fs.file_at(self.position)
            take = min(n, self.fs.sizes[i] - file_off)
            self.fallback_reads += 1
            parts.append(self.store.get_range(self.fs.refs[i], file_off, take))
            self.position += take
            n -= take
        return b"".join(parts)


def open_stream(
    store: ObjectStore,
    fs: FileSet,
    tiers: list[CacheLocation],
    **opts,
) -> PrefetchStream:
    """Start the prefetch worker and evictor and return the read handle."""
    return PrefetchStream(store, fs, tiers, **opts)
