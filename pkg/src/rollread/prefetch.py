"""The prefetching worker: fetch blocks in strict sequential order across a
file set into cache tiers until done or told to stop.

State is shared with the reader (which blocks until a record reaches CACHED)
and the evictor (which consumes the marked-for-eviction queue). All shared
mutations happen under one condition variable; the worker notifies it after
every state change so waiting readers wake promptly.
"""
from __future__ import annotations

import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .cache import BlockKey, BlockRecord, BlockState, CacheLocation, choose_location
from .errors import TransportError
from .fileset import FileSet
from .store import ObjectStore

log = logging.getLogger(__name__)


@dataclass
class PrefetchConfig:
    poll_interval: float = 0.01   # sleep while every tier is full
    retries: int = 3              # attempts per block
    retry_wait: float = 0.1


class PrefetchState:
    """Shared worker state: stop flag, fetch cursor, block records, evict queue."""

    def __init__(self, fs: FileSet):
        self.cond = threading.Condition()
        self.fetch = True                     # cleared by the main thread to stop
        self.done = False                     # every block reached CACHED or later
        self.failure: Exception | None = None
        self.records: dict[BlockKey, BlockRecord] = {}
        self.evict_queue: deque[BlockKey] = deque()
        # the most recently cached payload, handed to a reader that wants
        # exactly this block so it can skip re-reading the tier file
        self.handoff: tuple[BlockKey, bytes] | None = None
        self._cursor: BlockKey | None = fs.first_key()
        self._fs = fs

    @property
    def file_index(self) -> int:
        key = self._cursor
        return key.file_index if key is not None else self._fs.n_files

    @property
    def next_block(self) -> int:
        key = self._cursor
        return key.block_index if key is not None else 0

    def current_key(self) -> BlockKey | None:
        with self.cond:
            return self._cursor

    def advance(self) -> None:
        with self.cond:
            if self._cursor is None:
                raise RuntimeError("advance past the last block")
            self._cursor = self._fs.next_key(self._cursor)
            if self._cursor is None:
                self.done = True
            self.cond.notify_all()

    def stop(self) -> None:
        with self.cond:
            self.fetch = False
            self.cond.notify_all()

    def fail(self, exc: Exception) -> None:
        with self.cond:
            self.failure = exc
            self.cond.notify_all()

    def mark_evict(self, key: BlockKey) -> bool:
        """Queue a CACHED block for eviction; False if already past CACHED."""
        with self.cond:
            rec = self.records.get(key)
            if rec is None or rec.state != BlockState.CACHED:
                return False
            rec.advance(BlockState.MARKED_EVICT)
            self.evict_queue.append(key)
            return True


@dataclass
class PrefetchReport:
    blocks_fetched: int = 0
    bytes_fetched: int = 0
    stall_seconds: float = 0.0
    completed: bool = False
    error: str | None = None
    fetched: list[BlockKey] = field(default_factory=list)


def fetch_next_block(
    store: ObjectStore, fs: FileSet, state: PrefetchState
) -> tuple[BlockKey, bytes]:
    """Download the block at the cursor; the record is marked FETCHING before
    the store call so a waiting reader can see it is on its way."""
    key = state.current_key()
    if key is None:
        raise RuntimeError("all blocks already fetched")
    with state.cond:
        rec = state.records.get(key)
        if rec is not None and rec.state >= BlockState.CACHED:
            raise RuntimeError(f"block {key} already fetched")
        if rec is None:
            rec = BlockRecord(key, fs.block_size_of(key), None, BlockState.FETCHING)
            state.records[key] = rec
        state.cond.notify_all()
    payload = store.get_range(
        fs.refs[key.file_index],
        key.block_index * fs.blocksize,
        fs.block_size_of(key),
    )
    return key, payload


def run_prefetch(
    store: ObjectStore,
    fs: FileSet,
    tiers: list[CacheLocation],
    state: PrefetchState,
    config: PrefetchConfig | None = None,
) -> PrefetchReport:
    """Worker loop: pick a tier with room (refreshing accounting on a
    shortfall), fetch the next block, persist it, advance; stall-poll while
    all tiers are full; exit when the file set is exhausted or the stop flag
    clears."""
    config = config or PrefetchConfig()
    report = PrefetchReport()
    try:
        while True:
            with state.cond:
                if not state.fetch:
                    return report
                key = state._cursor
                if key is None:
                    state.done = True
                    state.cond.notify_all()
                    report.completed = True
                    return report
            need = fs.block_size_of(key)
            loc = choose_location(tiers, need)
            if loc is None:
                time.sleep(config.poll_interval)
                report.stall_seconds += config.poll_interval
                continue
            payload = _fetch_with_retries(store, fs, state, config)
            if payload is None:  # stop flag cleared during a retry wait
                return report
            key, data = payload
            loc.write_block(key, data)
            with state.cond:
                rec = state.records[key]
                rec.size = len(data)
                rec.location = loc
                rec.advance(BlockState.CACHED)
                state.handoff = (key, data)
                state.cond.notify_all()
            report.blocks_fetched += 1
            report.bytes_fetched += len(data)
            report.fetched.append(key)
            state.advance()
    except Exception as exc:
        log.error("prefetch worker failed: %s", exc)
        report.error = str(exc)
        state.fail(exc)
        return report


def _fetch_with_retries(
    store: ObjectStore,
    fs: FileSet,
    state: PrefetchState,
    config: PrefetchConfig,
) -> tuple[BlockKey, bytes] | None:
    last: Exception | None = None
    for attempt in range(config.retries):
        try:
            return fetch_next_block(store, fs, state)
        except TransportError as exc:
            last = exc
            log.warning("fetch attempt %d failed: %s", attempt + 1, exc)
            with state.cond:
                if state.cond.wait_for(lambda: not state.fetch, timeout=config.retry_wait):
                    return None
    assert last is not None
    raise last
