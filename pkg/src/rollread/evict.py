"""The eviction worker: delete consumed block files between fixed-interval
sleeps, and sweep everything that remains at shutdown.

Candidate paths are precomputed once up front so the worker never has to
scan directories; each path is unlinked at most once per stream lifetime.
"""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .cache import BlockState, CacheLocation
from .errors import BlockIOError
from .fileset import FileSet
from .prefetch import PrefetchState

log = logging.getLogger(__name__)

DEFAULT_INTERVAL = 5.0


def get_all_blocks(fs: FileSet, tiers: list[CacheLocation]) -> list[Path]:
    """Every block path the stream can ever create, across all tiers;
    exhaustive and duplicate-free."""
    paths = [loc.block_path(key) for loc in tiers for key in fs.iter_block_keys()]
    return list(dict.fromkeys(paths))


@dataclass
class EvictionPlan:
    all_blocks: list[Path]
    interval: float = DEFAULT_INTERVAL


@dataclass
class EvictionReport:
    deleted: int = 0
    final_deleted: int = 0
    deleted_paths: list[Path] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


def run_evictor(
    plan: EvictionPlan, state: PrefetchState, stop: threading.Event
) -> EvictionReport:
    """Loop until ``stop``: delete each marked block present on disk, then
    sleep the interval. After ``stop``, one final sweep removes every
    remaining candidate file. Undeletable files are reported and only fatal
    in that final sweep."""
    report = EvictionReport()
    candidates = set(plan.all_blocks)
    while not stop.is_set():
        _sweep_marked(state, candidates, report)
        stop.wait(plan.interval)
    _sweep_marked(state, candidates, report)
    _final_sweep(candidates, report)
    return report


def _sweep_marked(
    state: PrefetchState, candidates: set[Path], report: EvictionReport
) -> None:
    while True:
        with state.cond:
            if not state.evict_queue:
                return
            key = state.evict_queue.popleft()
            rec = state.records[key]
            loc = rec.location
        assert loc is not None, f"marked block {key} was never written"
        path = loc.block_path(key)
        # attempted at most once, whether or not the unlink succeeds
        candidates.discard(path)
        try:
            if path.exists():
                path.unlink()
                report.deleted += 1
                report.deleted_paths.append(path)
        except OSError as exc:
            log.warning("could not evict %s: %s", path, exc)
            report.errors.append(f"{path}: {exc}")
        with state.cond:
            rec.advance(BlockState.EVICTED)


def _final_sweep(candidates: set[Path], report: EvictionReport) -> None:
    failures = []
    for path in sorted(candidates):
        try:
            if path.exists():
                path.unlink()
                report.final_deleted += 1
                report.deleted_paths.append(path)
        except OSError as exc:
            failures.append(f"{path}: {exc}")
    if failures:
        report.errors.extend(failures)
        raise BlockIOError("final sweep left files behind: " + "; ".join(failures))
