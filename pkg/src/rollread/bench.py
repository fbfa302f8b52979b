"""Benchmark harness: timed sequential-vs-rolling runs on a store, parameter
sweeps with CSV output, synthetic compute, and deterministic fixture
generation.

Synthetic compute is deadline-driven: every payload byte is pushed through a
hash (real, unelidable work), then the call waits out the rest of
``rate * nbytes`` on the wall clock. An instruction-counted busy loop would
stretch arbitrarily once concurrent consumers oversubscribe the CPU,
breaking both its own duration contract and any cross-thread overlap being
measured; the deadline form keeps per-call duration within a few percent
regardless of load, the same way the simulated store realizes its transfer
times by sleeping.
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import struct
import sys
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import model as perf
from .cache import CacheLocation
from .errors import RollreadError
from .evict import DEFAULT_INTERVAL
from .fileset import FileSet
from .reader import open_stream
from .store import ObjectStore, SimStore
from .trk import TrkHeader, write_trk

log = logging.getLogger(__name__)

MODES = ("sequential", "rolling")
_SPIN_CHUNK = 1 << 18  # 256 KiB per hash call: fine-grained deadline checks


@dataclass
class BenchConfig:
    """One benchmark's parameter set; echoed into every CSV row."""

    backend: str
    keys: list[str]
    blocksize: int
    tiers: list[tuple[str, int]]          # (base dir, capacity bytes), priority = order
    compute_rate: float = 0.0             # synthetic seconds per byte
    parallel: int = 1
    repetitions: int = 3
    evict_interval: float = DEFAULT_INTERVAL
    seed: int = 0
    sim_latency: float = 0.0
    sim_bandwidth: float = float("inf")

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.blocksize < 4096:
            raise ValueError("blocksize must be >= 4 KiB")
        if self.compute_rate < 0:
            raise ValueError("compute_rate must be >= 0")
        if self.parallel < 1:
            raise ValueError("parallel must be >= 1")


@dataclass
class BenchResult:
    mode: str
    wall_time: float
    bytes_read: int = 0
    waits: int = 0
    fallback_reads: int = 0
    peak_cache_used: int = 0
    ok: bool = True
    digest: str = ""
    error: str | None = None


def synthetic_compute(rate: float, payload: bytes, hasher=None) -> None:
    """Consume ``payload`` for ``rate * len(payload)`` seconds of wall time.

    Every byte is fed through a hash so the consumption cannot be elided;
    the optional ``hasher`` receives the payload (its cost counts toward
    the deadline). Accuracy is within a few percent provided the deadline
    is not smaller than one full pass over the payload.
    """
    nbytes = len(payload)
    if nbytes == 0:
        return
    if rate <= 0:
        if hasher is not None:
            hasher.update(payload)
        return
    deadline = rate * nbytes
    t0 = time.perf_counter()
    touch = hasher if hasher is not None else hashlib.sha1()
    view = memoryview(payload)
    for i in range(0, nbytes, _SPIN_CHUNK):
        touch.update(view[i:i + _SPIN_CHUNK])
    while True:
        remaining = deadline - (time.perf_counter() - t0)
        if remaining <= 0:
            break
        time.sleep(remaining)


def _make_tiers(specs: Sequence[tuple[str, int]], tag: str) -> list[CacheLocation]:
    return [
        CacheLocation(Path(base) / tag, capacity, priority=rank)
        for rank, (base, capacity) in enumerate(specs)
    ]


def run_mode(
    store: ObjectStore,
    cfg: BenchConfig,
    mode: str,
    *,
    tag: str = "run",
    keys: list[str] | None = None,
) -> BenchResult:
    """Time one full consumption of the configured objects.

    ``sequential`` fetches each block then computes, in distinct phases;
    ``rolling`` reads through the prefetching stream with compute interleaved
    per read. Both consume identical bytes and apply identical compute, and
    both fold the correctness digest into the compute deadline.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    digest = hashlib.sha256()
    t0 = time.perf_counter()
    try:
        fs = FileSet.resolve(store, keys or cfg.keys, cfg.blocksize)
        if mode == "sequential":
            result = _run_sequential(store, cfg, fs, digest)
        else:
            result = _run_rolling(store, cfg, fs, digest, tag)
    except RollreadError as exc:
        log.warning("%s run failed: %s", mode, exc)
        return BenchResult(
            mode=mode, wall_time=time.perf_counter() - t0, ok=False, error=str(exc)
        )
    result.wall_time = time.perf_counter() - t0
    result.digest = digest.hexdigest()
    return result


def _run_sequential(store, cfg, fs: FileSet, digest) -> BenchResult:
    total = 0
    for ref, size in zip(fs.refs, fs.sizes):
        for offset in range(0, size, cfg.blocksize):
            data = store.get_range(ref, offset, min(cfg.blocksize, size - offset))
            synthetic_compute(cfg.compute_rate, data, hasher=digest)
            total += len(data)
    return BenchResult(mode="sequential", wall_time=0.0, bytes_read=total)


def _run_rolling(store, cfg, fs: FileSet, digest, tag: str) -> BenchResult:
    tiers = _make_tiers(cfg.tiers, tag)
    stream = open_stream(store, fs, tiers, evict_interval=cfg.evict_interval)
    try:
        while True:
            data = stream.read(cfg.blocksize)
            if not data:
                break
            synthetic_compute(cfg.compute_rate, data, hasher=digest)
    finally:
        report = stream.close()
    return BenchResult(
        mode="rolling",
        wall_time=0.0,
        bytes_read=report.bytes_read,
        waits=report.waits,
        fallback_reads=report.fallback_reads,
        peak_cache_used=sum(t.peak_used for t in tiers),
    )


def reference_digest(store: ObjectStore, keys: list[str]) -> str | None:
    """Digest of the concatenated objects, from the backing files when the
    store is simulated (no injected delay); None when that shortcut is
    unavailable."""
    if not isinstance(store, SimStore):
        return None
    digest = hashlib.sha256()
    for key in keys:
        with open(store.backing_path(key), "rb") as f:
            while chunk := f.read(1 << 20):
                digest.update(chunk)
    return digest.hexdigest()


def _model_speedup(cfg: BenchConfig, fs: FileSet) -> float | None:
    if not np.isfinite(cfg.sim_bandwidth) or cfg.sim_latency <= 0:
        return None
    params = perf.ModelParams(
        n_b=max(1, fs.total_blocks),
        f=float(fs.total_size),
        l_c=cfg.sim_latency,
        b_cr=cfg.sim_bandwidth,
        c=cfg.compute_rate,
    )
    return perf.speedup(params)


def _echo(cfg: BenchConfig) -> dict:
    return {
        "backend": cfg.backend,
        "blocksize": cfg.blocksize,
        "compute_rate": cfg.compute_rate,
        "evict_interval": cfg.evict_interval,
        "seed": cfg.seed,
        "tiers": ";".join(f"{p}:{c}" for p, c in cfg.tiers),
    }


def _result_row(command: str, cfg: BenchConfig, res: BenchResult, **extra) -> dict:
    row = {"command": command, "mode": res.mode, **_echo(cfg)}
    row.update(extra)
    row.update(
        wall_time=round(res.wall_time, 6),
        bytes_read=res.bytes_read,
        waits=res.waits,
        fallback_reads=res.fallback_reads,
        peak_cache_used=res.peak_cache_used,
        ok=res.ok,
        error=res.error or "",
    )
    return row


def _checked(res: BenchResult, expected: str | None) -> BenchResult:
    if res.ok and expected is not None and res.digest != expected:
        res.ok = False
        res.error = "digest mismatch"
    return res


def bench_files(
    store: ObjectStore, cfg: BenchConfig, counts: Sequence[int] = (1, 2, 4, 8, 16)
) -> list[dict]:
    """Sweep the number of shards read, both modes, with per-rep speedups.

    A timing row only counts as ok when the run was byte-correct against the
    fixture digest (or, failing that shortcut, against the paired run).
    """
    if not counts or min(counts) < 1:
        raise ValueError("file counts must be positive")
    if max(counts) > len(cfg.keys):
        raise ValueError(f"asked for {max(counts)} files, have {len(cfg.keys)}")
    rows = []
    for n in counts:
        keys = cfg.keys[:n]
        fs = FileSet.resolve(store, keys, cfg.blocksize)
        expected = reference_digest(store, keys)
        predicted = _model_speedup(cfg, fs)
        for rep in range(cfg.repetitions):
            seq = _checked(
                run_mode(store, cfg, "sequential", keys=keys, tag=f"files-{n}-seq-{rep}"),
                expected,
            )
            roll = _checked(
                run_mode(store, cfg, "rolling", keys=keys, tag=f"files-{n}-roll-{rep}"),
                expected,
            )
            if expected is None and seq.ok and roll.ok and seq.digest != roll.digest:
                seq.ok = roll.ok = False
                seq.error = roll.error = "cross-mode digest mismatch"
            meta = {"n_files": n, "total_bytes": fs.total_size, "n_blocks": fs.total_blocks, "rep": rep}
            rows.append(_result_row("bench-files", cfg, seq, **meta))
            speed = seq.wall_time / roll.wall_time if (seq.ok and roll.ok) else None
            rows.append(
                _result_row(
                    "bench-files",
                    cfg,
                    roll,
                    **meta,
                    measured_speedup=None if speed is None else round(speed, 4),
                    model_speedup=None if predicted is None else round(predicted, 4),
                )
            )
    return rows


def bench_blocksize(
    store: ObjectStore,
    cfg: BenchConfig,
    blocksizes: Sequence[int],
    *,
    modes: Sequence[str] = MODES,
) -> tuple[list[dict], dict]:
    """Sweep block sizes on fixed data; the summary compares the measured
    rolling-argmin block count against the model's optimum."""
    if not blocksizes:
        raise ValueError("no blocksizes given")
    rows = []
    rolling_means: dict[int, float] = {}
    expected = reference_digest(store, cfg.keys)
    for bs in blocksizes:
        sub = replace(cfg, blocksize=bs)
        fs = FileSet.resolve(store, cfg.keys, bs)
        predicted = _model_speedup(sub, fs)
        walls = []
        for rep in range(cfg.repetitions):
            for mode in modes:
                res = _checked(
                    run_mode(store, sub, mode, tag=f"bs-{bs}-{mode}-{rep}"), expected
                )
                rows.append(
                    _result_row(
                        "bench-blocksize",
                        sub,
                        res,
                        n_files=len(cfg.keys),
                        total_bytes=fs.total_size,
                        n_blocks=fs.total_blocks,
                        rep=rep,
                        model_speedup=None if predicted is None else round(predicted, 4),
                    )
                )
                if mode == "rolling" and res.ok:
                    walls.append(res.wall_time)
        if walls:
            rolling_means[fs.total_blocks] = sum(walls) / len(walls)

    summary: dict = {"rolling_means_by_blocks": rolling_means}
    if rolling_means:
        summary["measured_argmin_blocks"] = min(rolling_means, key=rolling_means.get)
    total = FileSet.resolve(store, cfg.keys, max(blocksizes)).total_size
    if cfg.sim_latency > 0:
        summary["model_optimal_blocks"] = perf.optimal_blocks(
            cfg.compute_rate, float(total), cfg.sim_latency
        )
    return rows, summary


def bench_parallel(
    store: ObjectStore, cfg: BenchConfig, consumers: int | None = None
) -> list[dict]:
    """N independent streams, each consuming its own shard subset with its
    own tier directories, timed while running concurrently."""
    n = consumers or cfg.parallel
    if n < 1:
        raise ValueError("need at least one consumer")
    if len(cfg.keys) < n:
        raise ValueError(f"{n} consumers need at least {n} keys")
    chunks = [list(c) for c in np.array_split(np.array(cfg.keys, dtype=object), n)]
    expected = [reference_digest(store, chunk) for chunk in chunks]
    rows = []
    for rep in range(cfg.repetitions):
        walls: dict[str, list[BenchResult]] = {}
        for mode in MODES:
            results: list[BenchResult | None] = [None] * n
            t0 = time.perf_counter()

            def consume(i: int, mode=mode, rep=rep) -> None:
                results[i] = run_mode(
                    store, cfg, mode, keys=chunks[i], tag=f"par-{mode}-c{i}-{rep}"
                )

            threads = [threading.Thread(target=consume, args=(i,)) for i in range(n)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            total_wall = time.perf_counter() - t0
            walls[mode] = [_checked(r, e) for r, e in zip(results, expected)]
            rows.append(
                {
                    "command": "bench-parallel",
                    "mode": mode,
                    **_echo(cfg),
                    "consumer": "all",
                    "rep": rep,
                    "wall_time": round(total_wall, 6),
                    "ok": all(r.ok for r in walls[mode]),
                    "error": "",
                }
            )
        for i in range(n):
            seq, roll = walls["sequential"][i], walls["rolling"][i]
            total_bytes = sum(
                FileSet.resolve(store, chunks[i], cfg.blocksize).sizes
            )
            for res in (seq, roll):
                speed = None
                if res.mode == "rolling" and seq.ok and roll.ok:
                    speed = round(seq.wall_time / roll.wall_time, 4)
                rows.append(
                    _result_row(
                        "bench-parallel",
                        cfg,
                        res,
                        consumer=i,
                        n_files=len(chunks[i]),
                        total_bytes=total_bytes,
                        rep=rep,
                        measured_speedup=speed,
                    )
                )
    return rows


def model_rows(params: perf.ModelParams, sweep_to: int | None = None) -> list[dict]:
    """One row of every model quantity, or one per block count when sweeping."""
    block_counts = range(1, sweep_to + 1) if sweep_to else [params.n_b]
    rows = []
    for n_b in block_counts:
        p = params.with_blocks(n_b)
        rows.append(
            {
                "n_b": n_b,
                "f": p.f,
                "l_c": p.l_c,
                "b_cr": p.b_cr,
                "c": p.c,
                "l_l": p.l_l,
                "t_seq": perf.t_seq(p),
                "t_cloud": perf.t_cloud(p),
                "t_comp": perf.t_comp(p),
                "t_pf": perf.t_pf(p),
                "speedup": perf.speedup(p),
                "optimal_blocks": perf.optimal_blocks(p.c, p.f, p.l_c) if p.l_c > 0 else "",
                "asymptote_gap": perf.asymptote_gap(p),
            }
        )
    return rows


def write_csv(rows: Iterable[dict], out=None) -> str:
    """Render rows as CSV with a stable, union-of-keys column order; write to
    ``out`` (path or file object) when given, and return the text."""
    rows = list(rows)
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, restval="", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    text = buf.getvalue()
    if out is None:
        pass
    elif hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).write_text(text)
    return text


# --- fixture generation -------------------------------------------------------

@dataclass
class FixtureInfo:
    key: str
    size: int
    sha256: str


_N_COUNT_OFFSET = 988
_GEN_BATCH = 4096


def generate_fixtures(
    store: SimStore,
    sizes: Sequence[int],
    seed: int,
    *,
    prefix: str = "shard",
    n_scalars: int = 0,
    n_properties: int = 0,
    points_range: tuple[int, int] = (32, 256),
) -> list[FixtureInfo]:
    """Write seeded ``.trk`` shards into the simulated store's backing dir.

    Each shard stops at the first record that reaches its size target, so the
    result is within one record of the request. Identical arguments produce
    byte-identical files.
    """
    rng = np.random.default_rng(seed)
    infos = []
    for i, target in enumerate(sizes):
        key = f"{prefix}-{i:03d}.trk"
        path = store.backing_path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        size = _write_random_trk(
            path, rng, target,
            n_scalars=n_scalars, n_properties=n_properties, points_range=points_range,
        )
        infos.append(FixtureInfo(key, size, _file_digest(path)))
    return infos


def _write_random_trk(
    path: Path,
    rng: np.random.Generator,
    target: int,
    *,
    n_scalars: int,
    n_properties: int,
    points_range: tuple[int, int],
) -> int:
    hdr = TrkHeader(n_scalars=n_scalars, n_properties=n_properties)
    lo, hi = points_range
    values_per_point = 3 + n_scalars
    written = len(hdr.to_bytes())
    n_records = 0
    with open(path, "wb") as f:
        f.write(hdr.to_bytes())
        while written < target:
            counts = rng.integers(lo, hi + 1, size=_GEN_BATCH)
            flat = rng.random(int(counts.sum()) * values_per_point, dtype=np.float32) * 100.0
            props = rng.random(_GEN_BATCH * n_properties, dtype=np.float32)
            pos = 0
            parts = []
            batch_bytes = 0
            for j, n in enumerate(counts):
                n = int(n)
                record = [struct.pack("<i", n), flat[pos:pos + n * values_per_point].tobytes()]
                pos += n * values_per_point
                if n_properties:
                    record.append(props[j * n_properties:(j + 1) * n_properties].tobytes())
                parts.extend(record)
                batch_bytes += sum(map(len, record))
                n_records += 1
                if written + batch_bytes >= target:
                    break
            f.write(b"".join(parts))
            written += batch_bytes
    with open(path, "r+b") as f:
        f.seek(_N_COUNT_OFFSET)
        f.write(struct.pack("<i", n_records))
    return written


def _file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        while chunk := f.read(1 << 20):
            digest.update(chunk)
    return digest.hexdigest()


def write_fixture_blob(store: SimStore, key: str, blob: bytes) -> FixtureInfo:
    """Store one prebuilt file (used when splitting a fixture into shards)."""
    store.put_object(key, blob)
    return FixtureInfo(key, len(blob), hashlib.sha256(blob).hexdigest())
