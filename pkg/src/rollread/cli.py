"""``rollread`` command line: fixtures, the cost model, benchmarks, and
streamline-file utilities.

Store parameters can come from flags or from a JSON config file whose keys
mirror the flag names (``--config``); S3 credentials come only from the
standard environment variables.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from . import model as perf
from .cache import parse_size, parse_tier_spec
from .errors import RollreadError
from .fileset import FileSet
from .reader import open_stream
from .store import SimStore, open_store
from .trk import (
    iter_fileset_streamlines,
    iter_streamlines,
    length_histogram,
    read_header,
    split_trk,
)

log = logging.getLogger(__name__)


def _sizes_list(text: str) -> list[int]:
    return [parse_size(part) for part in text.split(",") if part]


def _tier_pairs(spec: str) -> list[tuple[str, int]]:
    return [(str(t.path), t.capacity) for t in parse_tier_spec(spec)]


backend_option = click.option(
    "--backend", default="sim:///tmp/rollread-store", show_default=True,
    help="Store URI: sim://<dir> or s3://<bucket>.",
)
sim_latency_option = click.option(
    "--sim-latency", type=float, default=0.01, show_default=True,
    help="Injected per-request latency of the simulated store (seconds).",
)
sim_bandwidth_option = click.option(
    "--sim-bandwidth", type=float, default=200e6, show_default=True,
    help="Injected bandwidth of the simulated store (bytes/second).",
)


def _bench_options(fn):
    for deco in reversed(
        [
            backend_option,
            sim_latency_option,
            sim_bandwidth_option,
            click.option("--tiers", default="/tmp/rollread-cache:2GiB", show_default=True,
                         help="Cache tiers as path:bytes[,path:bytes...], priority in order."),
            click.option("--blocksize", default="16MiB", show_default=True),
            click.option("--compute-rate", type=float, default=0.0, show_default=True,
                         help="Synthetic compute seconds per byte."),
            click.option("--reps", type=int, default=3, show_default=True),
            click.option("--seed", type=int, default=0, show_default=True),
            click.option("--evict-interval", type=float, default=5.0, show_default=True),
            click.option("--keys", default="", help="Comma-separated object keys; default: all keys."),
            click.option("--csv", "csv_path", type=click.Path(), default=None,
                         help="Write rows to this CSV file instead of stdout."),
        ]
    ):
        fn = deco(fn)
    return fn


def _build_config(backend, sim_latency, sim_bandwidth, tiers, blocksize,
                  compute_rate, reps, seed, evict_interval, keys):
    store = open_store(backend, sim_latency=sim_latency, sim_bandwidth=sim_bandwidth)
    key_list = [k for k in keys.split(",") if k] or store.list_keys()
    cfg = bench_mod.BenchConfig(
        backend=backend,
        keys=key_list,
        blocksize=parse_size(blocksize),
        tiers=_tier_pairs(tiers),
        compute_rate=compute_rate,
        repetitions=reps,
        evict_interval=evict_interval,
        seed=seed,
        sim_latency=sim_latency,
        sim_bandwidth=sim_bandwidth,
    )
    return store, cfg


def _emit(rows, csv_path):
    text = bench_mod.write_csv(rows, csv_path)
    if csv_path is None:
        click.echo(text, nl=False)
    else:
        click.echo(f"wrote {len(rows)} rows to {csv_path}")


@click.group()
@click.option("--config", type=click.Path(exists=True), default=None,
              help="JSON file of default option values, keys matching flag names.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, config, verbose):
    """Overlapped block prefetching for object storage: benchmark and tools."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if config:
        defaults = json.loads(Path(config).read_text())
        ctx.default_map = {
            cmd: defaults for cmd in ("fixture", "model", "cat", "bench", "trk")
        } | {"bench": {sub: defaults for sub in ("files", "blocksize", "parallel")},
             "trk": {sub: defaults for sub in ("info", "histogram")}}


@main.command()
@backend_option
@click.option("--sizes", default="64MiB", show_default=True,
              help="Comma-separated shard sizes to generate.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--prefix", default="shard", show_default=True)
@click.option("--n-scalars", type=int, default=0, show_default=True)
@click.option("--n-properties", type=int, default=0, show_default=True)
@click.option("--split", type=int, default=0,
              help="Also split the first generated shard into N record-equal pieces.")
def fixture(backend, sizes, seed, prefix, n_scalars, n_properties, split):
    """Generate deterministic .trk shards into the simulated store."""
    store = open_store(backend)
    if not isinstance(store, SimStore):
        raise click.UsageError("fixtures can only be generated into a sim:// store")
    infos = bench_mod.generate_fixtures(
        store, _sizes_list(sizes), seed,
        prefix=prefix, n_scalars=n_scalars, n_properties=n_properties,
    )
    if split:
        blob = store.backing_path(infos[0].key).read_bytes()
        for i, shard in enumerate(split_trk(blob, split)):
            infos.append(
                bench_mod.write_fixture_blob(store, f"{prefix}-000.part{i:02d}.trk", shard)
            )
    for info in infos:
        click.echo(f"{info.key}\t{info.size}\t{info.sha256}")


@main.command()
@click.option("--n-b", type=int, default=16, show_default=True, help="Block count.")
@click.option("--f", "f_bytes", default="1GiB", show_default=True, help="Total bytes.")
@click.option("--l-c", type=float, default=0.1, show_default=True, help="Remote latency (s).")
@click.option("--b-cr", type=float, default=91e6, show_default=True, help="Remote read bandwidth (B/s).")
@click.option("--c", "c_rate", type=float, default=0.0, show_default=True, help="Compute seconds per byte.")
@click.option("--l-l", type=float, default=0.0, show_default=True, help="Local latency (s).")
@click.option("--b-lw", type=float, default=float("inf"), help="Local write bandwidth (B/s).")
@click.option("--b-lr", type=float, default=float("inf"), help="Local read bandwidth (B/s).")
@click.option("--sweep", type=int, default=0, help="Emit one CSV row per block count in [1, N].")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def model(n_b, f_bytes, l_c, b_cr, c_rate, l_l, b_lw, b_lr, sweep, csv_path):
    """Print the analytic cost model for one parameter set (or sweep n_b).

    The compute term assumes time proportional to data size; nonlinear
    workloads fall outside the model.
    """
    params = perf.ModelParams(
        n_b=n_b, f=float(parse_size(f_bytes)), l_c=l_c, b_cr=b_cr,
        c=c_rate, l_l=l_l, b_lw=b_lw, b_lr=b_lr,
    )
    rows = bench_mod.model_rows(params, sweep_to=sweep or None)
    if sweep or csv_path:
        _emit(rows, csv_path)
        return
    row = rows[0]
    width = max(len(k) for k in row)
    for key, value in row.items():
        click.echo(f"{key:<{width}}  {value}")


@main.group()
def bench():
    """Timed sequential-vs-rolling comparisons on a store."""


@bench.command("files")
@_bench_options
@click.option("--counts", default="1,2,4,8,16", show_default=True)
def bench_files_cmd(counts, csv_path, **kw):
    """Sweep how many shards are read (growing total size)."""
    store, cfg = _build_config(**kw)
    rows = bench_mod.bench_files(store, cfg, [int(x) for x in counts.split(",") if x])
    _emit(rows, csv_path)


@bench.command("blocksize")
@_bench_options
@click.option("--blocksizes", default="1MiB,2MiB,4MiB,8MiB,16MiB,32MiB,64MiB,128MiB",
              show_default=True)
def bench_blocksize_cmd(blocksizes, csv_path, **kw):
    """Sweep the block size on fixed data; reports measured vs model optimum."""
    store, cfg = _build_config(**kw)
    rows, summary = bench_mod.bench_blocksize(store, cfg, _sizes_list(blocksizes))
    _emit(rows, csv_path)
    if "measured_argmin_blocks" in summary:
        click.echo(f"measured argmin blocks: {summary['measured_argmin_blocks']}", err=True)
    if "model_optimal_blocks" in summary:
        click.echo(f"model optimal blocks:   {summary['model_optimal_blocks']}", err=True)


@bench.command("parallel")
@_bench_options
@click.option("--consumers", type=int, default=4, show_default=True)
def bench_parallel_cmd(consumers, csv_path, **kw):
    """Run N concurrent streams, each over its own shard subset."""
    store, cfg = _build_config(**kw)
    rows = bench_mod.bench_parallel(store, cfg, consumers)
    _emit(rows, csv_path)


@main.group()
def trk():
    """Streamline-file utilities."""


def _open_trk_source(path, backend, keys, sim_latency, sim_bandwidth, blocksize):
    """Yield (stream-like, close callable) for a local path or store keys."""
    if path:
        f = open(path, "rb")
        return f, f.close
    store = open_store(backend, sim_latency=sim_latency, sim_bandwidth=sim_bandwidth)
    key_list = [k for k in keys.split(",") if k] or store.list_keys()
    fs = FileSet.resolve(store, key_list, parse_size(blocksize))
    tier = parse_tier_spec(f"/tmp/rollread-cache:{max(parse_size(blocksize) * 4, 1 << 26)}")
    stream = open_stream(store, fs, tier, evict_interval=0.5)
    return stream, stream.close


@trk.command("info")
@click.option("--path", type=click.Path(exists=True), default=None,
              help="Local .trk file (otherwise read from the store).")
@backend_option
@sim_latency_option
@sim_bandwidth_option
@click.option("--keys", default="")
@click.option("--blocksize", default="16MiB", show_default=True)
def trk_info(path, backend, sim_latency, sim_bandwidth, keys, blocksize):
    """Print header fields of a streamline file."""
    source, close = _open_trk_source(path, backend, keys, sim_latency, sim_bandwidth, blocksize)
    try:
        hdr = read_header(source)
    finally:
        close()
    click.echo(f"dim           {hdr.dim}")
    click.echo(f"voxel_sizes   {tuple(round(v, 6) for v in hdr.voxel_sizes)}")
    click.echo(f"origin        {tuple(round(v, 6) for v in hdr.origin)}")
    click.echo(f"n_scalars     {hdr.n_scalars}")
    click.echo(f"n_properties  {hdr.n_properties}")
    click.echo(f"voxel_order   {hdr.voxel_order!r}")
    click.echo(f"n_count       {hdr.n_count}")
    click.echo(f"version       {hdr.version}")
    click.echo(f"header_size   {hdr.header_size}")
    click.echo("vox_to_ras:")
    for row in hdr.vox_to_ras:
        click.echo("  " + " ".join(f"{v:10.4f}" for v in row))


@trk.command("histogram")
@click.option("--path", type=click.Path(exists=True), default=None)
@backend_option
@sim_latency_option
@sim_bandwidth_option
@click.option("--keys", default="")
@click.option("--blocksize", default="16MiB", show_default=True)
@click.option("--bins", type=int, default=20, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def trk_histogram(path, backend, sim_latency, sim_bandwidth, keys, blocksize, bins, csv_path):
    """Histogram of streamline lengths (lazy single pass), as CSV."""
    source, close = _open_trk_source(path, backend, keys, sim_latency, sim_bandwidth, blocksize)
    try:
        if path:
            records = iter_streamlines(source)
        else:
            records = iter_fileset_streamlines(source)
        hist = length_histogram(records, n_bins=bins)
    finally:
        close()
    rows = [
        {"bin": i, "lo": hist.bin_edges[i], "hi": hist.bin_edges[i + 1], "count": int(n)}
        for i, n in enumerate(hist.counts)
    ]
    _emit(rows, csv_path)
    click.echo(f"total streamlines: {hist.total}", err=True)


@main.command()
@backend_option
@sim_latency_option
@sim_bandwidth_option
@click.option("--keys", default="")
@click.option("--blocksize", default="16MiB", show_default=True)
@click.option("--tiers", default="/tmp/rollread-cache:2GiB", show_default=True)
@click.option("--evict-interval", type=float, default=5.0, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Output file (default stdout).")
def cat(backend, sim_latency, sim_bandwidth, keys, blocksize, tiers, evict_interval, out):
    """Stream the concatenated objects through the rolling reader."""
    store = open_store(backend, sim_latency=sim_latency, sim_bandwidth=sim_bandwidth)
    key_list = [k for k in keys.split(",") if k] or store.list_keys()
    fs = FileSet.resolve(store, key_list, parse_size(blocksize))
    stream = open_stream(store, fs, parse_tier_spec(tiers), evict_interval=evict_interval)
    sink = open(out, "wb") if out else sys.stdout.buffer
    try:
        while True:
            chunk = stream.read(1 << 20)
            if not chunk:
                break
            sink.write(chunk)
    finally:
        if out:
            sink.close()
        stream.close()


def entrypoint() -> None:
    try:
        main(prog_name="rollread")
    except RollreadError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    entrypoint()
