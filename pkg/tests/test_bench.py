import time

import numpy as np
import pytest

from rollread.bench import (
    BenchConfig,
    bench_blocksize,
    bench_files,
    bench_parallel,
    generate_fixtures,
    model_rows,
    reference_digest,
    run_mode,
    synthetic_compute,
    write_csv,
)
from rollread.model import ModelParams
from rollread.store import SimStore, SimStoreParams

KIB = 1024
MIB = 1024 * 1024


def sim_store(base, latency, bandwidth) -> SimStore:
    backing = base / "backing"
    backing.mkdir(parents=True, exist_ok=True)
    return SimStore(SimStoreParams(backing, latency=latency, bandwidth=bandwidth))


def base_config(base, store, keys, *, blocksize, compute_rate=0.0, reps=1,
                latency=None, bandwidth=None) -> BenchConfig:
    return BenchConfig(
        backend=store.uri,
        keys=keys,
        blocksize=blocksize,
        tiers=[(str(base / "cache"), 64 * MIB)],
        compute_rate=compute_rate,
        repetitions=reps,
        evict_interval=0.05,
        seed=0,
        sim_latency=store.params.latency if latency is None else latency,
        sim_bandwidth=store.params.bandwidth if bandwidth is None else bandwidth,
    )


class TestSyntheticCompute:
    def test_zero_rate_returns_immediately(self):
        payload = b"x" * (1 * MIB)
        t0 = time.perf_counter()
        synthetic_compute(0.0, payload)
        assert time.perf_counter() - t0 < 0.05

    def test_duration_tracks_rate_times_bytes(self):
        payload = bytes(100 * 1000 * 1000)
        t0 = time.perf_counter()
        synthetic_compute(1e-8, payload)
        elapsed = time.perf_counter() - t0
        assert elapsed == pytest.approx(1.0, rel=0.05)

    def test_doubling_bytes_doubles_duration(self):
        one = bytes(4 * MIB)
        two = bytes(8 * MIB)
        t0 = time.perf_counter()
        synthetic_compute(2e-8, one)
        d1 = time.perf_counter() - t0
        t0 = time.perf_counter()
        synthetic_compute(2e-8, two)
        d2 = time.perf_counter() - t0
        assert d2 == pytest.approx(2 * d1, rel=0.10)

    def test_hasher_sees_every_byte(self):
        import hashlib

        payload = bytes(range(256)) * 1000
        h = hashlib.sha256()
        synthetic_compute(1e-9, payload, hasher=h)
        assert h.hexdigest() == hashlib.sha256(payload).hexdigest()


class TestConfigValidation:
    def test_invariants(self, tmp_path):
        store = sim_store(tmp_path, 0, 1e9)
        with pytest.raises(ValueError):
            base_config(tmp_path, store, ["k"], blocksize=2048)  # < 4 KiB
        cfg = base_config(tmp_path, store, ["k"], blocksize=4096)
        with pytest.raises(ValueError):
            BenchConfig(**{**cfg.__dict__, "repetitions": 0})
        with pytest.raises(ValueError):
            BenchConfig(**{**cfg.__dict__, "compute_rate": -1.0})


class TestRunMode:
    def test_modes_consume_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(5)
        store = sim_store(tmp_path, 0.002, 500e6)
        payload = rng.integers(0, 256, 900 * KIB, dtype=np.uint8).tobytes()
        store.put_object("a.bin", payload)
        cfg = base_config(tmp_path, store, ["a.bin"], blocksize=128 * KIB)
        seq = run_mode(store, cfg, "sequential")
        roll = run_mode(store, cfg, "rolling", tag="t1")
        assert seq.ok and roll.ok
        assert seq.bytes_read == roll.bytes_read == len(payload)
        assert seq.digest == roll.digest == reference_digest(store, ["a.bin"])
        assert roll.peak_cache_used > 0

    def test_single_block_overhead_is_small(self, tmp_path):
        # no compute, one block: rolling pays only the local write+read
        rng = np.random.default_rng(6)
        store = sim_store(tmp_path, 0.05, 100e6)
        store.put_object("a.bin", rng.integers(0, 256, 8 * MIB, dtype=np.uint8).tobytes())
        cfg = base_config(tmp_path, store, ["a.bin"], blocksize=8 * MIB)
        ratios = []
        for rep in range(3):
            seq = run_mode(store, cfg, "sequential")
            roll = run_mode(store, cfg, "rolling", tag=f"r{rep}")
            ratios.append(roll.wall_time / seq.wall_time)
        assert min(ratios) <= 1.10

    def test_balanced_pipeline_speedup_band(self, tmp_path):
        rng = np.random.default_rng(7)
        store = sim_store(tmp_path, 0.01, 200e6)
        store.put_object("a.bin", rng.integers(0, 256, 4 * MIB, dtype=np.uint8).tobytes())
        blocksize = 256 * KIB
        t_cloud = 0.01 + blocksize / 200e6
        cfg = base_config(
            tmp_path, store, ["a.bin"], blocksize=blocksize,
            compute_rate=t_cloud / blocksize,
        )
        seq = run_mode(store, cfg, "sequential")
        roll = run_mode(store, cfg, "rolling", tag="bal")
        speed = seq.wall_time / roll.wall_time
        assert 1.5 <= speed < 2.0

    def test_failed_backend_flags_the_run(self, tmp_path):
        store = sim_store(tmp_path, 0, 1e9)
        cfg = base_config(tmp_path, store, ["missing.bin"], blocksize=4096)
        res = run_mode(store, cfg, "sequential")
        assert not res.ok
        assert res.error
        rows = write_csv([{"mode": res.mode, "ok": res.ok, "error": res.error}])
        assert "False" in rows


class TestBenchFiles:
    def test_growing_file_count_grows_speedup(self, tmp_path):
        store = sim_store(tmp_path, 0.008, 100e6)
        blocksize = 128 * KIB
        generate_fixtures(store, [512 * KIB] * 4, seed=1)
        keys = store.list_keys()
        t_cloud = 0.008 + blocksize / 100e6
        cfg = base_config(
            tmp_path, store, keys, blocksize=blocksize,
            compute_rate=t_cloud / blocksize,
        )
        rows = bench_files(store, cfg, counts=(1, 2, 4))
        assert all(r["ok"] for r in rows)
        speeds = [r["measured_speedup"] for r in rows if r.get("measured_speedup")]
        assert len(speeds) == 3
        assert speeds[2] > speeds[0]
        models = [r["model_speedup"] for r in rows if r.get("model_speedup")]
        assert all(1.0 <= m < 2.0 for m in models)

    def test_single_tiny_file_speedup_near_one(self, tmp_path):
        rng = np.random.default_rng(9)
        store = sim_store(tmp_path, 0.03, 100e6)
        store.put_object("tiny.bin", rng.integers(0, 256, 64 * KIB, dtype=np.uint8).tobytes())
        cfg = base_config(tmp_path, store, ["tiny.bin"], blocksize=128 * KIB, reps=2)
        rows = bench_files(store, cfg, counts=(1,))
        speeds = [r["measured_speedup"] for r in rows if r.get("measured_speedup")]
        assert all(0.7 <= s <= 1.2 for s in speeds)

    def test_zero_files_rejected(self, tmp_path):
        store = sim_store(tmp_path, 0, 1e9)
        cfg = base_config(tmp_path, store, ["a"], blocksize=4096)
        with pytest.raises(ValueError):
            bench_files(store, cfg, counts=())
        with pytest.raises(ValueError):
            bench_files(store, cfg, counts=(0,))


class TestBenchBlocksize:
    def test_u_shape_and_argmin(self, tmp_path):
        store = sim_store(tmp_path, 0.01, 20e6)
        generate_fixtures(store, [4 * MIB], seed=2)
        keys = store.list_keys()
        total = 4 * MIB
        cfg = base_config(
            tmp_path, store, keys, blocksize=MIB,
            compute_rate=0.16 / total,  # transfer-dominant: c < 1/b_cr
        )
        sizes = [256 * KIB, 512 * KIB, MIB, 2 * MIB, 4 * MIB]
        rows, summary = bench_blocksize(store, cfg, sizes)
        assert all(r["ok"] for r in rows)
        means = summary["rolling_means_by_blocks"]
        assert summary["model_optimal_blocks"] == 4
        # interior minimum: the best block count is neither end of the grid
        best = summary["measured_argmin_blocks"]
        assert min(means) < best < max(means)
        # sequential pays latency per block: fastest at the fewest blocks
        seq = {
            r["n_blocks"]: r["wall_time"]
            for r in rows
            if r["mode"] == "sequential"
        }
        assert seq[min(seq)] == min(seq.values())

    def test_empty_sweep_rejected(self, tmp_path):
        store = sim_store(tmp_path, 0, 1e9)
        cfg = base_config(tmp_path, store, ["a"], blocksize=4096)
        with pytest.raises(ValueError):
            bench_blocksize(store, cfg, [])


class TestBenchParallel:
    def test_four_consumers_byte_correct_with_gain(self, tmp_path):
        store = sim_store(tmp_path, 0.01, 200e6)
        blocksize = 256 * KIB
        generate_fixtures(store, [MIB] * 4, seed=3)
        keys = store.list_keys()
        t_cloud = 0.01 + blocksize / 200e6
        cfg = base_config(
            tmp_path, store, keys, blocksize=blocksize,
            compute_rate=t_cloud / blocksize,
        )
        rows = bench_parallel(store, cfg, consumers=4)
        per_consumer = [r for r in rows if r.get("consumer") != "all"]
        assert all(r["ok"] for r in per_consumer)
        speeds = [r["measured_speedup"] for r in per_consumer if r.get("measured_speedup")]
        assert len(speeds) == 4
        assert sum(speeds) / len(speeds) > 1.1
        totals = [r for r in rows if r.get("consumer") == "all"]
        assert {r["mode"] for r in totals} == {"sequential", "rolling"}

    def test_single_consumer_matches_files_single_point(self, tmp_path):
        store = sim_store(tmp_path, 0.01, 100e6)
        generate_fixtures(store, [MIB], seed=4)
        keys = store.list_keys()
        cfg = base_config(tmp_path, store, keys, blocksize=256 * KIB, reps=2)
        par = bench_parallel(store, cfg, consumers=1)
        fil = bench_files(store, cfg, counts=(1,))
        par_walls = [r["wall_time"] for r in par if r.get("consumer") == 0 and r["mode"] == "rolling"]
        fil_walls = [r["wall_time"] for r in fil if r["mode"] == "rolling"]
        assert min(par_walls) == pytest.approx(min(fil_walls), rel=0.25)

    def test_more_consumers_than_keys_rejected(self, tmp_path):
        store = sim_store(tmp_path, 0, 1e9)
        cfg = base_config(tmp_path, store, ["one"], blocksize=4096)
        with pytest.raises(ValueError):
            bench_parallel(store, cfg, consumers=2)


class TestFixtures:
    def test_seeded_generation_is_byte_identical(self, tmp_path):
        a = generate_fixtures(sim_store(tmp_path / "a", 0, 1e9), [256 * KIB, 80 * KIB], seed=11)
        b = generate_fixtures(sim_store(tmp_path / "b", 0, 1e9), [256 * KIB, 80 * KIB], seed=11)
        assert [x.sha256 for x in a] == [y.sha256 for y in b]
        c = generate_fixtures(sim_store(tmp_path / "c", 0, 1e9), [256 * KIB, 80 * KIB], seed=12)
        assert [x.sha256 for x in a] != [y.sha256 for y in c]

    def test_size_within_one_record_of_target(self, tmp_path):
        target = 512 * KIB
        infos = generate_fixtures(sim_store(tmp_path, 0, 1e9), [target], seed=5)
        max_record = 4 + 256 * 12  # biggest point count at zero scalars/properties
        assert target <= infos[0].size < target + max_record

    def test_fixtures_are_valid_trk_files(self, tmp_path):
        from rollread.trk import read_trk_file

        store = sim_store(tmp_path, 0, 1e9)
        infos = generate_fixtures(store, [64 * KIB], seed=6, n_scalars=1, n_properties=2)
        hdr, records = read_trk_file(store.backing_path(infos[0].key))
        assert hdr.n_count == len(records) > 0
        assert all(r.scalars.shape[1] == 1 and len(r.properties) == 2 for r in records)


class TestModelRowsAndCsv:
    def test_single_row_has_all_quantities(self):
        rows = model_rows(ModelParams(n_b=16, f=1e9, l_c=0.1, b_cr=91e6, c=1e-8))
        assert len(rows) == 1
        row = rows[0]
        for field in ("t_seq", "t_cloud", "t_comp", "t_pf", "speedup",
                      "optimal_blocks", "asymptote_gap"):
            assert field in row
        assert 1.0 <= row["speedup"] < 2.0

    def test_sweep_emits_one_row_per_block_count(self):
        rows = model_rows(ModelParams(n_b=1, f=1e9, l_c=0.1, b_cr=91e6), sweep_to=64)
        assert [r["n_b"] for r in rows] == list(range(1, 65))

    def test_csv_stable_columns_and_roundtrip(self, tmp_path):
        rows = [{"a": 1, "b": "x"}, {"a": 2, "b": "y", "c": None}]
        out = tmp_path / "rows.csv"
        text = write_csv(rows, out)
        assert text.splitlines()[0] == "a,b,c"
        assert out.read_text() == text
        assert text.splitlines()[2] == "2,y,"
