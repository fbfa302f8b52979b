import csv
import io
import json

import numpy as np
import pytest
from click.testing import CliRunner

from rollread.cli import main
from rollread.trk import iter_streamlines, length_histogram

from helpers import trk_bytes


@pytest.fixture
def runner():
    return CliRunner()


def make_backing(tmp_path, payloads):
    backing = tmp_path / "backing"
    backing.mkdir()
    for key, data in payloads.items():
        (backing / key).write_bytes(data)
    return backing


class TestFixtureCommand:
    def test_generates_and_prints_hashes(self, runner, tmp_path):
        backing = tmp_path / "store"
        result = runner.invoke(
            main,
            ["fixture", "--backend", f"sim://{backing}", "--sizes", "64KiB,32KiB", "--seed", "7"],
        )
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert len(lines) == 2
        key, size, digest = lines[0].split("\t")
        assert key == "shard-000.trk"
        assert int(size) >= 64 * 1024
        assert len(digest) == 64
        assert (backing / key).stat().st_size == int(size)

    def test_deterministic_across_runs(self, runner, tmp_path):
        outs = []
        for sub in ("a", "b"):
            result = runner.invoke(
                main,
                ["fixture", "--backend", f"sim://{tmp_path/sub}", "--sizes", "32KiB", "--seed", "3"],
            )
            assert result.exit_code == 0
            outs.append(result.output)
        assert outs[0] == outs[1]

    def test_split_adds_record_equal_shards(self, runner, tmp_path):
        backing = tmp_path / "store"
        result = runner.invoke(
            main,
            ["fixture", "--backend", f"sim://{backing}", "--sizes", "32KiB",
             "--seed", "1", "--split", "3"],
        )
        assert result.exit_code == 0, result.output
        names = [line.split("\t")[0] for line in result.output.strip().splitlines()]
        assert names == [
            "shard-000.trk",
            "shard-000.part00.trk",
            "shard-000.part01.trk",
            "shard-000.part02.trk",
        ]
        whole = list(iter_streamlines(io.BytesIO((backing / names[0]).read_bytes())))
        parts = []
        for name in names[1:]:
            parts.extend(iter_streamlines(io.BytesIO((backing / name).read_bytes())))
        assert len(whole) == len(parts)
        assert all(np.array_equal(a.points, b.points) for a, b in zip(whole, parts))


class TestModelCommand:
    def test_table_output(self, runner):
        result = runner.invoke(main, ["model", "--c", "1e-8"])
        assert result.exit_code == 0
        assert "t_seq" in result.output and "speedup" in result.output
        speed = float(result.output.split("speedup")[1].split()[0])
        assert 1.0 < speed < 2.0

    def test_no_compute_means_no_speedup(self, runner):
        result = runner.invoke(main, ["model"])
        speed = float(result.output.split("speedup")[1].split()[0])
        assert speed == 1.0

    def test_sweep_csv(self, runner, tmp_path):
        out = tmp_path / "sweep.csv"
        result = runner.invoke(
            main, ["model", "--c", "1e-8", "--sweep", "16", "--csv", str(out)]
        )
        assert result.exit_code == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 16
        assert [int(r["n_b"]) for r in rows] == list(range(1, 17))
        assert all(1.0 <= float(r["speedup"]) < 2.0 for r in rows)


class TestTrkCommands:
    def test_info_local_file(self, runner, tmp_path):
        rng = np.random.default_rng(20)
        hdr, records, blob = trk_bytes(rng, 9, n_scalars=1, n_properties=2)
        path = tmp_path / "x.trk"
        path.write_bytes(blob)
        result = runner.invoke(main, ["trk", "info", "--path", str(path)])
        assert result.exit_code == 0, result.output
        assert "n_count       9" in result.output
        assert "n_scalars     1" in result.output
        assert "n_properties  2" in result.output

    def test_histogram_matches_library(self, runner, tmp_path):
        rng = np.random.default_rng(21)
        hdr, records, blob = trk_bytes(rng, 25)
        path = tmp_path / "x.trk"
        path.write_bytes(blob)
        out = tmp_path / "hist.csv"
        result = runner.invoke(
            main, ["trk", "histogram", "--path", str(path), "--csv", str(out)]
        )
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.open()))
        expected = length_histogram(records)
        assert [int(r["count"]) for r in rows] == list(expected.counts)
        assert len(rows) == 20

    def test_histogram_through_the_store(self, runner, tmp_path):
        rng = np.random.default_rng(22)
        hdr, records, blob = trk_bytes(rng, 15)
        backing = make_backing(tmp_path, {"a.trk": blob})
        out = tmp_path / "hist.csv"
        result = runner.invoke(
            main,
            ["trk", "histogram", "--backend", f"sim://{backing}",
             "--sim-latency", "0", "--blocksize", "4KiB", "--csv", str(out)],
        )
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.open()))
        assert sum(int(r["count"]) for r in rows) == 15


class TestCatCommand:
    def test_cat_reproduces_objects(self, runner, tmp_path):
        rng = np.random.default_rng(23)
        payloads = {
            "b.bin": rng.integers(0, 256, 3000, dtype=np.uint8).tobytes(),
            "a.bin": rng.integers(0, 256, 1000, dtype=np.uint8).tobytes(),
        }
        backing = make_backing(tmp_path, payloads)
        out = tmp_path / "cat.bin"
        result = runner.invoke(
            main,
            ["cat", "--backend", f"sim://{backing}", "--sim-latency", "0",
             "--blocksize", "4KiB", "--tiers", f"{tmp_path}/cache:1MiB",
             "--evict-interval", "0.02", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        # keys are consumed in sorted order
        assert out.read_bytes() == payloads["a.bin"] + payloads["b.bin"]


class TestBenchCommands:
    def test_bench_files_end_to_end(self, runner, tmp_path):
        backing = tmp_path / "store"
        gen = runner.invoke(
            main, ["fixture", "--backend", f"sim://{backing}", "--sizes", "64KiB,64KiB", "--seed", "2"]
        )
        assert gen.exit_code == 0
        out = tmp_path / "bench.csv"
        result = runner.invoke(
            main,
            ["bench", "files", "--backend", f"sim://{backing}",
             "--sim-latency", "0.002", "--sim-bandwidth", "2e8",
             "--tiers", f"{tmp_path}/cache:1MiB", "--blocksize", "16KiB",
             "--reps", "1", "--evict-interval", "0.02",
             "--counts", "1,2", "--csv", str(out)],
        )
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 4  # two counts x two modes
        assert {r["mode"] for r in rows} == {"sequential", "rolling"}
        assert all(r["ok"] == "True" for r in rows)

    def test_config_file_supplies_defaults(self, runner, tmp_path):
        backing = tmp_path / "store"
        runner.invoke(main, ["fixture", "--backend", f"sim://{backing}", "--sizes", "32KiB"])
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "backend": f"sim://{backing}",
            "tiers": f"{tmp_path}/cache:1MiB",
            "blocksize": "8KiB",
            "sim_latency": 0.001,
            "evict_interval": 0.02,
            "reps": 1,
            "counts": "1",
        }))
        out = tmp_path / "bench.csv"
        result = runner.invoke(
            main, ["--config", str(config), "bench", "files", "--csv", str(out)]
        )
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.open()))
        assert rows and all(r["blocksize"] == "8192" for r in rows)
