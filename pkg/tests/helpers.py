"""Shared builders for the test suite."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from rollread import CacheLocation, FileSet, SimStore, SimStoreParams
from rollread.trk import Streamline, TrkHeader, write_trk


def make_store(
    base: Path,
    payloads: dict[str, bytes],
    *,
    latency: float = 0.0,
    bandwidth: float = float("inf"),
) -> SimStore:
    backing = base / "backing"
    backing.mkdir(parents=True, exist_ok=True)
    store = SimStore(SimStoreParams(backing, latency=latency, bandwidth=bandwidth))
    for key, payload in payloads.items():
        store.put_object(key, payload)
    return store


def make_tiers(base: Path, *capacities: int) -> list[CacheLocation]:
    return [
        CacheLocation(base / f"tier{i}", cap, priority=i)
        for i, cap in enumerate(capacities)
    ]


def make_fileset(store: SimStore, keys: list[str], blocksize: int) -> FileSet:
    return FileSet.resolve(store, keys, blocksize)


def random_payloads(rng: np.random.Generator, sizes: list[int]) -> dict[str, bytes]:
    return {
        f"obj-{i:02d}.bin": rng.integers(0, 256, size=n, dtype=np.uint8).tobytes()
        for i, n in enumerate(sizes)
    }


def random_streamlines(
    rng: np.random.Generator,
    count: int,
    *,
    n_scalars: int = 0,
    n_properties: int = 0,
    max_points: int = 20,
) -> list[Streamline]:
    out = []
    for _ in range(count):
        n = int(rng.integers(1, max_points + 1))
        out.append(
            Streamline(
                points=rng.random((n, 3), dtype=np.float32) * 50,
                scalars=rng.random((n, n_scalars), dtype=np.float32),
                properties=rng.random(n_properties, dtype=np.float32),
            )
        )
    return out


def streamlines_equal(a: Streamline, b: Streamline) -> bool:
    return (
        np.array_equal(a.points, b.points)
        and np.array_equal(a.scalars.reshape(len(a.points), -1),
                           b.scalars.reshape(len(b.points), -1))
        and np.array_equal(a.properties.reshape(-1), b.properties.reshape(-1))
    )


def trk_bytes(
    rng: np.random.Generator,
    count: int,
    *,
    n_scalars: int = 0,
    n_properties: int = 0,
    set_n_count: bool = True,
) -> tuple[TrkHeader, list[Streamline], bytes]:
    hdr = TrkHeader(n_scalars=n_scalars, n_properties=n_properties)
    records = random_streamlines(rng, count, n_scalars=n_scalars, n_properties=n_properties)
    if set_n_count:
        hdr.n_count = len(records)
    return hdr, records, write_trk(hdr, records)
