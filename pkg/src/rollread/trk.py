"""Lazy reader/writer for TrackVis-style ``.trk`` streamline files.

Layout per the public v2 format: a 1000-byte little-endian header, then one
record per streamline: an int32 point count ``n``, ``n * (3 + n_scalars)``
float32 values (xyz interleaved with per-point scalars), then
``n_properties`` float32 per-streamline values. Points are stored in
voxel-mm space; :func:`apply_affine` maps them to world coordinates.

Reading is lazy: one record at a time, three read calls per record, so the
parser can run directly on top of a prefetching stream.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Protocol

import numpy as np

from .errors import (
    BadHeaderSizeError,
    BadMagicError,
    CorruptCountError,
    EmptyFileError,
    InconsistentCountsError,
    SingularAffineError,
    TruncatedRecordError,
    UnsupportedVersionError,
)

MAGIC = b"TRACK"
HEADER_SIZE = 1000
SUPPORTED_VERSION = 2
DEFAULT_MAX_POINTS = 1_000_000

# field offsets within the 1000-byte header
_OFF_DIM = 6            # 3 x int16
_OFF_VOXEL_SIZES = 12   # 3 x float32
_OFF_ORIGIN = 24        # 3 x float32
_OFF_N_SCALARS = 36     # int16
_OFF_SCALAR_NAMES = 38  # 10 x char[20]
_OFF_N_PROPERTIES = 238  # int16
_OFF_PROPERTY_NAMES = 240  # 10 x char[20]
_OFF_VOX_TO_RAS = 440   # 4x4 float32, row-major
_OFF_VOXEL_ORDER = 948  # char[4]
_OFF_N_COUNT = 988      # int32
_OFF_VERSION = 992      # int32
_OFF_HDR_SIZE = 996     # int32


class Readable(Protocol):
    def read(self, n: int) -> bytes: ...
    def tell(self) -> int: ...


def _identity_affine() -> np.ndarray:
    return np.eye(4, dtype=np.float32)


@dataclass
class TrkHeader:
    """Decoded header fields; raw name tables are kept for round-trips."""

    dim: tuple[int, int, int] = (1, 1, 1)
    voxel_sizes: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    n_scalars: int = 0
    n_properties: int = 0
    vox_to_ras: np.ndarray = field(default_factory=_identity_affine)
    voxel_order: bytes = b"RAS\x00"
    n_count: int = 0
    version: int = SUPPORTED_VERSION
    header_size: int = HEADER_SIZE
    scalar_names: bytes = b"\x00" * 200
    property_names: bytes = b"\x00" * 200

    def point_values(self) -> int:
        return 3 + self.n_scalars

    def to_bytes(self) -> bytes:
        buf = bytearray(HEADER_SIZE)
        buf[0:6] = MAGIC.ljust(6, b"\x00")
        struct.pack_into("<3h", buf, _OFF_DIM, *self.dim)
        struct.pack_into("<3f", buf, _OFF_VOXEL_SIZES, *self.voxel_sizes)
        struct.pack_into("<3f", buf, _OFF_ORIGIN, *self.origin)
        struct.pack_into("<h", buf, _OFF_N_SCALARS, self.n_scalars)
        buf[_OFF_SCALAR_NAMES:_OFF_SCALAR_NAMES + 200] = self.scalar_names[:200].ljust(200, b"\x00")
        struct.pack_into("<h", buf, _OFF_N_PROPERTIES, self.n_properties)
        buf[_OFF_PROPERTY_NAMES:_OFF_PROPERTY_NAMES + 200] = self.property_names[:200].ljust(200, b"\x00")
        affine = np.asarray(self.vox_to_ras, dtype="<f4").reshape(4, 4)
        buf[_OFF_VOX_TO_RAS:_OFF_VOX_TO_RAS + 64] = affine.tobytes()
        buf[_OFF_VOXEL_ORDER:_OFF_VOXEL_ORDER + 4] = self.voxel_order[:4].ljust(4, b"\x00")
        struct.pack_into("<i", buf, _OFF_N_COUNT, self.n_count)
        struct.pack_into("<i", buf, _OFF_VERSION, self.version)
        struct.pack_into("<i", buf, _OFF_HDR_SIZE, self.header_size)
        return bytes(buf)


@dataclass
class Streamline:
    """One polyline: (n, 3) points, (n, n_scalars) scalars, (n_properties,)
    per-streamline properties, all float32."""

    points: np.ndarray
    scalars: np.ndarray = field(default_factory=lambda: np.empty((0, 0), np.float32))
    properties: np.ndarray = field(default_factory=lambda: np.empty(0, np.float32))

    @property
    def n_points(self) -> int:
        return len(self.points)


@dataclass
class LengthHistogram:
    bin_edges: np.ndarray  # n_bins + 1 strictly increasing values, mm
    counts: np.ndarray     # n_bins non-negative ints
    total: int


def parse_header(raw: bytes) -> TrkHeader:
    """Decode a 1000-byte header; magic, size field and version are checked."""
    if len(raw) != HEADER_SIZE:
        raise BadHeaderSizeError(f"header must be {HEADER_SIZE} bytes, got {len(raw)}")
    if raw[:5] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:6]!r}")
    header_size = struct.unpack_from("<i", raw, _OFF_HDR_SIZE)[0]
    if header_size != HEADER_SIZE:
        raise BadHeaderSizeError(f"hdr_size field is {header_size}, expected {HEADER_SIZE}")
    version = struct.unpack_from("<i", raw, _OFF_VERSION)[0]
    if version != SUPPORTED_VERSION:
        raise UnsupportedVersionError(f"version {version} not supported")
    n_scalars = struct.unpack_from("<h", raw, _OFF_N_SCALARS)[0]
    n_properties = struct.unpack_from("<h", raw, _OFF_N_PROPERTIES)[0]
    if n_scalars < 0 or n_properties < 0:
        raise BadHeaderSizeError(
            f"negative scalar/property counts: {n_scalars}, {n_properties}"
        )
    affine = np.frombuffer(raw, dtype="<f4", count=16, offset=_OFF_VOX_TO_RAS)
    return TrkHeader(
        dim=struct.unpack_from("<3h", raw, _OFF_DIM),
        voxel_sizes=struct.unpack_from("<3f", raw, _OFF_VOXEL_SIZES),
        origin=struct.unpack_from("<3f", raw, _OFF_ORIGIN),
        n_scalars=n_scalars,
        n_properties=n_properties,
        vox_to_ras=affine.reshape(4, 4).copy(),
        voxel_order=raw[_OFF_VOXEL_ORDER:_OFF_VOXEL_ORDER + 4],
        n_count=struct.unpack_from("<i", raw, _OFF_N_COUNT)[0],
        version=version,
        header_size=header_size,
        scalar_names=raw[_OFF_SCALAR_NAMES:_OFF_SCALAR_NAMES + 200],
        property_names=raw[_OFF_PROPERTY_NAMES:_OFF_PROPERTY_NAMES + 200],
    )


def read_header(stream: Readable) -> TrkHeader:
    raw = stream.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise BadHeaderSizeError(f"short header: {len(raw)} of {HEADER_SIZE} bytes")
    return parse_header(raw)


def next_streamline(
    stream: Readable,
    hdr: TrkHeader,
    *,
    end: int | None = None,
    max_points: int = DEFAULT_MAX_POINTS,
) -> Streamline | None:
    """Decode the record at the current position, or None at end of data.

    Issues exactly three reads: the 4-byte count, the point/scalar block,
    and the property block. ``end`` bounds this file's records inside a
    concatenated multi-file stream.
    """
    if end is not None and stream.tell() >= end:
        return None
    raw_count = stream.read(4)
    if len(raw_count) == 0:
        return None
    if len(raw_count) < 4:
        raise TruncatedRecordError("record count cut short")
    n = struct.unpack("<i", raw_count)[0]
    if n <= 0 or n > max_points:
        raise CorruptCountError(f"streamline point count {n} outside (0, {max_points}]")

    values = n * hdr.point_values()
    body = stream.read(values * 4)
    if len(body) < values * 4:
        raise TruncatedRecordError(
            f"expected {values * 4} point/scalar bytes, got {len(body)}"
        )
    props_raw = stream.read(hdr.n_properties * 4)
    if len(props_raw) < hdr.n_properties * 4:
        raise TruncatedRecordError(
            f"expected {hdr.n_properties * 4} property bytes, got {len(props_raw)}"
        )

    pts_scalars = np.frombuffer(body, dtype="<f4").reshape(n, hdr.point_values())
    return Streamline(
        points=pts_scalars[:, :3].copy(),
        scalars=pts_scalars[:, 3:].copy(),
        properties=np.frombuffer(props_raw, dtype="<f4").copy(),
    )


def iter_streamlines(
    stream: Readable,
    hdr: TrkHeader | None = None,
    *,
    end: int | None = None,
    max_points: int = DEFAULT_MAX_POINTS,
) -> Iterator[Streamline]:
    """Lazily yield the records of one file section.

    Reads the header first when ``hdr`` is None. A declared ``n_count > 0``
    caps the record count; 0 means unknown, read until ``end`` or EOF.
    """
    if hdr is None:
        hdr = read_header(stream)
    remaining = hdr.n_count if hdr.n_count > 0 else None
    while remaining is None or remaining > 0:
        s = next_streamline(stream, hdr, end=end, max_points=max_points)
        if s is None:
            break
        yield s
        if remaining is not None:
            remaining -= 1


class _FileSetStream(Protocol):
    def read(self, n: int) -> bytes: ...
    def tell(self) -> int: ...
    @property
    def fs(self): ...


def iter_fileset_streamlines(
    stream: _FileSetStream, *, max_points: int = DEFAULT_MAX_POINTS
) -> Iterator[Streamline]:
    """Iterate records across every file of a multi-file stream, parsing each
    file's own header at its boundary."""
    fs = stream.fs
    for i in range(fs.n_files):
        if fs.sizes[i] == 0:
            continue
        hdr = read_header(stream)
        yield from iter_streamlines(
            stream, hdr, end=fs.cumulative_offsets[i + 1], max_points=max_points
        )


def apply_affine(
    hdr: TrkHeader, s: Streamline, *, half_voxel_shift: bool = True
) -> Streamline:
    """Map stored voxel-mm points to world coordinates via ``vox_to_ras``.

    Points are first scaled to voxel units; with ``half_voxel_shift`` (the
    convention of the standard tooling, on by default) they are then shifted
    by -0.5 so coordinates refer to voxel centers before the affine applies.
    """
    A = np.asarray(hdr.vox_to_ras, dtype=np.float64).reshape(4, 4)
    if A[3, 3] == 0 or not np.allclose(A[3], [0.0, 0.0, 0.0, 1.0], atol=1e-5):
        raise SingularAffineError(f"invalid affine last row {A[3]}")
    voxel_sizes = np.asarray(hdr.voxel_sizes, dtype=np.float64)
    if np.any(voxel_sizes <= 0):
        raise SingularAffineError(f"non-positive voxel sizes {hdr.voxel_sizes}")
    pts = s.points.astype(np.float64) / voxel_sizes
    if half_voxel_shift:
        pts = pts - 0.5
    out = pts @ A[:3, :3].T + A[:3, 3]
    return Streamline(out.astype(np.float32), s.scalars, s.properties)


def streamline_length(s: Streamline) -> float:
    """Polyline length in mm: sum of distances between consecutive points."""
    if s.n_points < 2:
        return 0.0
    diffs = np.diff(s.points.astype(np.float64), axis=0)
    return float(np.sqrt((diffs * diffs).sum(axis=1)).sum())


def length_histogram(
    streamlines: Iterable[Streamline],
    n_bins: int = 20,
    *,
    bounds: tuple[float, float] | None = None,
) -> LengthHistogram:
    """Equal-width histogram of streamline lengths over [min, max].

    One lazy pass; only the lengths are buffered. ``bounds`` forces the
    range. A degenerate range (all lengths equal) is widened at the top by
    a few machine epsilons so every value lands in bin 0.
    """
    lengths = [streamline_length(s) for s in streamlines]
    if not lengths:
        raise EmptyFileError("no streamlines to histogram")
    if bounds is not None:
        lo, hi = bounds
    else:
        lo, hi = min(lengths), max(lengths)
    if hi <= lo:
        hi = lo + max(abs(lo), 1.0) * np.finfo(np.float64).eps * n_bins
    counts, edges = np.histogram(lengths, bins=n_bins, range=(lo, hi))
    return LengthHistogram(bin_edges=edges, counts=counts, total=len(lengths))


def _check_record(hdr: TrkHeader, s: Streamline) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    points = np.asarray(s.points, dtype="<f4")
    if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] < 1:
        raise InconsistentCountsError(f"points shape {points.shape} is not (n>=1, 3)")
    scalars = np.asarray(s.scalars, dtype="<f4").reshape(len(points), -1)
    if scalars.shape[1] != hdr.n_scalars:
        raise InconsistentCountsError(
            f"{scalars.shape[1]} scalars per point, header says {hdr.n_scalars}"
        )
    properties = np.asarray(s.properties, dtype="<f4").reshape(-1)
    if len(properties) != hdr.n_properties:
        raise InconsistentCountsError(
            f"{len(properties)} properties, header says {hdr.n_properties}"
        )
    return points, scalars, properties


def write_trk(hdr: TrkHeader, streamlines: Iterable[Streamline]) -> bytes:
    """Serialize a header plus records; ``parse(write(x))`` reproduces ``x``."""
    chunks = [hdr.to_bytes()]
    for s in streamlines:
        points, scalars, properties = _check_record(hdr, s)
        chunks.append(struct.pack("<i", len(points)))
        chunks.append(np.hstack([points, scalars]).astype("<f4").tobytes())
        chunks.append(properties.tobytes())
    return b"".join(chunks)


def write_trk_file(path, hdr: TrkHeader, streamlines: Iterable[Streamline]) -> int:
    """Stream records to ``path`` without building the blob in memory;
    returns bytes written."""
    written = 0
    with open(path, "wb") as f:
        written += f.write(hdr.to_bytes())
        for s in streamlines:
            points, scalars, properties = _check_record(hdr, s)
            written += f.write(struct.pack("<i", len(points)))
            written += f.write(np.hstack([points, scalars]).astype("<f4").tobytes())
            written += f.write(properties.tobytes())
    return written


def split_trk(data: bytes, n_shards: int) -> list[bytes]:
    """Split one file's records into ``n_shards`` files with near-equal
    streamline counts; concatenating the shards' records reproduces the
    original record sequence."""
    if n_shards < 1:
        raise ValueError("n_shards must be >= 1")
    import io

    f = io.BytesIO(data)
    hdr = read_header(f)
    records = list(iter_streamlines(f, hdr))
    base, extra = divmod(len(records), n_shards)
    shards = []
    pos = 0
    for i in range(n_shards):
        take = base + (1 if i < extra else 0)
        shard_hdr = parse_header(hdr.to_bytes())
        shard_hdr.n_count = take
        shards.append(write_trk(shard_hdr, records[pos:pos + take]))
        pos += take
    return shards


def read_trk_file(path) -> tuple[TrkHeader, list[Streamline]]:
    """Eagerly load a local file (convenience for tests and the CLI)."""
    with open(path, "rb") as f:
        hdr = read_header(f)
        return hdr, list(iter_streamlines(f, hdr))
