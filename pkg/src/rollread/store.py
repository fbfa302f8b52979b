"""Byte-range access to remote objects.

Two backends share one interface: a deterministic simulated store (plain
files plus injected latency/bandwidth delay) and an S3-compatible HTTP
client. Both are safe for concurrent ``get_range`` calls; the only mutable
state is the size cached on an :class:`ObjectRef`.
"""
from __future__ import annotations

import os
import threading
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import quote

import requests

from .errors import ObjectNotFound, OutOfRangeError, TransportError
from .s3sign import sign_headers

SIM_SCHEME = "sim://"
S3_SCHEME = "s3://"


@dataclass
class ObjectRef:
    """One remote object; ``size`` is cached after the first query."""

    store_uri: str
    key: str
    size: int | None = None

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("object key must be non-empty")
        if not (self.store_uri.startswith(SIM_SCHEME) or self.store_uri.startswith(S3_SCHEME)):
            raise ValueError(f"unsupported store uri: {self.store_uri!r}")
        if self.size is not None and self.size < 0:
            raise ValueError("object size must be >= 0")


@dataclass(frozen=True)
class SimStoreParams:
    """Injected delay parameters plus the directory holding object payloads."""

    backing_dir: Path
    latency: float = 0.0
    bandwidth: float = float("inf")

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise ValueError("latency must be >= 0")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")


def sim_delay(params: SimStoreParams, nbytes: int) -> float:
    """Seconds one simulated request of ``nbytes`` takes: latency + transfer."""
    if nbytes < 0:
        raise ValueError("nbytes must be >= 0")
    return params.latency + nbytes / params.bandwidth


class ObjectStore:
    """Uniform read-only access to one store (one bucket / one backing dir)."""

    uri: str

    def object_size(self, ref: ObjectRef) -> int:
        if ref.size is None:
            ref.size = self._size(ref.key)
        return ref.size

    def get_range(self, ref: ObjectRef, offset: int, length: int) -> bytes:
        """Bytes ``[offset, min(offset+length, size))`` of the object.

        Overrun past the end truncates; an offset at or past the end raises
        :class:`OutOfRangeError` (mirrors HTTP Range semantics).
        """
        raise NotImplementedError

    def list_keys(self, prefix: str = "") -> list[str]:
        """Lexicographically sorted keys matching ``prefix``."""
        raise NotImplementedError

    def ref(self, key: str) -> ObjectRef:
        return ObjectRef(self.uri, key)

    def refs(self, keys: list[str]) -> list[ObjectRef]:
        return [self.ref(k) for k in keys]

    def _size(self, key: str) -> int:
        raise NotImplementedError

    @staticmethod
    def _check_range_args(offset: int, length: int) -> None:
        if length < 1:
            raise ValueError("length must be >= 1")
        if offset < 0:
            raise OutOfRangeError(f"negative offset {offset}")


class SimStore(ObjectStore):
    """Objects are plain files under ``backing_dir``; every read sleeps
    ``sim_delay`` so benchmarks measure genuine wall time."""

    def __init__(self, params: SimStoreParams):
        self.params = params
        self.uri = SIM_SCHEME + str(params.backing_dir)

    def backing_path(self, key: str) -> Path:
        if key.startswith(("/", "..")) or "/../" in key:
            raise ValueError(f"bad object key: {key!r}")
        return Path(self.params.backing_dir) / key

    def put_object(self, key: str, payload: bytes) -> ObjectRef:
        """Write a payload into the backing directory (fixture plumbing)."""
        path = self.backing_path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
        return ObjectRef(self.uri, key, size=len(payload))

    def _size(self, key: str) -> int:
        try:
            return self.backing_path(key).stat().st_size
        except FileNotFoundError:
            raise ObjectNotFound(key) from None
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def get_range(self, ref: ObjectRef, offset: int, length: int) -> bytes:
        self._check_range_args(offset, length)
        size = self.object_size(ref)
        if offset >= size:
            raise OutOfRangeError(f"offset {offset} >= object size {size}")
        t0 = time.perf_counter()
        try:
            with open(self.backing_path(ref.key), "rb") as f:
                f.seek(offset)
                data = f.read(min(length, size - offset))
        except FileNotFoundError:
            raise ObjectNotFound(ref.key) from None
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        # the injected delay covers the whole call, local I/O included
        remaining = sim_delay(self.params, len(data)) - (time.perf_counter() - t0)
        if remaining > 0:
            time.sleep(remaining)
        return data

    def list_keys(self, prefix: str = "") -> list[str]:
        root = Path(self.params.backing_dir)
        if not root.is_dir():
            raise TransportError(f"backing dir missing: {root}")
        keys = [
            p.relative_to(root).as_posix()
            for p in root.rglob("*")
            if p.is_file()
        ]
        return sorted(k for k in keys if k.startswith(prefix))


class S3Store(ObjectStore):
    """S3-compatible client: GET with a ``Range`` header, HEAD for size.

    Credentials come from the standard environment variables
    (``AWS_ACCESS_KEY_ID``/``AWS_SECRET_ACCESS_KEY``/``AWS_SESSION_TOKEN``);
    without them requests go out unsigned. ``retries`` is the number of
    extra attempts after a transport failure.
    """

    def __init__(
        self,
        bucket: str,
        *,
        endpoint: str | None = None,
        region: str | None = None,
        retries: int = 0,
        timeout: float = 30.0,
    ):
        self.bucket = bucket
        self.uri = S3_SCHEME + bucket
        self.region = region or os.environ.get("AWS_REGION") or os.environ.get(
            "AWS_DEFAULT_REGION", "us-east-1"
        )
        self.endpoint = (
            endpoint
            or os.environ.get("AWS_ENDPOINT_URL")
            or os.environ.get("S3_ENDPOINT_URL")
            or f"https://s3.{self.region}.amazonaws.com"
        ).rstrip("/")
        self.retries = retries
        self.timeout = timeout
        self._local = threading.local()

    def _session(self) -> requests.Session:
        sess = getattr(self._local, "session", None)
        if sess is None:
            sess = self._local.session = requests.Session()
        return sess

    def _url(self, key: str) -> str:
        return f"{self.endpoint}/{self.bucket}/{quote(key)}"

    def _request(
        self,
        method: str,
        url: str,
        *,
        params: dict[str, str] | None = None,
        headers: dict[str, str] | None = None,
    ) -> requests.Response:
        params = params or {}
        headers = dict(headers or {})
        access_key = os.environ.get("AWS_ACCESS_KEY_ID")
        secret_key = os.environ.get("AWS_SECRET_ACCESS_KEY")
        if access_key and secret_key:
            headers = sign_headers(
                method,
                url,
                params,
                headers,
                access_key=access_key,
                secret_key=secret_key,
                session_token=os.environ.get("AWS_SESSION_TOKEN"),
                region=self.region,
            )
        last_exc: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                return self._session().request(
                    method, url, params=params, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
        raise TransportError(str(last_exc)) from last_exc

    def _size(self, key: str) -> int:
        resp = self._request("HEAD", self._url(key))
        if resp.status_code == 404:
            raise ObjectNotFound(key)
        if resp.status_code != 200:
            raise TransportError(f"HEAD {key}: HTTP {resp.status_code}")
        return int(resp.headers["Content-Length"])

    def get_range(self, ref: ObjectRef, offset: int, length: int) -> bytes:
        self._check_range_args(offset, length)
        end = offset + length - 1
        resp = self._request(
            "GET", self._url(ref.key), headers={"Range": f"bytes={offset}-{end}"}
        )
        if resp.status_code == 404:
            raise ObjectNotFound(ref.key)
        if resp.status_code == 416:
            raise OutOfRangeError(f"offset {offset} past end of {ref.key}")
        if resp.status_code == 206:
            return resp.content
        if resp.status_code == 200:
            # Server ignored the Range header; trim locally.
            return resp.content[offset : offset + length]
        raise TransportError(f"GET {ref.key}: HTTP {resp.status_code}")

    def list_keys(self, prefix: str = "") -> list[str]:
        keys: list[str] = []
        token: str | None = None
        while True:
            params = {"list-type": "2", "prefix": prefix}
            if token:
                params["continuation-token"] = token
            resp = self._request("GET", f"{self.endpoint}/{self.bucket}", params=params)
            if resp.status_code != 200:
                raise TransportError(f"LIST {prefix!r}: HTTP {resp.status_code}")
            try:
                root = ET.fromstring(resp.content)
            except ET.ParseError as exc:
                raise TransportError(f"bad list response: {exc}") from exc
            ns = ""
            if root.tag.startswith("{"):
                ns = root.tag[: root.tag.index("}") + 1]
            keys.extend(el.text or "" for el in root.iter(f"{ns}Key"))
            truncated = root.findtext(f"{ns}IsTruncated") == "true"
            token = root.findtext(f"{ns}NextContinuationToken")
            if not truncated or not token:
                break
        return sorted(keys)


def open_store(
    uri: str,
    *,
    sim_latency: float = 0.0,
    sim_bandwidth: float = float("inf"),
    s3_endpoint: str | None = None,
    s3_region: str | None = None,
    retries: int = 0,
) -> ObjectStore:
    """Build the backend named by ``uri`` (``sim://<dir>`` or ``s3://<bucket>``)."""
    if uri.startswith(SIM_SCHEME):
        backing = Path(uri[len(SIM_SCHEME):])
        return SimStore(SimStoreParams(backing, latency=sim_latency, bandwidth=sim_bandwidth))
    if uri.startswith(S3_SCHEME):
        bucket = uri[len(S3_SCHEME):].strip("/")
        return S3Store(bucket, endpoint=s3_endpoint, region=s3_region, retries=retries)
    raise ValueError(f"unsupported store uri: {uri!r}")
