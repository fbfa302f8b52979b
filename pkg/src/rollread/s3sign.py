"""Minimal AWS Signature Version 4 signing for GET/HEAD requests.

Only what the S3 client needs: header-based auth, unsigned payloads.
"""
from __future__ import annotations

import hashlib
import hmac
from datetime import datetime, timezone
from urllib.parse import quote, urlsplit

UNSIGNED_PAYLOAD = "UNSIGNED-PAYLOAD"


def _hmac(key: bytes, msg: str) -> bytes:
    return hmac.new(key, msg.encode(), hashlib.sha256).digest()


def _uri_encode(value: str, *, keep_slash: bool = False) -> str:
    return quote(value, safe="/-_.~" if keep_slash else "-_.~")


def canonical_query(params: dict[str, str]) -> str:
    pairs = sorted((_uri_encode(k), _uri_encode(v)) for k, v in params.items())
    return "&".join(f"{k}={v}" for k, v in pairs)


def signing_key(secret_key: str, datestamp: str, region: str, service: str) -> bytes:
    k = _hmac(("AWS4" + secret_key).encode(), datestamp)
    k = _hmac(k, region)
    k = _hmac(k, service)
    return _hmac(k, "aws4_request")


def sign_headers(
    method: str,
    url: str,
    params: dict[str, str],
    headers: dict[str, str],
    *,
    access_key: str,
    secret_key: str,
    session_token: str | None = None,
    region: str = "us-east-1",
    service: str = "s3",
    payload_hash: str = UNSIGNED_PAYLOAD,
    payload_header: bool = True,
    now: datetime | None = None,
) -> dict[str, str]:
    """Return ``headers`` extended with SigV4 auth headers for the request.

    ``payload_header`` controls whether ``x-amz-content-sha256`` is sent as
    a signed header; S3 requires it, plain SigV4 services do not.
    """
    now = now or datetime.now(timezone.utc)
    amz_date = now.strftime("%Y%m%dT%H%M%SZ")
    datestamp = now.strftime("%Y%m%d")
    parts = urlsplit(url)

    signed = {k.lower(): v.strip() for k, v in headers.items()}
    signed["host"] = parts.netloc
    signed["x-amz-date"] = amz_date
    if payload_header:
        signed["x-amz-content-sha256"] = payload_hash
    if session_token:
        signed["x-amz-security-token"] = session_token

    header_names = sorted(signed)
    canonical_headers = "".join(f"{k}:{signed[k]}\n" for k in header_names)
    signed_header_list = ";".join(header_names)
    canonical_request = "\n".join(
        [
            method.upper(),
            _uri_encode(parts.path or "/", keep_slash=True),
            canonical_query(params),
            canonical_headers,
            signed_header_list,
            payload_hash,
        ]
    )

    scope = f"{datestamp}/{region}/{service}/aws4_request"
    string_to_sign = "\n".join(
        [
            "AWS4-HMAC-SHA256",
            amz_date,
            scope,
            hashlib.sha256(canonical_request.encode()).hexdigest(),
        ]
    )
    signature = hmac.new(
        signing_key(secret_key, datestamp, region, service),
        string_to_sign.encode(),
        hashlib.sha256,
    ).hexdigest()

    signed["authorization"] = (
        f"AWS4-HMAC-SHA256 Credential={access_key}/{scope}, "
        f"SignedHeaders={signed_header_list}, Signature={signature}"
    )
    return signed
