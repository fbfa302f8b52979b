"""Closed-form cost model for sequential vs. overlapped block transfers.

All quantities are seconds. The sequential baseline pays latency per block,
bandwidth for the whole payload, then computes; the overlapped pipeline
hides the cheaper of per-block transfer and per-block compute behind the
other, bounding the achievable speedup below 2x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

INF = float("inf")


@dataclass(frozen=True)
class ModelParams:
    """Inputs: block count, payload bytes, latencies, bandwidths, compute rate.

    ``c`` is compute seconds per byte consumed; ``l_l``, ``b_lw``, ``b_lr``
    describe local (cache) storage and default to the free-local idealization.
    """

    n_b: int
    f: float
    l_c: float
    b_cr: float
    c: float = 0.0
    l_l: float = 0.0
    b_lw: float = INF
    b_lr: float = INF

    def __post_init__(self) -> None:
        if self.n_b < 1:
            raise ValueError("n_b must be >= 1")
        if self.f < 0:
            raise ValueError("f must be >= 0")
        if self.b_cr <= 0 or self.b_lw <= 0 or self.b_lr <= 0:
            raise ValueError("bandwidths must be > 0")
        if self.l_c < 0 or self.l_l < 0:
            raise ValueError("latencies must be >= 0")
        if self.c < 0:
            raise ValueError("compute rate must be >= 0")

    def idealized(self) -> "ModelParams":
        """Same params with local transfers free (l_l = 0, infinite local bw)."""
        return replace(self, l_l=0.0, b_lw=INF, b_lr=INF)

    def with_blocks(self, n_b: int) -> "ModelParams":
        return replace(self, n_b=n_b)


def t_seq(p: ModelParams) -> float:
    """Fetch-then-compute total: per-block latency, one bandwidth term, compute."""
    return p.n_b * p.l_c + p.f / p.b_cr + p.c * p.f


def t_cloud(p: ModelParams) -> float:
    """Per block: download from the remote store and write it to local cache."""
    return p.l_c + p.f / (p.b_cr * p.n_b) + p.l_l + p.f / (p.b_lw * p.n_b)


def t_comp(p: ModelParams) -> float:
    """Per block: read back from local cache and run the application compute."""
    return p.l_l + p.f / (p.b_lr * p.n_b) + p.c * p.f / p.n_b


def t_pf(p: ModelParams) -> float:
    """Overlapped pipeline: first fetch and last compute are exposed, the
    middle n_b - 1 stages cost the larger of the two per-block times."""
    cloud = t_cloud(p)
    comp = t_comp(p)
    return cloud + (p.n_b - 1) * max(cloud, comp) + comp


def speedup(p: ModelParams) -> float:
    """Sequential over overlapped time, in the free-local regime; always in [1, 2).

    Local parameters are substituted with the idealization rather than
    trusted from the caller, because the bound only holds there.
    """
    q = p.idealized()
    pf = t_pf(q)
    if pf == 0.0:
        return 1.0
    # mathematically >= 1; the max() only absorbs float rounding
    return max(1.0, t_seq(q) / pf)


def optimal_blocks(c: float, f: float, l_c: float) -> int:
    """Block count minimizing the overlapped time: sqrt(c*f/l_c), rounded to
    the nearest integer and clamped to >= 1."""
    if l_c <= 0:
        raise ValueError("l_c must be > 0")
    if c < 0 or f < 0:
        raise ValueError("c and f must be >= 0")
    return max(1, round(math.sqrt(c * f / l_c)))


def asymptote_gap(p: ModelParams) -> float:
    """Large-block-count diagnostic: the two runtimes grow along parallel
    lines n_b*l_c and n_b*(l_c + l_l); their separation is n_b*l_l."""
    return p.n_b * p.l_l
