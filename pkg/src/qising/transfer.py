"""Exact 2x2 endpoint propagators of the tilted single-site path measure.

Index 0 is the + sign and index 1 the - sign.  Over an interval of length t
with constant field h the (unnormalized) kernel is

    K(t) = exp(-lam t) * expm(t * [[h, lam], [lam, -h]]),

whose entry K[a, b] is the reference-measure weight of paths that start in a
and end in b, tilted by exp(int h sigma).  Partition functions are reported
relative to the reference measure, with its 1/2 prior on the initial sign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .trajectory import ModelParams, PiecewiseField

__all__ = [
    "EndpointCondition",
    "FREE",
    "PERIODIC",
    "sign_index",
    "interval_kernel",
    "interval_kernel_scaled",
    "path_kernel",
    "path_kernel_scaled",
    "endpoint_law",
    "log_partition",
]

_SERIES_CUTOFF = 1e-6


def sign_index(s: int) -> int:
    """Row/column index of a sign: + -> 0, - -> 1."""
    return 0 if s > 0 else 1


@dataclass(frozen=True)
class EndpointCondition:
    """Imaginary-time boundary condition for a single site.

    ``start``/``end`` pin sigma(0)/sigma(beta) when not None; ``periodic``
    imposes sigma(0) == sigma(beta).
    """

    start: Optional[int] = None
    end: Optional[int] = None
    periodic: bool = False

    def __post_init__(self):
        for s in (self.start, self.end):
            if s not in (None, 1, -1):
                raise ValueError("pinned signs must be +1 or -1")
        if self.periodic and (self.start is not None or self.end is not None):
            raise ValueError("periodic condition cannot be combined with pins")

    @classmethod
    def pinned(cls, start: Optional[int], end: Optional[int]) -> "EndpointCondition":
        return cls(start=start, end=end)

    def mask(self) -> np.ndarray:
        """0/1 matrix of allowed (sigma(0), sigma(beta)) pairs."""
        m = np.ones((2, 2))
        if self.periodic:
            return np.eye(2)
        if self.start is not None:
            m[1 - sign_index(self.start), :] = 0.0
        if self.end is not None:
            m[:, 1 - sign_index(self.end)] = 0.0
        return m


FREE = EndpointCondition()
PERIODIC = EndpointCondition(periodic=True)


def _sinhc_parts(h: float, lam: float, t: float):
    """Return (log_scale, c_plus, c_minus) with K = e^{log_scale} (a I + b M)."""
    r = math.hypot(h, lam)
    rt = r * t
    if rt < _SERIES_CUTOFF:
        # cosh(rt) and sinh(rt)/r by their Taylor series
        ch = 1.0 + 0.5 * rt * rt
        sh_over_r = t * (1.0 + rt * rt / 6.0)
        return -lam * t, ch, sh_over_r
    e = math.exp(-2.0 * rt)
    return (r - lam) * t, 0.5 * (1.0 + e), 0.5 * (1.0 - e) / r


def interval_kernel_scaled(h: float, lam: float, t: float):
    """Kernel over a constant-field interval as ``(matrix, log_scale)``.

    The true kernel is ``matrix * exp(log_scale)``; ``matrix`` has entries of
    order one, which keeps long products free of over/underflow.
    """
    if t < 0:
        raise ValueError("interval length must be nonnegative")
    if t == 0:
        return np.eye(2), 0.0
    log_scale, a, b = _sinhc_parts(h, lam, t)
    m = np.array([[a + b * h, b * lam], [b * lam, a - b * h]])
    return m, log_scale


def interval_kernel(h: float, lam: float, t: float) -> np.ndarray:
    """Kernel over a constant-field interval, ``e^{-lam t} expm(t [[h, lam], [lam, -h]])``."""
    m, log_scale = interval_kernel_scaled(h, lam, t)
    return m * math.exp(log_scale)


def path_kernel_scaled(field: PiecewiseField, params: ModelParams):
    """Ordered product of interval kernels, renormalized: ``(matrix, log_scale)``."""
    total = np.eye(2)
    log_scale = 0.0
    for s, e, h in field.segments():
        m, ls = interval_kernel_scaled(h, params.lam, e - s)
        total = total @ m
        norm = total.max()
        total /= norm
        log_scale += ls + math.log(norm)
    return total, log_scale


def path_kernel(field: PiecewiseField, params: ModelParams) -> np.ndarray:
    m, log_scale = path_kernel_scaled(field, params)
    return m * math.exp(log_scale)


def endpoint_law(field: PiecewiseField, params: ModelParams,
                 bc: EndpointCondition = FREE) -> np.ndarray:
    """Joint law of (sigma(0), sigma(beta)) as a 2x2 probability matrix."""
    m, _ = path_kernel_scaled(field, params)
    w = m * bc.mask()
    z = w.sum()
    if not z > 0:
        raise ValueError(f"endpoint condition {bc} has zero probability")
    return w / z


def log_partition(field: PiecewiseField, params: ModelParams,
                  bc: EndpointCondition = FREE) -> float:
    """Log of the reference-measure expectation of ``exp(h . sigma)`` on the bc event."""
    m, log_scale = path_kernel_scaled(field, params)
    z = 0.5 * (m * bc.mask()).sum()
    if not z > 0:
        return -math.inf
    return math.log(z) + log_scale
