"""Suzuki-Trotter discretization of a single spin trajectory.

The interval [0, beta] is cut into N slices of width delta = beta / N.  A
column is an integer in [0, 2**N) whose bit k is 1 when the spin is + on slice
k.  The reference weight of a column is a product over slice boundaries of p
(flip) or 1 - p (no flip) with p = lam delta / (1 + lam delta); the boundary
between the last and the first slice counts only for periodic columns.  A
field contributes ``exp(delta * sum_k f_k s_k)``.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .trajectory import Trajectory, evaluate

__all__ = [
    "slice_signs",
    "flip_probability",
    "log_reference_weights",
    "grid_single_site",
    "trajectory_to_column",
    "column_to_trajectory",
    "column_from_signs",
    "sample_column",
]


@lru_cache(maxsize=32)
def _slice_signs(n: int) -> np.ndarray:
    states = np.arange(2 ** n)
    s = 2 * ((states[:, None] >> np.arange(n)[None, :]) & 1) - 1
    s = s.astype(np.int8)
    s.setflags(write=False)
    return s


def slice_signs(n: int) -> np.ndarray:
    """Read-only ``(2**n, n)`` array of slice signs for every column."""
    return _slice_signs(n)


def flip_probability(lam: float, delta: float) -> float:
    return lam * delta / (1.0 + lam * delta)


@lru_cache(maxsize=64)
def _log_reference(n: int, lam: float, beta: float, periodic: bool) -> np.ndarray:
    s = slice_signs(n).astype(np.int64)
    p = flip_probability(lam, beta / n)
    flips = (s[:, 1:] != s[:, :-1]).sum(axis=1)
    n_bound = n - 1
    if periodic:
        flips = flips + (s[:, 0] != s[:, -1])
        n_bound = n
    with np.errstate(divide="ignore"):
        lp = math.log(p) if p > 0 else -math.inf
        lq = math.log1p(-p)
    out = np.where(flips > 0, np.maximum(flips, 1) * lp, 0.0) + (n_bound - flips) * lq
    out.setflags(write=False)
    return out


def log_reference_weights(n: int, lam: float, beta: float, periodic: bool = False) -> np.ndarray:
    """Unnormalized log reference weight of each column."""
    return _log_reference(int(n), float(lam), float(beta), bool(periodic))


def grid_single_site(field_slices, lam: float, beta: float, periodic: bool = False) -> np.ndarray:
    """Probability vector of a column in the slice-wise field ``field_slices``."""
    f = np.asarray(field_slices, dtype=float)
    n = f.shape[-1]
    logw = log_reference_weights(n, lam, beta, periodic) + (beta / n) * (slice_signs(n) @ f)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def trajectory_to_column(traj: Trajectory, n: int) -> int:
    """Column holding the trajectory's sign at each slice midpoint."""
    col = 0
    for k in range(n):
        if evaluate(traj, traj.beta * (k + 0.5) / n) > 0:
            col |= 1 << k
    return col


def column_to_trajectory(col: int, n: int, beta: float) -> Trajectory:
    """Piecewise-constant trajectory that flips at slice boundaries."""
    signs = [1 if (col >> k) & 1 else -1 for k in range(n)]
    flips = tuple(beta * k / n for k in range(1, n) if signs[k] != signs[k - 1])
    return Trajectory(signs[0], flips, beta)


def column_from_signs(signs) -> int:
    col = 0
    for k, s in enumerate(signs):
        if s > 0:
            col |= 1 << k
    return col


def sample_column(field_slices, lam: float, beta: float, periodic: bool,
                  uniforms) -> int:
    """Heat-bath column draw by sequential per-slice inverse CDF.

    Slice 0 is drawn from its marginal, then each slice given the previous
    one (and slice 0 for periodic columns).  Slice k is + exactly when
    ``uniforms[k]`` is at least the conditional probability of -.  For
    ``lam * delta <= 1`` every conditional probability of + increases with
    the field and with the conditioning spins, so feeding the same uniforms
    to two ordered inputs yields ordered outputs.
    """
    f = np.asarray(field_slices, dtype=float)
    n = f.shape[0]
    delta = beta / n
    p = flip_probability(lam, delta)
    psi = np.array([[1.0 - p, p], [p, 1.0 - p]])  # index 0 = -, 1 = +
    unary = np.exp(delta * np.stack([-f, f], axis=1))  # (n, 2)
    # back[k][s, s0]: weight of slices k+1..n-1 given slice k = s (and slice 0 = s0)
    back = np.empty((n, 2, 2))
    if periodic:
        back[n - 1] = psi
    else:
        back[n - 1] = 1.0
    for k in range(n - 2, -1, -1):
        v = psi @ (unary[k + 1][:, None] * back[k + 1])
        back[k] = v / v.max()
    if periodic:
        w0 = unary[0] * np.array([back[0][0, 0], back[0][1, 1]])
    else:
        w0 = unary[0] * back[0][:, 0]
    cur = 1 if uniforms[0] * (w0[0] + w0[1]) >= w0[0] else 0
    s0 = cur
    col = cur
    for k in range(1, n):
        w = psi[cur] * unary[k] * back[k][:, s0]
        cur = 1 if uniforms[k] * (w[0] + w[1]) >= w[0] else 0
        col |= cur << k
    return col
