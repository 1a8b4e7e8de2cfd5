"""Exact draws from the single-site tilted path measure.

The measure on trajectories is ``exp(h . sigma) dphi(sigma) / Z`` where ``phi``
is the Poisson(lam) flip process with a fair initial sign, possibly restricted
by an endpoint condition.  Sampling is done in two stages:

1. the signs at the breakpoints of the (piecewise-constant) field are drawn by
   forward filtering / backward sampling with the exact 2x2 segment kernels;
2. inside each constant-field segment the path is an endpoint-conditioned
   two-state jump process, drawn exactly by uniformization.
"""
from __future__ import annotations

import math
from typing import Callable, List, Tuple

import numpy as np

from .transfer import FREE, EndpointCondition, sign_index
from .trajectory import (ModelParams, PiecewiseField, Trajectory, dot,
                         evaluate, restrict_field)

__all__ = [
    "sample_free_reference",
    "sample_site",
    "sample_bridge",
    "monotone_endpoint_coupling",
    "increasing_function_suite",
]


def sample_free_reference(params: ModelParams, rng: np.random.Generator) -> Trajectory:
    """Draw from the reference flip process (Poisson(lam) flips, fair initial sign)."""
    beta = params.beta
    n = rng.poisson(params.lam * beta)
    flips = np.sort(rng.uniform(0.0, beta, size=n))
    sign = 1 if rng.random() < 0.5 else -1
    return Trajectory(sign, tuple(flips), beta)


def _bridge_flip_offsets(h: float, lam: float, length: float, a: int, b: int,
                         rng: np.random.Generator) -> List[float]:
    """Flip times (relative to segment start) of a path from index a to index b.

    The tilted generator ``M - lam I`` with ``M = [[h, lam], [lam, -h]]`` is
    written as ``(c - lam) I + omega (P - I)`` with P substochastic, which
    turns the bridge into a Poisson number of uniform event times carrying a
    discrete bridge of P.
    """
    if lam == 0.0 or length == 0.0:
        if a != b:
            raise ValueError("bridge endpoints differ but no flips are possible")
        return []
    ah = abs(h)
    c = ah + lam
    om = 2.0 * ah + lam
    p00 = 1.0 + (h - c) / om
    p11 = 1.0 + (-h - c) / om
    p01 = lam / om
    mu = om * length
    kmax = int(mu + 10.0 * math.sqrt(mu) + 20.0)
    # total weight sum_n Pois(n; mu) (P^n)[a, b] equals a kernel entry
    r = math.hypot(h, lam)
    log_scale = (-lam if r * length < 1e-6 else r - lam) * length
    total = _segment_matrix(h, lam, length)[2 * a + b] * math.exp(log_scale + (lam - c) * length)
    if not total > 0:
        raise ValueError("bridge has zero probability")
    # cols[n] = column b of P^n, extended while scanning for n
    u0, u1 = (1.0, 0.0) if b == 0 else (0.0, 1.0)
    cols = [(u0, u1)]
    target = rng.random() * total
    if mu < 600.0:
        pois = math.exp(-mu)
        acc = pois * (u0 if a == 0 else u1)
        n = 0
        while acc <= target and n < kmax:
            n += 1
            pois *= mu / n
            u0, u1 = p00 * u0 + p01 * u1, p01 * u0 + p11 * u1
            cols.append((u0, u1))
            acc += pois * (u0 if a == 0 else u1)
    else:
        # large mean: log-space weights, renormalized over the truncated range
        for _ in range(kmax):
            u0, u1 = p00 * u0 + p01 * u1, p01 * u0 + p11 * u1
            cols.append((u0, u1))
        log_mu = math.log(mu)
        logw = [k * log_mu - math.lgamma(k + 1) for k in range(kmax + 1)]
        top = max(logw)
        w = [math.exp(lw - top) * cols[k][a] for k, lw in enumerate(logw)]
        target = rng.random() * math.fsum(w)
        acc = 0.0
        n = kmax
        for k, wk in enumerate(w):
            acc += wk
            if target < acc:
                n = k
                break
    if n == 0:
        return []
    times = np.sort(rng.random(n)) * length
    draws = rng.random(n - 1) if n > 1 else ()
    out = []
    x = a
    for i in range(1, n):
        col = cols[n - i]
        if x == 0:
            w0, w1 = p00 * col[0], p01 * col[1]
        else:
            w0, w1 = p01 * col[0], p11 * col[1]
        y = 0 if draws[i - 1] * (w0 + w1) < w0 else 1
        if y != x:
            out.append(float(times[i - 1]))
        x = y
    if x != b:
        out.append(float(times[n - 1]))
    return out


def sample_bridge(h: float, lam: float, length: float, start: int, end: int,
                  rng: np.random.Generator) -> Trajectory:
    """Constant-field path on ``[0, length]`` pinned at both ends."""
    flips = _bridge_flip_offsets(h, lam, length, sign_index(start), sign_index(end), rng)
    return Trajectory(start, tuple(flips), length)


def _segment_matrix(h: float, lam: float, t: float):
    """Kernel of a constant-field segment as a tuple, up to a positive factor."""
    if t == 0.0:
        return (1.0, 0.0, 0.0, 1.0)
    r = math.hypot(h, lam)
    rt = r * t
    if rt < 1e-6:
        a, b = 1.0 + 0.5 * rt * rt, t * (1.0 + rt * rt / 6.0)
    else:
        e = math.exp(-2.0 * rt)
        a, b = 0.5 * (1.0 + e), 0.5 * (1.0 - e) / r
    return (a + b * h, b * lam, b * lam, a - b * h)


def _breakpoint_signs(segs, lam, bc: EndpointCondition, rng):
    """Sign indices at the field breakpoints, drawn by forward filtering backward sampling."""
    mats = [_segment_matrix(h, lam, e - s) for s, e, h in segs]
    m = len(mats)
    # back[j] = (w[0][0], w[0][1], w[1][0], w[1][1]) with w[y][x0] the weight of
    # continuing from index y at breakpoint j given initial index x0
    mask = bc.mask()
    back = [None] * (m + 1)
    back[m] = (mask[0, 0], mask[1, 0], mask[0, 1], mask[1, 1])
    for j in range(m - 1, -1, -1):
        k00, k01, k10, k11 = mats[j]
        b00, b01, b10, b11 = back[j + 1]
        v = (k00 * b00 + k01 * b10, k00 * b01 + k01 * b11,
             k10 * b00 + k11 * b10, k10 * b01 + k11 * b11)
        top = max(v)
        back[j] = (v[0] / top, v[1] / top, v[2] / top, v[3] / top)
    p_plus, p_minus = 0.5, 0.5
    if bc.start is not None:
        p_plus, p_minus = (1.0, 0.0) if bc.start > 0 else (0.0, 1.0)
    w0 = p_plus * back[0][0]
    w1 = p_minus * back[0][3]
    if not w0 + w1 > 0:
        raise ValueError(f"endpoint condition {bc} has zero probability")
    x0 = 0 if rng.random() * (w0 + w1) < w0 else 1
    states = [x0]
    x = x0
    u = rng.random(m)
    for j in range(m):
        k = mats[j]
        nb = back[j + 1]
        w0 = k[2 * x] * nb[x0]
        w1 = k[2 * x + 1] * nb[2 + x0]
        x = 0 if u[j] * (w0 + w1) < w0 else 1
        states.append(x)
    return states


def sample_site(field: PiecewiseField, params: ModelParams,
                bc: EndpointCondition = FREE, rng: np.random.Generator | None = None) -> Trajectory:
    """Exact draw from the tilted single-site measure with field ``field``."""
    if rng is None:
        raise ValueError("an explicit random generator is required")
    lam = params.lam
    segs = list(field.segments())
    states = _breakpoint_signs(segs, lam, bc, rng)
    flips: List[float] = []
    for j, (s, e, h) in enumerate(segs):
        a, b = states[j], states[j + 1]
        if lam == 0.0:
            continue
        for off in _bridge_flip_offsets(h, lam, e - s, a, b, rng):
            t = s + off
            # guard against rounding onto the segment ends
            if s < t < e and (not flips or t > flips[-1]):
                flips.append(t)
    # a flip landing exactly on a breakpoint has probability zero; if rounding
    # dropped one the parity below repairs nothing, so check consistency
    sign = 1 if states[0] == 0 else -1
    traj = Trajectory(sign, tuple(flips), field.beta)
    end = 1 if states[-1] == 0 else -1
    if traj.final_sign != end:
        raise RuntimeError("bridge parity mismatch (rounding collision)")
    return traj


def monotone_endpoint_coupling(field: PiecewiseField, params: ModelParams,
                               rng: np.random.Generator) -> Tuple[Trajectory, Trajectory]:
    """Ordered pair with laws ``mu(. | sigma(beta)=+)`` and ``mu(. | sigma(beta)=-)``.

    The two last-flip times are drawn independently; before the later one the
    paths share a common segment ending in the sign that the later path held
    just before its last flip.
    """
    if params.lam <= 0:
        raise ValueError("the coupling needs lam > 0")
    up = sample_site(field, params, EndpointCondition(end=1), rng)
    down = sample_site(field, params, EndpointCondition(end=-1), rng)
    t_up = up.flips[-1] if up.flips else 0.0
    t_down = down.flips[-1] if down.flips else 0.0
    t_last = max(t_up, t_down)
    beta = field.beta
    if t_last == 0.0:
        return Trajectory.constant(1, beta), Trajectory.constant(-1, beta)
    eps = 1 if t_up < t_down else -1
    sub_params = ModelParams(t_last, params.lam)
    common = sample_site(restrict_field(field, 0.0, t_last), sub_params,
                         EndpointCondition(end=eps), rng)
    head = common.flips
    plus = Trajectory(common.initial_sign, head + ((t_last,) if eps == -1 else ()), beta)
    minus = Trajectory(common.initial_sign, head + ((t_last,) if eps == 1 else ()), beta)
    return plus, minus


def _min_on_grid(ts):
    def f(s: Trajectory) -> float:
        return float(min(evaluate(s, t) for t in ts))
    return f


def increasing_function_suite(beta: float, n_grid: int = 4) -> List[Tuple[str, Callable]]:
    """Fixed library of increasing statistics of a trajectory on ``[0, beta]``.

    ``magnetization`` is normalized so that it equals +1 on the constant +
    path and -1 on the constant - path.
    """
    grid = [beta * k / n_grid for k in range(n_grid)] + [beta]
    one = Trajectory.constant(1, beta)
    suite: List[Tuple[str, Callable]] = [
        ("dot_one", lambda s: dot(s, one)),
        ("magnetization", lambda s: dot(s, one) / beta),
    ]
    for t in grid:
        suite.append((f"value_at_{t:.4g}", lambda s, t=t: float(evaluate(s, t))))
    suite.append(("all_plus_on_grid",
                  lambda s: float(all(evaluate(s, t) == 1 for t in grid))))
    suite.append(("min_on_grid", _min_on_grid(grid)))
    suite.append(("ends_plus", lambda s: float(s.initial_sign == 1 and s.final_sign == 1)))
    suite.append(("minus_ends_minus",
                  lambda s: -float(s.initial_sign == -1 and s.final_sign == -1)))
    suite.append(("fraction_plus", lambda s: 0.5 * (1.0 + dot(s, one) / beta)))
    return suite
