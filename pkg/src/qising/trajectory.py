"""Spin trajectories on an imaginary-time interval and piecewise-constant fields.

A trajectory is a right-continuous function [0, beta] -> {+1, -1} stored as an
initial sign plus the sorted list of flip times.  A field is a piecewise-constant
real function on the same interval.  Everything here is immutable.
"""
from __future__ import annotations

import heapq
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Trajectory",
    "PiecewiseField",
    "ModelParams",
    "evaluate",
    "dot",
    "l1_distance",
    "partial_leq",
    "assemble_field",
    "restrict_field",
    "restrict_trajectory",
]

_BETA_RTOL = 1e-12


def _check_beta(a: float, b: float) -> None:
    if abs(a - b) > _BETA_RTOL * max(abs(a), abs(b)):
        raise ValueError(f"mismatched interval lengths: {a} vs {b}")


@dataclass(frozen=True)
class Trajectory:
    """Cadlag spin path: ``initial_sign * (-1) ** #{flips <= t}``."""

    initial_sign: int
    flips: tuple = ()
    beta: float = 1.0

    def __post_init__(self):
        if self.initial_sign not in (1, -1):
            raise ValueError("initial_sign must be +1 or -1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        flips = tuple(float(t) for t in self.flips)
        prev = 0.0
        for t in flips:
            if not (prev < t < self.beta):
                raise ValueError(
                    "flip times must be strictly increasing inside (0, beta)")
            prev = t
        object.__setattr__(self, "flips", flips)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "initial_sign", int(self.initial_sign))

    @classmethod
    def constant(cls, sign: int, beta: float) -> "Trajectory":
        return cls(sign, (), beta)

    @property
    def n_flips(self) -> int:
        return len(self.flips)

    @property
    def final_sign(self) -> int:
        return self.initial_sign if len(self.flips) % 2 == 0 else -self.initial_sign

    def is_constant(self) -> bool:
        return not self.flips

    def __call__(self, t: float) -> int:
        return evaluate(self, t)

    def pieces(self):
        """Breakpoints ``[0, t1, ..., beta]`` and the sign on each piece."""
        bps = [0.0, *self.flips, self.beta]
        s = self.initial_sign
        vals = []
        for _ in range(len(bps) - 1):
            vals.append(s)
            s = -s
        return bps, vals

    def flipped(self) -> "Trajectory":
        """Global spin flip."""
        return Trajectory(-self.initial_sign, self.flips, self.beta)

    def to_dict(self) -> dict:
        return {"initial_sign": self.initial_sign, "flips": list(self.flips),
                "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(int(d["initial_sign"]), tuple(d["flips"]), float(d["beta"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "Trajectory":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class PiecewiseField:
    """Piecewise-constant field; ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bps = tuple(float(t) for t in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bps) < 2 or len(vals) != len(bps) - 1:
            raise ValueError("need len(values) == len(breakpoints) - 1 >= 1")
        if bps[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, beta: float) -> "PiecewiseField":
        return cls((0.0, float(beta)), (float(value),))

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "PiecewiseField":
        bps, vals = traj.pieces()
        return cls(tuple(bps), tuple(vals))

    @property
    def beta(self) -> float:
        return self.breakpoints[-1]

    def segments(self):
        """Yield ``(start, end, value)`` for each constant piece."""
        b = self.breakpoints
        for i, v in enumerate(self.values):
            yield b[i], b[i + 1], v

    def __call__(self, t: float) -> float:
        if not 0.0 <= t <= self.beta:
            raise ValueError("t outside [0, beta]")
        i = min(bisect_right(self.breakpoints, t) - 1, len(self.values) - 1)
        return self.values[i]

    def integral(self) -> float:
        return sum((e - s) * v for s, e, v in self.segments())

    def l1_norm(self) -> float:
        return sum((e - s) * abs(v) for s, e, v in self.segments())

    def is_constant(self) -> bool:
        return len(set(self.values)) == 1

    def pieces(self):
        return list(self.breakpoints), list(self.values)

    def __add__(self, other: "PiecewiseField") -> "PiecewiseField":
        _check_beta(self.beta, other.beta)
        bps, vals = _merge_pieces([self.pieces(), other.pieces()], sum)
        return _canonical_field(bps, vals)

    def __sub__(self, other: "PiecewiseField") -> "PiecewiseField":
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> "PiecewiseField":
        return PiecewiseField(self.breakpoints, tuple(c * v for v in self.values))

    def discretize(self, n_slices: int) -> np.ndarray:
        """Average value of the field on each of ``n_slices`` equal slices."""
        beta = self.beta
        edges = np.linspace(0.0, beta, n_slices + 1)
        out = np.zeros(n_slices)
        for s, e, v in self.segments():
            lo = np.clip(edges[:-1], s, e)
            hi = np.clip(edges[1:], s, e)
            out += v * (hi - lo)
        return out / (beta / n_slices)


FieldLike = Union[float, PiecewiseField]


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature, transverse field and longitudinal base field."""

    beta: float
    lam: float
    h_base: FieldLike = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if isinstance(self.h_base, PiecewiseField):
            _check_beta(self.h_base.beta, self.beta)

    @property
    def h_field(self) -> PiecewiseField:
        if isinstance(self.h_base, PiecewiseField):
            return self.h_base
        return PiecewiseField.constant(float(self.h_base), self.beta)

    @property
    def h_constant(self) -> float:
        """Base field as a scalar; raises if it varies in time."""
        if isinstance(self.h_base, PiecewiseField):
            if not self.h_base.is_constant():
                raise ValueError("base field is not constant")
            return self.h_base.values[0]
        return float(self.h_base)


def evaluate(traj: Trajectory, t: float) -> int:
    """Sign of ``traj`` at time ``t`` (post-flip value at a flip time)."""
    if not 0.0 <= t <= traj.beta:
        raise ValueError(f"t={t} outside [0, {traj.beta}]")
    n = bisect_right(traj.flips, t)
    return traj.initial_sign if n % 2 == 0 else -traj.initial_sign


def _pieces(x):
    if isinstance(x, (Trajectory, PiecewiseField)):
        return x.pieces()
    raise TypeError(f"expected Trajectory or PiecewiseField, got {type(x)!r}")


def _merge_pieces(piece_lists, combine):
    """Common refinement of several piecewise functions.

    Returns breakpoints and ``combine([v1, v2, ...])`` on each piece of the
    merged partition.
    """
    ends = [p[0][-1] for p in piece_lists]
    beta = ends[0]
    cuts = sorted(set(t for p in piece_lists for t in p[0][1:-1]))
    bps = [0.0, *cuts, beta]
    idx = [0] * len(piece_lists)
    vals = []
    for k in range(len(bps) - 1):
        left = bps[k]
        cur = []
        for j, (pb, pv) in enumerate(piece_lists):
            while idx[j] + 1 < len(pv) and pb[idx[j] + 1] <= left:
                idx[j] += 1
            cur.append(pv[idx[j]])
        vals.append(combine(cur))
    return bps, vals


def _canonical_field(bps, vals) -> PiecewiseField:
    # drop breakpoints where the value does not change
    out_b, out_v = [bps[0]], [vals[0]]
    for t, v in zip(bps[1:-1], vals[1:]):
        if v != out_v[-1]:
            out_b.append(t)
            out_v.append(v)
    out_b.append(bps[-1])
    return PiecewiseField(tuple(out_b), tuple(out_v))


def _beta_of(x) -> float:
    return x.beta


def dot(a, b) -> float:
    """Exact ``int_0^beta a(t) b(t) dt`` over the merged partition."""
    _check_beta(_beta_of(a), _beta_of(b))
    bps, vals = _merge_pieces([_pieces(a), _pieces(b)], lambda v: v[0] * v[1])
    return math.fsum((bps[k + 1] - bps[k]) * v for k, v in enumerate(vals))


def l1_distance(a: Trajectory, b: Trajectory) -> float:
    """Exact ``int_0^beta |a(t) - b(t)| dt``."""
    _check_beta(a.beta, b.beta)
    bps, vals = _merge_pieces([_pieces(a), _pieces(b)], lambda v: abs(v[0] - v[1]))
    return math.fsum((bps[k + 1] - bps[k]) * v for k, v in enumerate(vals))


def partial_leq(a: Trajectory, b: Trajectory) -> bool:
    """True iff ``a(t) <= b(t)`` on every piece of the merged partition."""
    _check_beta(a.beta, b.beta)
    _, vals = _merge_pieces([_pieces(a), _pieces(b)], lambda v: v[0] <= v[1])
    return all(vals)


def _sweep_sum(base: PiecewiseField, trajs: Sequence[Trajectory]) -> PiecewiseField:
    """Sum of a field and spin trajectories using a merged event sweep."""
    beta = base.beta
    start = base.values[0] + sum(t.initial_sign for t in trajs)
    streams = []
    bps, vals = base.breakpoints, base.values
    streams.append([(bps[i], vals[i] - vals[i - 1]) for i in range(1, len(vals))])
    for tr in trajs:
        s = tr.initial_sign
        ev = []
        for t in tr.flips:
            ev.append((t, -2 * s))
            s = -s
        streams.append(ev)
    out_b, out_v = [0.0], [start]
    cur = start
    for t, d in heapq.merge(*streams):
        cur += d
        if t == out_b[-1]:
            out_v[-1] = cur
        else:
            out_b.append(t)
            out_v.append(cur)
    out_b.append(beta)
    # coalesce pieces whose value did not change
    return _canonical_field(out_b, out_v)


def assemble_field(params: ModelParams, neighbor_trajs: Iterable[Trajectory] = (),
                   extra: PiecewiseField | None = None) -> PiecewiseField:
    """Local field ``h_base + sum(neighbors) + extra`` as a piecewise-constant function."""
    trajs = list(neighbor_trajs)
    for t in trajs:
        _check_beta(t.beta, params.beta)
    base = params.h_field
    if extra is not None:
        _check_beta(extra.beta, params.beta)
        base = base + extra
    return _sweep_sum(base, trajs)


def restrict_field(f: PiecewiseField, t0: float, t1: float) -> PiecewiseField:
    """The field on ``[t0, t1]``, shifted to start at 0."""
    if not 0.0 <= t0 < t1 <= f.beta:
        raise ValueError("need 0 <= t0 < t1 <= beta")
    bps = [0.0]
    vals = []
    for s, e, v in f.segments():
        lo, hi = max(s, t0), min(e, t1)
        if hi > lo:
            if vals:
                bps.append(lo - t0)
            vals.append(v)
    bps.append(t1 - t0)
    return PiecewiseField(tuple(bps), tuple(vals))


def restrict_trajectory(tr: Trajectory, t0: float, t1: float) -> Trajectory:
    """The trajectory on ``[t0, t1]``, shifted to start at 0."""
    if not 0.0 <= t0 < t1 <= tr.beta:
        raise ValueError("need 0 <= t0 < t1 <= beta")
    return Trajectory(evaluate(tr, t0),
                      tuple(t - t0 for t in tr.flips if t0 < t < t1), t1 - t0)
