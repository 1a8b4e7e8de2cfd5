"""Coordinatewise order on bit-encoded spin configurations.

A configuration of ``n_bits`` spins is an integer whose bit m is 1 when spin m
is +.  The order is bitwise inclusion, so the all-plus state ``2**n_bits - 1``
is the top element and 0 the bottom.  Signed measures are vectors of length
``2**n_bits``.
"""
from __future__ import annotations

from functools import lru_cache
from typing import List

import numpy as np
import networkx as nx
from networkx.algorithms.flow import boykov_kolmogorov, shortest_augmenting_path

__all__ = [
    "covering_pairs",
    "is_increasing",
    "upsets",
    "min_upset_mass",
    "min_upset_mass_enumerated",
    "stoch_positive",
    "stoch_leq",
]


@lru_cache(maxsize=32)
def covering_pairs(n_bits: int):
    """Arrays ``(lo, hi)`` of all pairs differing by one spin flipped from - to +."""
    states = np.arange(2 ** n_bits)
    lo, hi = [], []
    for m in range(n_bits):
        sel = states[(states >> m) & 1 == 0]
        lo.append(sel)
        hi.append(sel | (1 << m))
    return np.concatenate(lo), np.concatenate(hi)


def is_increasing(f: np.ndarray, n_bits: int, tol: float = 0.0) -> bool:
    """Whether ``f(x) <= f(y) + tol`` for every covering pair ``x < y``."""
    lo, hi = covering_pairs(n_bits)
    return bool(np.all(f[lo] <= f[hi] + tol))


def upsets(n_bits: int) -> List[int]:
    """All up-sets of the Boolean lattice as bitmasks over states (small n only)."""
    if n_bits > 5:
        raise ValueError("up-set enumeration is limited to 5 bits")
    return list(_upsets(n_bits))


@lru_cache(maxsize=8)
def _upsets(n_bits: int):
    if n_bits == 0:
        return (0, 1)
    smaller = _upsets(n_bits - 1)
    half = 2 ** (n_bits - 1)
    out = []
    # a state with the new top bit clear can only be in U if its partner
    # with the bit set is too, so the lower half is contained in the upper
    for u0 in smaller:
        for u1 in smaller:
            if u0 & ~u1 == 0:
                out.append(u0 | (u1 << half))
    return tuple(out)


def min_upset_mass_enumerated(rho: np.ndarray, n_bits: int) -> float:
    """Minimum of ``rho(U)`` over all up-sets by explicit enumeration."""
    best = 0.0
    states = np.arange(2 ** n_bits)
    for mask in upsets(n_bits):
        sel = ((mask >> states) & 1).astype(bool)
        val = float(rho[sel].sum())
        best = min(best, val)
    return best


def min_upset_mass(rho: np.ndarray, n_bits: int) -> float:
    """Exact minimum of ``rho(U)`` over up-sets ``U`` via a maximum-weight closure.

    Up-sets are the closed sets of the covering relation, so the minimizer is
    the source side of a minimum cut.  The cut is found with float capacities
    and its mass is then summed directly from ``rho``.
    """
    rho = np.asarray(rho, dtype=float)
    n = 2 ** n_bits
    if rho.shape != (n,):
        raise ValueError("rho has the wrong length")
    if n_bits <= 3:
        return min_upset_mass_enumerated(rho, n_bits)
    w = -rho
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    lo, hi = covering_pairs(n_bits)
    # any capacity above the total source capacity acts as infinite
    big = float(np.abs(w).sum()) + 1.0
    g.add_edges_from(zip(lo.tolist(), hi.tolist()), capacity=big)
    for x in np.nonzero(w > 0)[0].tolist():
        g.add_edge("src", x, capacity=float(w[x]))
    for x in np.nonzero(w < 0)[0].tolist():
        g.add_edge(x, "snk", capacity=float(-w[x]))
    if "src" not in g or "snk" not in g:
        # rho has one sign: the best up-set is empty or everything
        return min(0.0, float(rho.sum()))
    positive = float(w[w > 0].sum())
    for flow_func in (boykov_kolmogorov, shortest_augmenting_path):
        cut, (side, _) = nx.minimum_cut(g, "src", "snk", flow_func=flow_func)
        members = np.array(sorted(x for x in side if x != "src"), dtype=int)
        value = float(np.sum(rho[members])) if members.size else 0.0
        # the partition must realize the cut value; preflow-push style
        # solvers can return a stale partition with float capacities
        if abs(-value - (positive - cut)) <= 1e-9 * max(1.0, positive):
            return min(0.0, value)
    raise RuntimeError("minimum cut partition inconsistent with cut value")


def stoch_positive(rho: np.ndarray, n_bits: int, tol: float = 1e-12) -> bool:
    """Whether ``rho(f) >= 0`` for every increasing f, up to ``tol``.

    Constant functions are increasing with either sign, so ``rho`` must have
    zero mass; beyond that it suffices to test indicators of up-sets.
    """
    rho = np.asarray(rho, dtype=float)
    if abs(float(rho.sum())) > tol + 1e-12 * float(np.abs(rho).sum()):
        return False
    return min_upset_mass(rho, n_bits) >= -tol


def stoch_leq(mu: np.ndarray, nu: np.ndarray, n_bits: int, tol: float = 1e-12) -> bool:
    """``mu`` is stochastically dominated by ``nu``."""
    return stoch_positive(np.asarray(nu) - np.asarray(mu), n_bits, tol)
