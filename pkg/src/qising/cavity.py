"""Discretized cavity recursion on b-ary trees.

Trajectories are Suzuki-Trotter columns of N slices (see :mod:`qising.grid`).
A *measure* is a vector over the 2**N columns; a *kernel* is a matrix whose
row ``eta`` is a measure (the law of a vertex given its parent's column).

The resampling operator maps kernels ``rho_1..rho_b`` of the children and a
measure ``rho`` of the vertex's own previous column to

    R(rho)(sigma) = sum_{sigma0} rho(sigma0) sum_s P(s | sigma0) mu_{h + eta + s}(sigma),

where ``P(. | sigma0)`` is the law of the slice-wise sum of the children's
columns drawn from the rows ``sigma0`` of their kernels and ``mu_f`` is the
single-site column law in field f.  Sums of b columns live on a lattice of
``(b+1)**N`` points, so nothing here enumerates ``2**(N b)`` tuples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from .grid import grid_single_site, log_reference_weights, slice_signs
from .order import min_upset_mass, stoch_leq as _stoch_leq, stoch_positive as _stoch_positive
from .trajectory import PiecewiseField

__all__ = [
    "CavitySpace",
    "grid_single_site",
    "tv",
    "kernel_sup_tv",
    "stoch_leq",
    "stoch_positive",
    "child_sum_law",
    "apply_R",
    "apply_R_rows",
    "cavity_transfer",
    "solve_cavity",
    "solve_cavity_rows",
    "nu_recursion",
    "tree_root_marginals",
    "density_bound",
    "apply_D",
    "derivative_matrix",
    "dk_norm_scan",
    "kappa_exact",
    "classical_tree_gaps",
    "gamma_exact",
    "gamma_envelope",
    "lipschitz_check",
    "cavity_report",
]

DEFAULT_MEMORY_LIMIT = 256 * 2 ** 20
# fixed-point iterations stop early once increments stop shrinking below this level
STALL_FLOOR = 1e-11
STALL_ITERATIONS = 20


class CavitySpace:
    """Grid, model parameters and cached arrays shared by the cavity operators.

    ``h`` is the base longitudinal field (scalar, per-slice array or
    :class:`PiecewiseField`).  Column measures use free imaginary-time ends
    unless ``periodic`` is set.
    """

    def __init__(self, n_slices: int, beta: float, lam: float, h=0.0, b: int = 2,
                 periodic: bool = False, memory_limit: int = DEFAULT_MEMORY_LIMIT):
        if b < 2:
            raise ValueError("b must be at least 2")
        self.n = int(n_slices)
        self.beta = float(beta)
        self.lam = float(lam)
        self.b = int(b)
        self.periodic = bool(periodic)
        self.delta = self.beta / self.n
        self.n_states = 2 ** self.n
        need = (self.b + 1) ** self.n * self.n_states * 8
        if need > memory_limit:
            raise MemoryError(f"sum-field lattice needs {need / 2**20:.0f} MiB "
                              f"(limit {memory_limit / 2**20:.0f} MiB)")
        if isinstance(h, PiecewiseField):
            self.h = h.discretize(self.n)
        else:
            self.h = np.broadcast_to(np.asarray(h, dtype=float), (self.n,)).copy()
        self.signs = slice_signs(self.n).astype(float)
        self.log_ref = log_reference_weights(self.n, self.lam, self.beta, self.periodic)
        lw = self.log_ref + self.delta * (self.signs @ self.h)
        # unnormalized single-site weights including the base field
        self.log_w = lw - lw.max()
        self.w = np.exp(self.log_w)
        ref = np.exp(log_reference_weights(self.n, self.lam, self.beta, False))
        self.reference = ref / ref.sum()
        self.top = self.n_states - 1

    def describe(self) -> dict:
        return {"n_slices": self.n, "beta": self.beta, "lam": self.lam, "b": self.b,
                "h": [float(x) for x in self.h], "periodic": self.periodic}

    # -- fields and single-site laws

    def eta_fields(self) -> np.ndarray:
        """Slice signs of every parent column, one row per column."""
        return self.signs

    def single_site(self, field_slices) -> np.ndarray:
        """Column law in the field ``h + field_slices``."""
        return grid_single_site(self.h + np.asarray(field_slices, float), self.lam,
                                self.beta, self.periodic)

    def single_site_rows(self, fields: np.ndarray) -> np.ndarray:
        """Column laws for each row of extra fields ``(M, N)``."""
        logits = self.log_w[None, :] + self.delta * (fields @ self.signs.T)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        return w / w.sum(axis=1, keepdims=True)

    # -- sum lattices

    @lru_cache(maxsize=8)
    def lattice(self, m: int):
        """Digits, slice sums and column embedding of the lattice of m-column sums."""
        base = m + 1
        size = base ** self.n
        idx = np.arange(size)
        digits = (idx[:, None] // base ** np.arange(self.n)[None, :]) % base
        sums = 2 * digits - m
        bits = (np.arange(self.n_states)[:, None] >> np.arange(self.n)[None, :]) & 1
        emb = bits @ (base ** np.arange(self.n))
        return {"base": base, "size": size, "digits": digits, "sums": sums.astype(float),
                "embed": emb}

    @lru_cache(maxsize=8)
    def coupling_matrix(self, m: int) -> np.ndarray:
        """``exp(delta * s . sigma)`` for lattice sums s (rows) and columns sigma."""
        lat = self.lattice(m)
        return np.exp(self.delta * (lat["sums"] @ self.signs.T))


def tv(mu: np.ndarray, nu: np.ndarray) -> float:
    """Total variation distance: half the L1 distance."""
    return 0.5 * float(np.abs(np.asarray(mu) - np.asarray(nu)).sum())


def kernel_sup_tv(rho: np.ndarray) -> float:
    """``max_eta ||rho^eta||_TV`` for a kernel (or signed kernel)."""
    return 0.5 * float(np.abs(rho).sum(axis=1).max())


def kernel_avg_tv(space: CavitySpace, rho: np.ndarray) -> float:
    """``sum_eta phi(eta) ||rho^eta||_TV`` with phi the zero-field reference law."""
    return 0.5 * float(space.reference @ np.abs(rho).sum(axis=1))


def stoch_positive(rho: np.ndarray, tol: float = 1e-12) -> bool:
    rho = np.asarray(rho)
    return _stoch_positive(rho, int(np.log2(len(rho))), tol)


def stoch_leq(mu: np.ndarray, nu: np.ndarray, tol: float = 1e-12) -> bool:
    """``mu`` is stochastically below ``nu`` (exact over all up-sets)."""
    return _stoch_leq(mu, nu, int(np.log2(len(mu))), tol)


# ---------------------------------------------------------------- R operator

def child_sum_law(space: CavitySpace, kernels: Sequence[np.ndarray]) -> np.ndarray:
    """``P[sigma0, s]``: law of the slice-wise sum of one column from each kernel row.

    Computed by an N-dimensional FFT product of the embedded kernel rows.
    Works for signed kernels as well (it is multilinear in the kernels).
    """
    m = len(kernels)
    lat = space.lattice(m)
    if m == 1:
        out = np.zeros((space.n_states, lat["size"]))
        out[:, lat["embed"]] = kernels[0]
        return out
    shape = (lat["base"],) * space.n
    axes = tuple(range(1, space.n + 1))
    prod = None
    for k in kernels:
        emb = np.zeros((space.n_states, lat["size"]))
        emb[:, lat["embed"]] = k
        f = np.fft.rfftn(emb.reshape((space.n_states,) + shape), axes=axes)
        prod = f if prod is None else prod * f
    out = np.fft.irfftn(prod, s=shape, axes=axes)
    return out.reshape(space.n_states, lat["size"])


def _as_eta_rows(space: CavitySpace, eta, count: int) -> np.ndarray:
    if eta is None:
        return space.signs[:count] if count == space.n_states else np.zeros((count, space.n))
    e = np.asarray(eta, dtype=float)
    if e.ndim == 0:
        e = space.signs[int(e)]
    return np.broadcast_to(e, (count, space.n))


def apply_R_rows(space: CavitySpace, kernels: Sequence[np.ndarray], rho_rows: np.ndarray,
                 eta_rows: Optional[np.ndarray] = None,
                 sum_law: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-wise resampling: output row i uses parent field ``eta_rows[i]``.

    ``eta_rows`` defaults to the slice signs of every column when there are
    ``2**N`` rows (the kernel form).  ``sum_law`` may pass a precomputed
    :func:`child_sum_law` of ``kernels``.
    """
    rho_rows = np.atleast_2d(rho_rows)
    m = len(kernels)
    if eta_rows is None:
        if len(rho_rows) != space.n_states:
            raise ValueError("eta_rows required unless one row per column is given")
        eta_rows = space.signs
    p = child_sum_law(space, kernels) if sum_law is None else sum_law
    q = rho_rows @ p
    e = space.coupling_matrix(m)
    logits = space.log_w[None, :] + space.delta * (np.asarray(eta_rows, float) @ space.signs.T)
    shift = logits.max(axis=1, keepdims=True)
    w = np.exp(logits - shift)
    z = w @ e.T
    return w * ((q / z) @ e)


def apply_R(space: CavitySpace, eta, kernels: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Resampling operator for one parent column ``eta`` (index, sign vector, or 0 field)."""
    e = _as_eta_rows(space, eta, 1)
    return apply_R_rows(space, kernels, np.asarray(rho)[None, :], e)[0]


def cavity_transfer(space: CavitySpace, eta, kernels: Sequence[np.ndarray],
                    sum_law: Optional[np.ndarray] = None) -> np.ndarray:
    """Matrix T with ``R(rho) = rho @ T`` for the parent column ``eta``."""
    e = _as_eta_rows(space, eta, 1)[0]
    m = len(kernels)
    p = child_sum_law(space, kernels) if sum_law is None else sum_law
    mu = _sum_field_laws(space, m, e)
    return p @ mu


def _sum_field_laws(space: CavitySpace, m: int, eta_field: np.ndarray) -> np.ndarray:
    """Single-site laws in field ``h + eta + s`` for every lattice sum s."""
    e = space.coupling_matrix(m)
    w = np.exp(space.log_w + space.delta * (space.signs @ eta_field))
    mu = e * w[None, :]
    return mu / mu.sum(axis=1, keepdims=True)


def _stationary(t: np.ndarray) -> np.ndarray:
    n = len(t)
    a = np.vstack([(t.T - np.eye(n)), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    return pi


def solve_cavity(space: CavitySpace, eta, kernels: Sequence[np.ndarray], tol: float = 1e-12,
                 max_iter: int = 10000, method: str = "iterate",
                 start: Optional[np.ndarray] = None) -> np.ndarray:
    """Fixed point of ``rho -> R(rho)`` for one parent column.

    ``iterate`` starts from the uniform law (or ``start``) and stops when the
    TV increment drops below ``tol``; ``direct`` solves for the stationary
    vector of the explicit transfer matrix.
    """
    if method == "direct":
        return _stationary(cavity_transfer(space, eta, kernels))
    if method != "iterate":
        raise ValueError(f"unknown method {method!r}")
    e = _as_eta_rows(space, eta, 1)
    p = child_sum_law(space, kernels)
    rho = np.full(space.n_states, 1.0 / space.n_states) if start is None else np.asarray(start, float)
    best, since_best = math.inf, 0
    for _ in range(max_iter):
        new = apply_R_rows(space, kernels, rho[None, :], e, sum_law=p)[0]
        new /= new.sum()
        inc = tv(new, rho)
        rho = new
        if inc < tol:
            return rho
        if inc < best:
            best, since_best = inc, 0
        else:
            since_best += 1
        if since_best >= STALL_ITERATIONS and best < STALL_FLOOR:
            return rho
    raise RuntimeError("cavity iteration did not converge")


def solve_cavity_rows(space: CavitySpace, kernels: Sequence[np.ndarray], tol: float = 1e-12,
                      max_iter: int = 10000, start: Optional[np.ndarray] = None,
                      eta_rows: Optional[np.ndarray] = None) -> np.ndarray:
    """Fixed points for every parent column at once (kernel form)."""
    p = child_sum_law(space, kernels)
    n_rows = space.n_states if eta_rows is None else len(eta_rows)
    rho = (np.full((n_rows, space.n_states), 1.0 / space.n_states)
           if start is None else np.array(start, dtype=float))
    best, since_best = math.inf, 0
    for _ in range(max_iter):
        new = apply_R_rows(space, kernels, rho, eta_rows, sum_law=p)
        # R preserves mass exactly; renormalizing stops round-off drift
        new /= new.sum(axis=1, keepdims=True)
        inc = 0.5 * float(np.abs(new - rho).sum(axis=1).max())
        rho = new
        if inc < tol:
            return rho
        if inc < best:
            best, since_best = inc, 0
        else:
            since_best += 1
        # stalled at the FFT round-off floor
        if since_best >= STALL_ITERATIONS and best < STALL_FLOOR:
            return rho
    raise RuntimeError("cavity iteration did not converge")


# ---------------------------------------------------------------- recursion

@dataclass
class NuRecursion:
    nus: List[np.ndarray]
    nu_inf: np.ndarray
    increments: List[float]
    converged: bool


def nu_recursion(space: CavitySpace, n_max: int = 500, tol: float = 1e-10,
                 cavity_tol: float = 1e-12, keep: int = 64) -> NuRecursion:
    """Kernels ``nu_0 = delta_plus`` and ``nu_{n+1} = Phi(nu_n, ..., nu_n)``.

    Stops when the sup-TV increment falls below ``tol``.  Only the first
    ``keep`` kernels are stored (all increments are).
    """
    nu = np.zeros((space.n_states, space.n_states))
    nu[:, space.top] = 1.0
    nus = [nu]
    incs = []
    converged = False
    for _ in range(n_max):
        new = solve_cavity_rows(space, [nu] * space.b, tol=cavity_tol, start=nu)
        inc = kernel_sup_tv(new - nu)
        incs.append(inc)
        nu = new
        if len(nus) < keep:
            nus.append(nu)
        if inc < tol:
            converged = True
            break
    return NuRecursion(nus, nu, incs, converged)


def tree_root_marginals(space: CavitySpace, n_max: int) -> List[np.ndarray]:
    """Exact root laws of trees with plus ghost leaves, by upward message passing.

    Row ``eta`` of kernel n is the root column law of the tree with n free
    levels whose ghost parent has column ``eta``; n = 0 is the ghost itself.
    """
    b = space.b
    s = space.signs
    coup = np.exp(space.delta * (s @ s.T))
    # log of the weight one child subtree sends to its parent, as a function
    # of the parent's column
    log_msg = space.delta * s.sum(axis=1)  # a plus ghost child
    out = []
    nu0 = np.zeros((space.n_states, space.n_states))
    nu0[:, space.top] = 1.0
    out.append(nu0)
    eta_term = space.delta * (s @ s.T)  # [eta, sigma]
    for _ in range(n_max):
        log_own = space.log_w + b * log_msg
        logits = eta_term + log_own[None, :]
        logits -= logits.max(axis=1, keepdims=True)
        k = np.exp(logits)
        out.append(k / k.sum(axis=1, keepdims=True))
        # message of a subtree with one more level
        shift = log_own.max()
        log_msg = np.log(coup @ np.exp(log_own - shift))
        # messages matter up to a constant; without this they grow like b**n
        log_msg -= log_msg.max()
    return out


def density_bound(space: CavitySpace, kernel: np.ndarray) -> float:
    """Largest c with ``c <= kernel[eta, s] / phi(s) <= 1/c`` for all entries."""
    ratio = kernel / space.reference[None, :]
    lo, hi = float(ratio.min()), float(ratio.max())
    if lo <= 0:
        return 0.0
    return min(lo, 1.0 / hi)


# ---------------------------------------------------------------- derivative

def apply_D(space: CavitySpace, rho: np.ndarray, nu_inf: np.ndarray, tol: float = 1e-14,
            max_terms: int = 100000) -> np.ndarray:
    """``D(rho)`` row-wise via the Neumann series of ``(I - R)^{-1}`` on zero-mass measures."""
    b = space.b
    y = apply_R_rows(space, [rho] + [nu_inf] * (b - 1), nu_inf)
    p = child_sum_law(space, [nu_inf] * b)
    total = y.copy()
    term = y
    for _ in range(max_terms):
        term = apply_R_rows(space, [nu_inf] * b, term, sum_law=p)
        total += term
        if np.abs(term).sum(axis=1).max() <= tol * max(1.0, np.abs(total).sum(axis=1).max()):
            return total
    raise RuntimeError("Neumann series did not converge")


def derivative_matrix(space: CavitySpace, nu_inf: np.ndarray) -> np.ndarray:
    """Matrix of D on flattened kernels: ``out[(eta, sigma)] = sum D[(eta,sigma),(a,c)] rho[a, c]``.

    Uses the fundamental matrix ``(I - T + 1 pi)^{-1}`` of each row's transfer
    matrix T (whose stationary law pi is ``nu_inf[eta]``); on zero-mass row
    vectors it coincides with ``(I - T)^{-1}``.
    """
    b, ns = space.b, space.n_states
    p_all = child_sum_law(space, [nu_inf] * b)
    p_rest = child_sum_law(space, [nu_inf] * (b - 1))
    lat_rest = space.lattice(b - 1)
    lat = space.lattice(b)
    bits = ((np.arange(ns)[:, None] >> np.arange(space.n)[None, :]) & 1)
    # lattice index of column c added to each partial sum
    plus_col = (bits @ (lat["base"] ** np.arange(space.n)))[:, None] + \
        (lat_rest["digits"] @ (lat["base"] ** np.arange(space.n)))[None, :]
    d = np.empty((ns, ns, ns, ns))
    eye = np.eye(ns)
    for eta in range(ns):
        mu = _sum_field_laws(space, b, space.signs[eta])
        t = p_all @ mu
        pi = nu_inf[eta]
        fund = np.linalg.inv(eye - t + np.outer(np.ones(ns), pi))
        g = mu @ fund  # lattice sum -> contribution to the output law
        # k[a, c, sigma] = sum_s' p_rest[a, s'] g[c + s', sigma]
        k = np.einsum("as,csx->acx", p_rest, g[plus_col])
        d[eta] = (pi[:, None, None] * k).transpose(2, 0, 1)
    return d.reshape(ns * ns, ns * ns)


@dataclass
class DkScan:
    norms: List[float]
    scaled: List[float]
    rate: float
    random_ratio_max: List[float]
    ks: List[int]


def _sup_norm_ratio(space: CavitySpace, dk: np.ndarray) -> float:
    """Exact operator norm of ``dk`` from the phi-averaged TV norm to the sup TV norm.

    The unit ball of the source norm has extreme points
    ``e_a (x) (delta_c - delta_c') / phi(a)``, so the norm is the largest
    image of such a direction.
    """
    ns = space.n_states
    cols = dk.reshape(ns, ns, ns, ns)  # [eta, sigma, a, c]
    best = 0.0
    for a in range(ns):
        worst = max(float(cdist(cols[eta, :, a, :].T, cols[eta, :, a, :].T, "cityblock").max())
                    for eta in range(ns))
        best = max(best, 0.5 * worst / space.reference[a])
    return best


def dk_norm_scan(space: CavitySpace, nu_inf: np.ndarray, k_max: int = 6,
                 n_random: int = 8, seed: int = 0, fit_from: int = 1) -> DkScan:
    """Norms of ``D^k`` for k = 0..k_max and the fitted geometric rate over k >= ``fit_from``."""
    ns = space.n_states
    dmat = derivative_matrix(space, nu_inf)
    rng = np.random.default_rng(seed)
    dirs = []
    for _ in range(n_random):
        # p minus a law pushed down by clearing random bits: stochastically positive
        a = int(rng.integers(ns))
        p = rng.dirichlet(np.ones(ns))
        masks = rng.integers(0, ns, ns)
        q = np.bincount(np.arange(ns) & masks, weights=p, minlength=ns)
        x = np.zeros((ns, ns))
        x[a] = p - q
        norm1 = kernel_avg_tv(space, x)
        if norm1 > 0:
            dirs.append(x.ravel() / norm1)
    norms, rand = [], []
    dk = np.eye(ns * ns)
    for k in range(k_max + 1):
        if k > 0:
            dk = dmat @ dk
        norms.append(_sup_norm_ratio(space, dk))
        rand.append(max((kernel_sup_tv((dk @ x).reshape(ns, ns)) for x in dirs), default=0.0))
    ks = list(range(fit_from, k_max + 1))
    slope = np.polyfit(ks, np.log([norms[k] for k in ks]), 1)[0]
    scaled = [norms[k] * space.b ** k for k in range(k_max + 1)]
    return DkScan(norms, scaled, float(math.exp(slope)), rand, list(range(k_max + 1)))


# ---------------------------------------------------------------- kappa

@dataclass
class KappaResult:
    gaps: List[float]
    kappa: float
    fit_depths: List[int]
    uniqueness_tv: List[float]
    uniqueness: bool


def _upward_logs(space: CavitySpace, depth: int, boundary_sign: int):
    """Log weights a child subtree rooted at each depth sends to its parent.

    ``logs[d]`` is indexed by the parent's column, up to an additive
    constant; d = depth + 1 is a ghost.
    ``own[d]`` is the log weight of a vertex at depth d as a function of its
    own column (single-site weight times its children's messages).
    """
    s = space.signs
    coup = np.exp(space.delta * (s @ s.T))
    logs = [None] * (depth + 2)
    own = [None] * (depth + 1)
    logs[depth + 1] = boundary_sign * space.delta * s.sum(axis=1)
    for d in range(depth, -1, -1):
        own[d] = space.log_w + space.b * logs[d + 1]
        shift = own[d].max()
        logs[d] = np.log(coup @ np.exp(own[d] - shift))
        logs[d] -= logs[d].max()
    return logs, own


def kappa_exact(space: CavitySpace, depth: int, boundary: int = 1,
                fit_from: int = 2) -> KappaResult:
    """Influence of the root's column on the magnetization of a vertex at each depth.

    ``gaps[k] = E[sigma_z . 1 | root all +] - E[sigma_z . 1 | root all -]`` for
    z at depth k, with ghost leaves fixed to ``boundary`` and no field on the
    root.  The decay rate is fitted on depths ``>= fit_from``.
    """
    s = space.signs
    coup = np.exp(space.delta * (s @ s.T))
    _, own = _upward_logs(space, depth, boundary)
    mag = space.delta * s.sum(axis=1)
    gaps = []
    laws = {}
    for root_col in (space.top, 0):
        law = np.zeros(space.n_states)
        law[root_col] = 1.0
        means = [float(law @ mag)]
        for d in range(1, depth + 1):
            w = np.exp(own[d] - own[d].max())
            trans = coup * w[None, :]
            trans /= trans.sum(axis=1, keepdims=True)
            law = law @ trans
            means.append(float(law @ mag))
        laws[root_col] = means
    gaps = [a - b for a, b in zip(laws[space.top], laws[0])]
    ks = [k for k in range(fit_from, depth + 1) if gaps[k] > 0]
    kappa = math.nan
    if len(ks) >= 2:
        kappa = float(math.exp(np.polyfit(ks, np.log([gaps[k] for k in ks]), 1)[0]))
    # uniqueness probe: root law under plus versus minus ghost leaves
    probe = []
    for d in range(depth + 1):
        roots = []
        for sign in (1, -1):
            _, own_d = _upward_logs(space, d, sign)
            w = np.exp(own_d[0] - own_d[0].max())
            roots.append(w / w.sum())
        probe.append(tv(roots[0], roots[1]))
    unique = len(probe) >= 3 and probe[-1] < probe[1] and probe[-1] < 0.5 * probe[0]
    return KappaResult(gaps, kappa, ks, probe, bool(unique))


def classical_tree_gaps(b: int, depth: int, coupling: float, boundary: int = 1) -> List[float]:
    """Root-to-depth-k influence on a classical Ising tree (no transverse field).

    Effective fields are passed up from the boundary; the influence through
    each edge is ``(tanh(H + J) - tanh(H - J)) / 2`` where H is the field a
    vertex receives from its own children.  Returned values are in units
    where a constant spin contributes ``coupling`` (i.e. beta) to ``sigma . 1``.
    """
    j = coupling
    fields = [0.0] * (depth + 1)
    # a vertex at the deepest level sees b ghost children of sign `boundary`
    h_below = b * boundary * j
    fields[depth] = h_below
    for d in range(depth - 1, -1, -1):
        msg = math.atanh(math.tanh(j) * math.tanh(fields[d + 1]))
        fields[d] = b * msg
    gaps = [2.0 * coupling]
    prod = 1.0
    for d in range(1, depth + 1):
        prod *= 0.5 * (math.tanh(fields[d] + j) - math.tanh(fields[d] - j))
        gaps.append(2.0 * coupling * prod)
    return gaps


# ---------------------------------------------------------------- gamma

@dataclass
class GammaResult:
    gamma: float
    exhaustive: bool
    argmax: dict


def gamma_exact(space: CavitySpace, exhaustive: Optional[bool] = None,
                n_sampled: int = 64, seed: int = 0) -> GammaResult:
    """Single-site envelope: max TV between column laws whose fields differ in one neighbour.

    The field is ``h + r + a`` versus ``h + r + c`` where r is the sum of b
    neighbour columns and a, c are the two versions of the remaining one.
    Exhaustive over (r, a, c) when requested (default for N <= 6); otherwise
    every r is paired with the extreme pair (all -, all +) and ``n_sampled``
    random r values get a full search over pairs.
    """
    if exhaustive is None:
        exhaustive = space.n <= 6
    lat = space.lattice(space.b)
    sums = lat["sums"]
    best, arg = -1.0, {}
    s = space.signs
    lo_col, hi_col = 0, space.top

    def scan_pairs(r_idx):
        laws = space.single_site_rows(sums[r_idx][None, :] + s)
        dist = cdist(laws, laws, "cityblock")
        i, j = np.unravel_index(np.argmax(dist), dist.shape)
        return 0.5 * float(dist[i, j]), int(i), int(j)

    if exhaustive:
        for r in range(lat["size"]):
            val, i, j = scan_pairs(r)
            if val > best:
                best, arg = val, {"r": r, "a": i, "c": j}
    else:
        lo = space.single_site_rows(sums + s[lo_col])
        hi = space.single_site_rows(sums + s[hi_col])
        vals = 0.5 * np.abs(hi - lo).sum(axis=1)
        r = int(np.argmax(vals))
        best, arg = float(vals[r]), {"r": r, "a": lo_col, "c": hi_col}
        rng = np.random.default_rng(seed)
        cand = set(rng.choice(lat["size"], size=min(n_sampled, lat["size"]), replace=False).tolist())
        cand.add(r)
        for rr in sorted(cand):
            val, i, j = scan_pairs(rr)
            if val > best:
                best, arg = val, {"r": rr, "a": i, "c": j}
    return GammaResult(best, bool(exhaustive), arg)


def gamma_envelope(space: CavitySpace, exhaustive: Optional[bool] = None) -> GammaResult:
    """Max TV between column laws over every pair of fields the resampling operator uses.

    Fields are ``h + t`` with t a slice-wise sum of ``b + 1`` columns (the
    parent and b children), so this bounds the contraction of R on zero-mass
    measures.  Exhaustive for N <= 6; otherwise only the extreme pair
    (all -, all +) is evaluated and the result is flagged as partial.
    """
    if exhaustive is None:
        exhaustive = space.n <= 6
    lat = space.lattice(space.b + 1)
    if exhaustive:
        laws = space.single_site_rows(lat["sums"])
        best, arg = -1.0, {}
        block = 512
        for start in range(0, len(laws), block):
            dist = cdist(laws[start:start + block], laws, "cityblock")
            i, j = np.unravel_index(np.argmax(dist), dist.shape)
            if 0.5 * dist[i, j] > best:
                best, arg = 0.5 * float(dist[i, j]), {"a": int(start + i), "c": int(j)}
        return GammaResult(best, True, arg)
    ext = np.array([[-(space.b + 1.0)] * space.n, [space.b + 1.0] * space.n])
    laws = space.single_site_rows(ext)
    return GammaResult(tv(laws[0], laws[1]), False, {"a": 0, "c": len(lat["sums"]) - 1})


@dataclass
class LipschitzResult:
    max_ratio: float
    violations: int
    n_pairs: int
    bound: float


def lipschitz_check(space: CavitySpace, n_pairs: int = 1000, seed: int = 0) -> LipschitzResult:
    """``TV(mu_f, mu_f') <= ||f' - f||_1 / log 3`` on random admissible field pairs.

    Fields are drawn per slice in ``[-(|h| + b + 1), |h| + b + 1]``; half of
    the pairs differ on a random subset of slices only.
    """
    rng = np.random.default_rng(seed)
    amp = float(np.abs(space.h).max()) + space.b + 1
    bound = 1.0 / math.log(3.0)
    worst, bad = 0.0, 0
    for i in range(n_pairs):
        f = rng.uniform(-amp, amp, space.n) - space.h
        g = f.copy()
        if i % 2 == 0:
            g = rng.uniform(-amp, amp, space.n) - space.h
        else:
            sel = rng.random(space.n) < 0.3
            g[sel] = rng.uniform(-amp, amp, sel.sum()) - space.h[sel]
        norm1 = space.delta * float(np.abs(g - f).sum())
        if norm1 == 0:
            continue
        d = tv(space.single_site(f), space.single_site(g))
        ratio = d / norm1
        worst = max(worst, ratio)
        if d > bound * norm1 + 1e-12:
            bad += 1
    return LipschitzResult(worst, bad, n_pairs, bound)


# ---------------------------------------------------------------- report

def cavity_report(beta: float = 1.0, lam: float = 1.0, h: float = 0.0, b: int = 2,
                  grid_n: int = 8, depth: int = 8, boundary: int = 1, k_max: int = 6,
                  dk_grid_n: int = 6, nu_tol: float = 1e-10, sensitivity_tol: float = 1e-8,
                  with_dk: bool = True) -> dict:
    """All cavity quantities for one parameter point.

    kappa and gamma are computed at ``grid_n`` and ``grid_n // 2``; their
    difference is the discretization error bar and ``2 x_N - x_{N/2}`` the
    Richardson estimate.  The D^k scan needs the explicit derivative matrix,
    so it runs on the (usually coarser) grid ``dk_grid_n``, once at
    ``nu_tol`` and once at ``sensitivity_tol``.
    """
    out: dict = {"beta": beta, "lambda": lam, "h": h, "b": b, "grid_n": grid_n,
                 "depth": depth, "boundary": boundary}
    fine = CavitySpace(grid_n, beta, lam, h, b)
    coarse = CavitySpace(max(1, grid_n // 2), beta, lam, h, b)
    kf, kc = kappa_exact(fine, depth, boundary), kappa_exact(coarse, depth, boundary)
    gf, gc = gamma_exact(fine), gamma_exact(coarse)
    out.update({
        "kappa_hat": kf.kappa, "kappa_hat_half_grid": kc.kappa,
        "kappa_error_bar": abs(kf.kappa - kc.kappa),
        "kappa_richardson": 2 * kf.kappa - kc.kappa,
        "kappa_fit_depths": kf.fit_depths, "magnetization_gaps": kf.gaps,
        "gamma_hat": gf.gamma, "gamma_hat_half_grid": gc.gamma,
        "gamma_error_bar": abs(gf.gamma - gc.gamma),
        "gamma_exhaustive": gf.exhaustive,
        "uniqueness_tv": kf.uniqueness_tv, "uniqueness": kf.uniqueness,
    })
    out["product_kgb"] = kf.kappa * gf.gamma * b
    out["mixing_hypothesis_holds"] = bool(out["product_kgb"] < 1.0)
    out["notes"] = {
        "kappa": "geometric fit of the root-conditioned magnetization gap on the rooted "
                 "tree, depths >= 2; no sup over subtrees or re-rooting",
        "gamma": "single-site envelope over one-neighbour field changes",
    }
    if with_dk:
        space = CavitySpace(dk_grid_n, beta, lam, h, b)
        nr = nu_recursion(space, tol=nu_tol)
        scan = dk_norm_scan(space, nr.nu_inf, k_max)
        loose = nu_recursion(space, tol=sensitivity_tol)
        scan_loose = dk_norm_scan(space, loose.nu_inf, k_max, n_random=0)
        out.update({
            "dk_grid_n": dk_grid_n, "dk_norms": scan.norms, "dk_scaled_norms": scan.scaled,
            "dk_random_direction_norms": scan.random_ratio_max,
            "dk_rate": scan.rate, "dk_rate_loose_tolerance": scan_loose.rate,
            "dk_rate_sensitivity": abs(scan.rate - scan_loose.rate),
            "nu_convergence": nr.increments, "nu_converged": nr.converged,
            "density_bound": density_bound(space, nr.nu_inf),
        })
    return out
