"""Continuous-time heat-bath dynamics, censoring schedules and coupled chains.

Every free vertex carries an independent rate-1 exponential clock.  When a
clock rings and the vertex belongs to the currently active set, its whole
trajectory is redrawn from the conditional law given its neighbours.  The
randomness of a ring is addressed by (site, ring index), so two chains built
from the same seed see the same clocks and the same per-update streams.

Two execution modes share this structure:

* continuum: exact trajectories, updates by :func:`qising.sampler.sample_site`;
* grid: each trajectory is a Suzuki-Trotter column of N slices, updates by the
  monotone sequential inverse-CDF draw of :func:`qising.grid.sample_column`.
  Small grid systems also expose their exact generator.
"""
from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .graph import SiteGraph, local_field, uniform_config
from .grid import (log_reference_weights, sample_column, slice_signs,
                   trajectory_to_column)
from .order import is_increasing, min_upset_mass
from .sampler import sample_site
from .streams import (KeyedStreams, SeedLike, child_sequence, keyed_generator,
                      root_sequence)
from .transfer import FREE, PERIODIC
from .trajectory import ModelParams, Trajectory, dot, partial_leq

__all__ = [
    "Schedule",
    "ChainState",
    "GlauberChain",
    "GridSystem",
    "GridChain",
    "run",
    "coupled_run_pm",
    "equilibrium_series",
    "grid_generator",
    "grid_spectral_gap",
    "censoring_check_exact",
    "coalescence_time",
    "gap_scan",
]

_CLOCK_STREAM = 0
_UPDATE_STREAM = 1


# ---------------------------------------------------------------- schedules

@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant active set: ``sets[i]`` is active on ``[times[i], times[i+1])``."""

    times: Tuple[float, ...]
    sets: Tuple[frozenset, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        sets = tuple(frozenset(s) for s in self.sets)
        if not times or times[0] != 0.0 or len(times) != len(sets):
            raise ValueError("schedule needs times starting at 0, one set per time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("schedule times must increase")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "sets", sets)

    @classmethod
    def constant(cls, sites) -> "Schedule":
        return cls((0.0,), (frozenset(sites),))

    @classmethod
    def full(cls, graph: SiteGraph) -> "Schedule":
        return cls.constant(graph.free)

    @classmethod
    def empty(cls) -> "Schedule":
        return cls.constant(())

    @classmethod
    def subtree(cls, graph: SiteGraph, v) -> "Schedule":
        return cls.constant(graph.subtree(v))

    @classmethod
    def piecewise(cls, pieces: Sequence[Tuple[float, Sequence]]) -> "Schedule":
        return cls(tuple(t for t, _ in pieces), tuple(frozenset(s) for _, s in pieces))

    @classmethod
    def parse(cls, text: str, graph: SiteGraph) -> "Schedule":
        """Parse ``"full"``, ``"subtree:<v>"``, ``"sites:1,2"`` or ``"0:full;2.5:subtree:1"``."""
        text = text.strip()
        if ";" not in text and not _starts_with_time(text):
            return cls.constant(_parse_set(text, graph))
        pieces = []
        for chunk in text.split(";"):
            t, _, rest = chunk.strip().partition(":")
            pieces.append((float(t), _parse_set(rest, graph)))
        return cls.piecewise(pieces)

    def active(self, t: float) -> frozenset:
        return self.sets[bisect_right(self.times, t) - 1]

    def pieces(self, t_end: float):
        """``(start, end, set)`` pieces covering ``[0, t_end]``."""
        out = []
        for i, s in enumerate(self.sets):
            a = self.times[i]
            b = self.times[i + 1] if i + 1 < len(self.times) else math.inf
            if a >= t_end:
                break
            out.append((a, min(b, t_end), s))
        return out

    def is_subset_of(self, other: "Schedule") -> bool:
        cuts = sorted(set(self.times) | set(other.times))
        return all(self.active(t) <= other.active(t) for t in cuts)


def _starts_with_time(text: str) -> bool:
    head = text.split(":", 1)[0]
    try:
        float(head)
        return True
    except ValueError:
        return False


def _parse_set(text: str, graph: SiteGraph):
    text = text.strip()
    if text == "full":
        return graph.free
    if text in ("none", "empty", ""):
        return ()
    if text.startswith("subtree:"):
        return graph.subtree(int(text.split(":", 1)[1]))
    if text.startswith("sites:"):
        return tuple(int(x) for x in text.split(":", 1)[1].split(",") if x.strip())
    raise ValueError(f"unknown schedule set {text!r}")


# ---------------------------------------------------------------- clocks

class _Clocks:
    """Independent rate-1 clocks, one per site, merged in a priority queue."""

    def __init__(self, n_sites: int, root: np.random.SeedSequence, t0: float = 0.0):
        self._gens = [keyed_generator(root, _CLOCK_STREAM, i) for i in range(n_sites)]
        self.counts = [0] * n_sites
        self._heap = [(t0 + g.exponential(), i) for i, g in enumerate(self._gens)]
        heapq.heapify(self._heap)

    def peek(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def pop(self):
        t, i = heapq.heappop(self._heap)
        k = self.counts[i]
        self.counts[i] += 1
        heapq.heappush(self._heap, (t + self._gens[i].exponential(), i))
        return t, i, k


@dataclass
class ChainState:
    """Snapshot of a chain: configuration, time and number of clock rings."""

    config: Dict[Hashable, object]
    time: float
    n_events: int
    n_updates: int


class _ChainBase:
    def __init__(self, graph: SiteGraph, seed: SeedLike, schedule: Optional[Schedule]):
        self.graph = graph
        self.sites = graph.free
        self.root = root_sequence(seed)
        self.schedule = schedule if schedule is not None else Schedule.full(graph)
        self._clocks = _Clocks(len(self.sites), self.root)
        self._streams = KeyedStreams(self.root, _UPDATE_STREAM, len(self.sites))
        self.time = 0.0
        self.n_events = 0
        self.n_updates = 0

    def _update(self, i: int, rng: np.random.Generator):
        raise NotImplementedError

    def step(self):
        """Process the next clock ring; returns ``(time, site, updated)``."""
        t, i, k = self._clocks.pop()
        self.time = t
        self.n_events += 1
        v = self.sites[i]
        if v in self.schedule.active(t):
            self._update(i, self._streams.generator(i, k))
            self.n_updates += 1
            return t, v, True
        return t, v, False

    def next_time(self) -> float:
        return self._clocks.peek()

    def advance(self, t_end: float, observer: Optional[Callable] = None):
        """Run until ``t_end``; ``observer(chain, t, site, updated)`` after each ring."""
        while self._clocks.peek() <= t_end:
            t, v, upd = self.step()
            if observer is not None:
                observer(self, t, v, upd)
        self.time = max(self.time, t_end)
        return self


class GlauberChain(_ChainBase):
    """Continuum heat-bath chain on trajectory configurations."""

    def __init__(self, graph: SiteGraph, params: ModelParams, start: Mapping,
                 seed: SeedLike, periodic: bool = False, schedule: Optional[Schedule] = None):
        super().__init__(graph, seed, schedule)
        self.params = params
        self.bc = PERIODIC if periodic else FREE
        missing = [v for v in self.sites if v not in start]
        if missing:
            raise ValueError(f"start configuration lacks vertices {missing}")
        if periodic:
            for v in self.sites:
                if start[v].initial_sign != start[v].final_sign:
                    raise ValueError("periodic chain needs periodic start trajectories")
        self.config = {v: start[v] for v in self.sites}

    def _update(self, i, rng):
        v = self.sites[i]
        f = local_field(self.graph, self.config, v, self.params)
        self.config[v] = sample_site(f, self.params, self.bc, rng)

    def state(self) -> ChainState:
        return ChainState(dict(self.config), self.time, self.n_events, self.n_updates)


def run(graph: SiteGraph, params: ModelParams, schedule: Optional[Schedule], t_end: float,
        start: Mapping, seed: SeedLike, periodic: bool = False,
        observer: Optional[Callable] = None) -> ChainState:
    """Continuum chain from ``start`` up to ``t_end`` under ``schedule``."""
    chain = GlauberChain(graph, params, start, seed, periodic, schedule)
    chain.advance(t_end, observer)
    return chain.state()


# ---------------------------------------------------------------- grid systems

class GridSystem:
    """Suzuki-Trotter discretization of the Gibbs measure of a graph.

    Free site i owns bits ``[N i, N i + N)`` of a joint state index, so the
    coordinatewise order on configurations is bitwise inclusion.  Frozen
    vertices enter through their slice-midpoint signs.
    """

    def __init__(self, graph: SiteGraph, params: ModelParams, n_slices: int,
                 periodic: bool = False):
        self.graph = graph
        self.params = params
        self.n = int(n_slices)
        self.periodic = bool(periodic)
        self.sites = graph.free
        self.pos = {v: i for i, v in enumerate(self.sites)}
        self.delta = params.beta / self.n
        self.signs = slice_signs(self.n)
        self.log_ref = log_reference_weights(self.n, params.lam, params.beta, periodic)
        base = params.h_field.discretize(self.n)
        self.static_field = []
        self.free_nbrs = []
        for v in self.sites:
            f = base.copy()
            nb = []
            for u in graph.neighbors(v):
                if u in graph.frozen:
                    col = trajectory_to_column(graph.frozen[u], self.n)
                    f += self.signs[col]
                else:
                    nb.append(self.pos[u])
            self.static_field.append(f)
            self.free_nbrs.append(tuple(nb))

    @property
    def n_bits(self) -> int:
        return self.n * len(self.sites)

    @property
    def n_states(self) -> int:
        return 2 ** self.n_bits

    def site_field(self, i: int, cols: Sequence[int]) -> np.ndarray:
        f = self.static_field[i].copy()
        for j in self.free_nbrs[i]:
            f += self.signs[cols[j]]
        return f

    def _check_size(self, limit_bits: int = 20):
        if self.n_bits > limit_bits:
            raise ValueError(f"state space 2^{self.n_bits} exceeds 2^{limit_bits}")

    def columns(self) -> np.ndarray:
        """``(n_states, n_sites)`` array of per-site columns of every joint state."""
        self._check_size()
        idx = np.arange(self.n_states, dtype=np.int64)
        mask = (1 << self.n) - 1
        return np.stack([(idx >> (self.n * i)) & mask for i in range(len(self.sites))], axis=1)

    def log_gibbs_weights(self) -> np.ndarray:
        cols = self.columns()
        s = self.signs.astype(float)
        out = np.zeros(len(cols))
        for i in range(len(self.sites)):
            si = s[cols[:, i]]
            out += self.log_ref[cols[:, i]] + self.delta * (si @ self.static_field[i])
        for u, v in self.graph.edges():
            if u in self.pos and v in self.pos:
                out += self.delta * np.einsum("ij,ij->i", s[cols[:, self.pos[u]]],
                                              s[cols[:, self.pos[v]]])
        return out

    def gibbs(self) -> np.ndarray:
        lw = self.log_gibbs_weights()
        w = np.exp(lw - lw.max())
        return w / w.sum()

    def conditional_probs(self, i: int, cols: np.ndarray) -> np.ndarray:
        """Heat-bath law of site i's column for each row of joint columns."""
        s = self.signs.astype(float)
        f = np.broadcast_to(self.static_field[i], (len(cols), self.n)).copy()
        for j in self.free_nbrs[i]:
            f += s[cols[:, j]]
        logits = self.log_ref[None, :] + self.delta * (f @ s.T)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        return w / w.sum(axis=1, keepdims=True)

    def all_plus_state(self) -> int:
        return self.n_states - 1


def grid_generator(system: GridSystem, active) -> sp.csr_matrix:
    """Exact generator ``sum_{x in active} (mu_x - I)`` of the discretized chain."""
    system._check_size()
    cols = system.columns()
    n_states = system.n_states
    rows, cols_out, vals = [], [], []
    idx = np.arange(n_states, dtype=np.int64)
    width = 2 ** system.n
    for v in active:
        i = system.pos[v]
        probs = system.conditional_probs(i, cols)
        cur = cols[:, i]
        base = idx - (cur << (system.n * i))
        targets = base[:, None] + (np.arange(width, dtype=np.int64)[None, :] << (system.n * i))
        rows.append(np.repeat(idx, width))
        cols_out.append(targets.ravel())
        vals.append(probs.ravel())
        rows.append(idx)
        cols_out.append(idx)
        vals.append(-np.ones(n_states))
    if not rows:
        return sp.csr_matrix((n_states, n_states))
    q = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols_out))),
                      shape=(n_states, n_states))
    q.sum_duplicates()
    return q


def grid_spectral_gap(system: GridSystem) -> float:
    """Smallest nonzero eigenvalue of minus the full generator (reversible, dense)."""
    if system.n_states > 4096:
        raise ValueError("dense spectral gap limited to 4096 states")
    q = grid_generator(system, system.sites).toarray()
    pi = system.gibbs()
    d = np.sqrt(pi)
    sym = d[:, None] * q / d[None, :]
    sym = 0.5 * (sym + sym.T)
    ev = np.sort(np.linalg.eigvalsh(-sym))
    return float(ev[1])


class GridChain(_ChainBase):
    """Discretized heat-bath chain; the state is one column per free site."""

    def __init__(self, system: GridSystem, start_cols: Sequence[int], seed: SeedLike,
                 schedule: Optional[Schedule] = None):
        super().__init__(system.graph, seed, schedule)
        self.system = system
        self.cols = [int(c) for c in start_cols]
        if system.params.lam * system.delta > 1:
            raise ValueError("monotone grid updates need lam * delta <= 1")

    def _update(self, i, rng):
        sysm = self.system
        f = sysm.site_field(i, self.cols)
        u = rng.random(sysm.n)
        self.cols[i] = sample_column(f, sysm.params.lam, sysm.params.beta, sysm.periodic, u)

    def joint_state(self) -> int:
        return sum(c << (self.system.n * i) for i, c in enumerate(self.cols))

    def state(self) -> ChainState:
        cfg = {v: self.cols[i] for i, v in enumerate(self.sites)}
        return ChainState(cfg, self.time, self.n_events, self.n_updates)


def _cols_leq(a: Sequence[int], b: Sequence[int]) -> bool:
    return all((x & ~y) == 0 for x, y in zip(a, b))


# ---------------------------------------------------------------- coupled chains

@dataclass
class CoupledResult:
    plus: ChainState
    minus: ChainState
    times: List[float] = field(default_factory=list)
    gap: List[float] = field(default_factory=list)
    order_violations: int = 0


def coupled_run_pm(graph: SiteGraph, params: ModelParams, t_end: float, seed: SeedLike,
                   periodic: bool = False, mode: str = "continuum", n_slices: int = 8,
                   statistic: Optional[Callable] = None, record_every: float = 0.0,
                   strict: bool = True, schedule: Optional[Schedule] = None) -> CoupledResult:
    """Chains from all-plus and all-minus driven by the same clocks and update streams.

    In grid mode the coupling is monotone and order is asserted after every
    ring (``strict``).  In continuum mode the shared streams only make the
    chains close; order violations are counted, not asserted.
    ``statistic(state_plus, state_minus)`` is recorded every ``record_every``
    time units when given.
    """
    if mode == "grid":
        system = GridSystem(graph, params, n_slices, periodic)
        top = GridChain(system, [2 ** n_slices - 1] * len(system.sites), seed, schedule)
        bot = GridChain(system, [0] * len(system.sites), seed, schedule)

        def ordered():
            return _cols_leq(bot.cols, top.cols)
    elif mode == "continuum":
        top = GlauberChain(graph, params, uniform_config(graph, 1, params.beta), seed, periodic,
                           schedule)
        bot = GlauberChain(graph, params, uniform_config(graph, -1, params.beta), seed, periodic,
                           schedule)

        def ordered():
            return all(partial_leq(bot.config[v], top.config[v]) for v in top.sites)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    res = CoupledResult(top.state(), bot.state())
    next_rec = 0.0
    while True:
        t_next = min(top.next_time(), bot.next_time())
        if statistic is not None and record_every > 0:
            while next_rec <= min(t_next, t_end):
                res.times.append(next_rec)
                res.gap.append(statistic(top.state(), bot.state()))
                next_rec += record_every
        if t_next > t_end:
            break
        top.step()
        bot.step()
        if not ordered():
            if mode == "grid" and strict:
                raise AssertionError(f"monotone grid coupling lost order at t={top.time}")
            res.order_violations += 1
    top.time = bot.time = t_end
    res.plus, res.minus = top.state(), bot.state()
    return res


def coalescence_time(system: GridSystem, seed: SeedLike, t_max: float = 1e4) -> float:
    """First time the grid chains from all-plus and all-minus agree (inf if never)."""
    top = GridChain(system, [2 ** system.n - 1] * len(system.sites), seed)
    bot = GridChain(system, [0] * len(system.sites), seed)
    while top.next_time() <= t_max:
        top.step()
        bot.step()
        if top.cols == bot.cols:
            return top.time
    return math.inf


# ---------------------------------------------------------------- censoring

@dataclass
class CensoringRow:
    time: float
    var_a: float
    var_b: float
    ent_a: float
    ent_b: float
    tv_a: float
    tv_b: float
    domination_margin: float
    density_a_increasing: bool
    density_b_increasing: bool
    ok: bool


def _evolve(system: GridSystem, schedule: Schedule, times: Sequence[float], start: np.ndarray):
    """Law at each requested time of the chain started from ``start`` under ``schedule``."""
    cache = {}
    out = []
    v = start.copy()
    t_cur = 0.0
    cuts = sorted(set(t for t in schedule.times if t > 0) | set(times))
    for t in cuts:
        if t > t_cur:
            active = schedule.active(t_cur)
            if active:
                if active not in cache:
                    cache[active] = grid_generator(system, active).T.tocsr()
                v = expm_multiply(cache[active] * (t - t_cur), v)
                v = np.clip(v, 0.0, None)
                v /= v.sum()
            t_cur = t
        if t in times:
            out.append(v.copy())
    return out


def _divergences(p: np.ndarray, pi: np.ndarray):
    f = p / pi
    var = float(np.dot(pi, f * f) - 1.0)
    nz = p > 0
    ent = float(np.dot(p[nz], np.log(f[nz])))
    tv = 0.5 * float(np.abs(p - pi).sum())
    return var, ent, tv, f


def censoring_check_exact(system: GridSystem, sched_a: Schedule, sched_b: Schedule,
                          times: Sequence[float], tol: float = 1e-10) -> List[CensoringRow]:
    """Exact comparison of a censored run (A) with a less censored one (B).

    Both start from the all-plus configuration.  At each time the variance,
    relative entropy and total variation to the discretized Gibbs measure
    must satisfy ``B <= A`` and the law under B must be stochastically below
    the law under A.
    """
    if not sched_a.is_subset_of(sched_b):
        raise ValueError("schedule A must be contained in schedule B at all times")
    pi = system.gibbs()
    start = np.zeros(system.n_states)
    start[system.all_plus_state()] = 1.0
    times = sorted(float(t) for t in times)
    laws_a = _evolve(system, sched_a, times, start)
    laws_b = _evolve(system, sched_b, times, start)
    rows = []
    for t, pa, pb in zip(times, laws_a, laws_b):
        va, ea, ta, fa = _divergences(pa, pi)
        vb, eb, tb, fb = _divergences(pb, pi)
        margin = min_upset_mass(pa - pb, system.n_bits)
        scale = max(1.0, abs(va))
        inc_a = is_increasing(fa, system.n_bits, tol * max(1.0, fa.max()))
        inc_b = is_increasing(fb, system.n_bits, tol * max(1.0, fb.max()))
        ok = (vb <= va + tol * scale and eb <= ea + tol * max(1.0, abs(ea))
              and tb <= ta + tol and margin >= -tol and inc_a and inc_b)
        rows.append(CensoringRow(t, va, vb, ea, eb, ta, tb, margin, inc_a, inc_b, ok))
    return rows


# ---------------------------------------------------------------- equilibrium runs

def equilibrium_series(graph: SiteGraph, params: ModelParams, n_events: int, seed: SeedLike,
                       periodic: bool = True, burn_in: float = 20.0,
                       start_sign: int = 1) -> Dict[str, np.ndarray]:
    """Time-slice observables of an equilibrium run, recorded when they change.

    ``z[v]`` (``sigma_v . 1 / beta``) is recorded after every update of v and
    ``zz[u,v]`` (``sigma_u . sigma_v / beta``) after every update of u or v,
    for edges between free vertices.  Each series is a stationary sequence
    whose mean is the equilibrium value.
    """
    beta = params.beta
    one = Trajectory.constant(1, beta)
    chain = GlauberChain(graph, params, uniform_config(graph, start_sign, beta), seed, periodic)
    chain.advance(burn_in)
    free = set(chain.sites)
    edges = [(u, v) for u, v in graph.edges() if u in free and v in free]
    touching = {v: [(a, b) for a, b in edges if v in (a, b)] for v in chain.sites}
    out: Dict[str, list] = {f"z[{v}]": [] for v in chain.sites}
    out.update({f"zz[{u},{v}]": [] for u, v in edges})
    for _ in range(n_events):
        _, v, upd = chain.step()
        if not upd:
            continue
        out[f"z[{v}]"].append(dot(chain.config[v], one) / beta)
        for a, b in touching[v]:
            out[f"zz[{a},{b}]"].append(dot(chain.config[a], chain.config[b]) / beta)
    return {k: np.asarray(x) for k, x in out.items()}


def magnetization_series(graph: SiteGraph, params: ModelParams, vertex, dt: float,
                         n_samples: int, seed: SeedLike, periodic: bool = False,
                         burn_in: float = 20.0, start_sign: int = 1) -> np.ndarray:
    """``sigma_vertex . 1`` sampled every ``dt`` time units after a burn-in."""
    beta = params.beta
    one = Trajectory.constant(1, beta)
    chain = GlauberChain(graph, params, uniform_config(graph, start_sign, beta), seed, periodic)
    chain.advance(burn_in)
    out = np.empty(n_samples)
    t = chain.time
    for k in range(n_samples):
        t += dt
        chain.advance(t)
        out[k] = dot(chain.config[vertex], one)
    return out


def gap_scan(b: int, depths: Sequence[int], params: ModelParams, boundary: str = "plus",
             dt: float = 0.5, n_samples: int = 4000, seed: SeedLike = 0,
             burn_in: float = 20.0) -> List[dict]:
    """Integrated autocorrelation time of the root magnetization for each tree depth."""
    from .estimators import integrated_autocorrelation
    from .graph import build_tree

    rows = []
    for d in depths:
        tree = build_tree(b, d, params.beta, boundary)
        series = magnetization_series(tree, params, tree.root, dt, n_samples,
                                      child_sequence(seed, 7, d), burn_in=burn_in)
        ac = integrated_autocorrelation(series, strict=False)
        tau = dt * ac.tau
        rows.append({"depth": d, "tau_int": tau, "tau_se": dt * ac.se,
                     "n_samples": n_samples, "window": ac.window,
                     "enough_samples": bool(n_samples >= 50 * ac.tau)})
    return rows


def conditional_gap_mc(b: int, depth: int, params: ModelParams, n_events: int, seed: SeedLike,
                       boundary: str = "plus", n_batches: int = 50) -> List[dict]:
    """Monte Carlo estimate of ``E[sigma_z . 1 | root +] - E[sigma_z . 1 | root -]``.

    The root is frozen to a constant trajectory of each sign and one vertex
    per depth (the leftmost) is followed with free imaginary-time ends.
    """
    from .estimators import batch_mean
    from .graph import build_tree

    tree = build_tree(b, depth, params.beta, boundary)
    watch = {d: (b ** d - 1) // (b - 1) for d in range(1, depth + 1)}
    means = {}
    for k, sign in enumerate((1, -1)):
        g = tree.with_frozen({tree.root: Trajectory.constant(sign, params.beta)})
        series = equilibrium_series(g, params, n_events, child_sequence(seed, 11, k),
                                    periodic=False, start_sign=sign)
        means[sign] = {d: batch_mean(series[f"z[{v}]"] * params.beta, n_batches)
                       for d, v in watch.items()}
    rows = []
    for d in sorted(watch):
        hi, lo = means[1][d], means[-1][d]
        rows.append({"depth": d, "vertex": watch[d], "gap": hi.mean - lo.mean,
                     "se": math.hypot(hi.se, lo.se)})
    return rows
