import math
from itertools import product

import numpy as np
import pytest
from scipy.stats import chisquare, ks_2samp

from qising.estimators import batch_mean, monotone_bc_battery
from qising.glauber import (GlauberChain, GridChain, GridSystem, Schedule, censoring_check_exact,
                            coalescence_time, coupled_run_pm, gap_scan, grid_generator,
                            grid_spectral_gap, magnetization_series, run)
from qising.graph import build_tree, path_graph, uniform_config
from qising.sampler import sample_site
from qising.trajectory import ModelParams, PiecewiseField, Trajectory, dot, partial_leq
from qising.transfer import FREE


def naive_gibbs(n, lam, beta, h, edges, n_sites, periodic=False):
    """Discretized Gibbs vector of a graph without frozen sites, by direct enumeration."""
    delta = beta / n
    p = lam * delta / (1 + lam * delta)
    w = np.zeros(2 ** (n * n_sites))
    for state in range(len(w)):
        cols = [(state >> (n * i)) & ((1 << n) - 1) for i in range(n_sites)]
        s = [[2 * ((c >> k) & 1) - 1 for k in range(n)] for c in cols]
        val = 1.0
        for si in s:
            bonds = list(zip(si, si[1:])) + ([(si[-1], si[0])] if periodic else [])
            for a, b in bonds:
                val *= p if a != b else 1 - p
            val *= math.exp(delta * h * sum(si))
        for u, v in edges:
            val *= math.exp(delta * sum(a * b for a, b in zip(s[u], s[v])))
        w[state] = val
    return w / w.sum()


def test_schedule_parsing():
    tree = build_tree(2, 1, 1.0)
    assert Schedule.parse("full", tree).active(3.0) == frozenset({0, 1, 2})
    assert Schedule.parse("subtree:1", tree).active(0.0) == frozenset({1})
    s = Schedule.parse("0:sites:1,2;0.75:full", tree)
    assert s.active(0.5) == frozenset({1, 2}) and s.active(0.75) == frozenset({0, 1, 2})
    assert Schedule.parse("subtree:1", tree).is_subset_of(Schedule.full(tree))
    assert not Schedule.full(tree).is_subset_of(Schedule.parse("sites:0", tree))
    with pytest.raises(ValueError):
        Schedule.parse("bogus", tree)
    with pytest.raises(ValueError):
        Schedule((0.0, 0.0), (frozenset(), frozenset()))


def test_empty_schedule_is_identity():
    tree = build_tree(2, 2, 1.0)
    start = {v: Trajectory(1, (0.3,)) for v in tree.free}
    state = run(tree, ModelParams(1.0, 1.0), Schedule.empty(), 10.0, start, seed=1)
    assert state.config == start and state.n_updates == 0 and state.n_events > 0


def test_single_site_equilibrium_law(rng):
    params = ModelParams(1.0, 1.2, 0.5)
    g = path_graph(1)
    one = Trajectory.constant(1, 1.0)
    runs = [dot(run(g, params, None, 8.0, uniform_config(g, -1, 1.0), seed=k).config[0], one)
            for k in range(2000)]
    direct = [dot(sample_site(PiecewiseField.constant(0.5, 1.0), params, FREE, rng), one)
              for _ in range(2000)]
    assert ks_2samp(runs, direct).pvalue > 0.01


def test_chain_reproducible():
    tree = build_tree(2, 1, 1.0)
    params = ModelParams(1.0, 1.0)
    a = run(tree, params, None, 5.0, uniform_config(tree, 1, 1.0), seed=9)
    b = run(tree, params, None, 5.0, uniform_config(tree, 1, 1.0), seed=9)
    assert a.config == b.config


def test_periodic_chain_needs_periodic_start():
    g = path_graph(1)
    with pytest.raises(ValueError):
        GlauberChain(g, ModelParams(1.0, 1.0), {0: Trajectory(1, (0.5,))}, 0, periodic=True)


@pytest.mark.parametrize("periodic", [False, True])
def test_generator_rows_and_stationarity(periodic):
    params = ModelParams(1.0, 1.3, 0.2)
    system = GridSystem(path_graph(2), params, 3, periodic)
    q = grid_generator(system, system.sites).toarray()
    assert np.allclose(q.sum(axis=1), 0, atol=1e-13)
    off = q - np.diag(np.diag(q))
    assert off.min() >= 0
    pi = system.gibbs()
    np.testing.assert_allclose(pi, naive_gibbs(3, 1.3, 1.0, 0.2, [(0, 1)], 2, periodic),
                               rtol=1e-12)
    assert np.abs(pi @ q).max() < 1e-10


def test_generator_of_empty_set_is_zero():
    system = GridSystem(path_graph(2), ModelParams(1.0, 1.0), 2)
    assert grid_generator(system, ()).nnz == 0


def test_two_site_gap_positive():
    system = GridSystem(path_graph(2), ModelParams(1.0, 1.0), 2)
    assert grid_spectral_gap(system) > 0


def test_single_site_gap_is_one():
    system = GridSystem(path_graph(1), ModelParams(1.0, 1.0, 0.3), 4)
    assert grid_spectral_gap(system) == pytest.approx(1.0)


def test_grid_chain_stationary_law():
    params = ModelParams(1.0, 1.0, 0.3)
    system = GridSystem(path_graph(2), params, 2)
    pi = system.gibbs()
    spacing = 6.0 / grid_spectral_gap(system)
    chain = GridChain(system, [3, 3], seed=2)
    chain.advance(20.0)
    n = 6000
    counts = np.zeros(system.n_states)
    t = chain.time
    for _ in range(n):
        t += spacing
        chain.advance(t)
        counts[chain.joint_state()] += 1
    assert chisquare(counts, pi * n).pvalue > 0.01


def test_grid_chain_refuses_non_monotone_step():
    system = GridSystem(path_graph(1), ModelParams(1.0, 5.0), 2)
    with pytest.raises(ValueError):
        GridChain(system, [0], 0)


def test_grid_coupling_keeps_order():
    tree = build_tree(2, 2, 1.0)
    res = coupled_run_pm(tree, ModelParams(1.0, 1.0), 30.0, seed=5, mode="grid", n_slices=6)
    assert res.order_violations == 0
    system = GridSystem(tree, ModelParams(1.0, 1.0), 6)
    assert math.isfinite(coalescence_time(system, seed=5))


def test_continuum_coupling_starts_ordered_and_closes():
    tree = build_tree(2, 3, 1.0)
    one = Trajectory.constant(1, 1.0)

    def root_gap(plus, minus):
        return dot(plus.config[0], one) - dot(minus.config[0], one)

    gaps = []
    for seed in range(40):
        res = coupled_run_pm(tree, ModelParams(1.0, 1.0), 12.0, seed=seed,
                             statistic=root_gap, record_every=1.0)
        gaps.append(res.gap)
    mean_gap = np.mean(gaps, axis=0)
    assert mean_gap[0] == pytest.approx(2.0)
    slope = np.polyfit(np.arange(len(mean_gap)), mean_gap, 1)[0]
    assert slope < 0 and mean_gap[-1] < 0.5 * mean_gap[0]


def test_censoring_equal_schedules_are_equalities():
    tree = build_tree(2, 1, 1.0)
    system = GridSystem(tree, ModelParams(1.0, 1.0), 2)
    full = Schedule.full(tree)
    rows = censoring_check_exact(system, full, full, [0.3, 1.0])
    for r in rows:
        assert r.ok and r.var_a == r.var_b and r.ent_a == r.ent_b and r.tv_a == r.tv_b


def test_censoring_empty_vs_full():
    tree = path_graph(2)
    system = GridSystem(tree, ModelParams(1.0, 1.0, 0.1), 2)
    rows = censoring_check_exact(system, Schedule.empty(), Schedule.full(tree), [0.1, 0.5, 2.0])
    for r in rows:
        assert r.ok and r.tv_b < r.tv_a
        assert r.density_a_increasing and r.density_b_increasing
    with pytest.raises(ValueError):
        censoring_check_exact(system, Schedule.full(tree), Schedule.empty(), [1.0])


def test_depth_zero_autocorrelation_time_is_one():
    rows = gap_scan(2, [0], ModelParams(1.0, 1.0), dt=0.25, n_samples=8000, seed=3)
    assert rows[0]["tau_int"] == pytest.approx(1.0, rel=0.25)


def test_equilibrium_monotone_in_boundary():
    params = ModelParams(1.0, 1.0)
    series = {}
    for bc in ("plus", "minus"):
        tree = build_tree(2, 1, 1.0, bc)
        series[bc] = {f"root_{bc}": magnetization_series(tree, params, 0, 1.0, 3000, seed=1,
                                                         start_sign=1 if bc == "plus" else -1)}
    rep = monotone_bc_battery({"root": series["plus"]["root_plus"]},
                              {"root": series["minus"]["root_minus"]})
    assert rep.verdict == "PASS"
    hi = batch_mean(series["plus"]["root_plus"])
    lo = batch_mean(series["minus"]["root_minus"])
    assert hi.mean - lo.mean > 3 * math.hypot(hi.se, lo.se)
