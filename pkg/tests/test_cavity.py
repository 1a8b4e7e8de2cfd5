import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qising.cavity import (CavitySpace, apply_D, apply_R, apply_R_rows, child_sum_law,
                           classical_tree_gaps, density_bound, derivative_matrix, dk_norm_scan,
                           gamma_envelope, gamma_exact, kappa_exact, kernel_avg_tv,
                           kernel_sup_tv, lipschitz_check, nu_recursion, solve_cavity,
                           solve_cavity_rows, stoch_leq, stoch_positive, tree_root_marginals, tv)
from qising.grid import grid_single_site

GAMMA_LIPSCHITZ = 1 / math.log(3)


def random_kernel(rng, ns, signed=False):
    if signed:
        return rng.normal(size=(ns, ns))
    return rng.dirichlet(np.ones(ns), size=ns)


def pushed_down(rng, p):
    """Law of the column after clearing a random set of bits (stochastically below p)."""
    ns = len(p)
    masks = rng.integers(0, ns, ns)
    return np.bincount(np.arange(ns) & masks, weights=p, minlength=ns)


def positive_kernel(rng, ns):
    """Zero-mass rows that are stochastically positive."""
    rows = []
    for _ in range(ns):
        p = rng.dirichlet(np.ones(ns))
        rows.append(p - pushed_down(rng, p))
    return np.array(rows)


def brute_force_R(space, eta_col, kernels, rho):
    """Direct sum over all tuples of child columns."""
    ns, n = space.n_states, space.n
    signs = np.array([[2 * ((c >> k) & 1) - 1 for k in range(n)] for c in range(ns)], float)
    out = np.zeros(ns)
    for s0 in range(ns):
        if rho[s0] == 0:
            continue
        for children in product(range(ns), repeat=len(kernels)):
            weight = rho[s0] * np.prod([k[s0, c] for k, c in zip(kernels, children)])
            field = space.h + signs[eta_col] + signs[list(children)].sum(axis=0)
            out += weight * grid_single_site(field, space.lam, space.beta, space.periodic)
    return out


@pytest.fixture(scope="module")
def small():
    return CavitySpace(3, 1.0, 1.0, 0.2, b=2)


@pytest.fixture(scope="module")
def nu4():
    space = CavitySpace(4, 1.0, 1.0, 0.0, b=2)
    return space, nu_recursion(space, tol=1e-11)


def test_tv_examples():
    assert tv([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert tv([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert tv([0.6, 0.4], [0.4, 0.6]) == pytest.approx(0.2)


def test_order_examples():
    top_minus_bottom = np.zeros(8)
    top_minus_bottom[7], top_minus_bottom[0] = 1.0, -1.0
    assert stoch_positive(top_minus_bottom)
    mu = np.random.default_rng(0).dirichlet(np.ones(8))
    assert stoch_leq(mu, mu)
    rho = np.zeros(4)
    rho[1], rho[2] = 1.0, -1.0
    assert not stoch_positive(rho)


def test_memory_guard():
    with pytest.raises(MemoryError):
        CavitySpace(16, 1.0, 1.0, b=2)
    with pytest.raises(ValueError):
        CavitySpace(4, 1.0, 1.0, b=1)


@pytest.mark.parametrize("n,b", [(3, 2), (2, 3)])
def test_apply_R_matches_tuple_sum(n, b, rng):
    space = CavitySpace(n, 1.3, 0.8, -0.3, b=b)
    kernels = [random_kernel(rng, space.n_states) for _ in range(b)]
    rho = rng.dirichlet(np.ones(space.n_states))
    for eta in range(space.n_states):
        np.testing.assert_allclose(apply_R(space, eta, kernels, rho),
                                   brute_force_R(space, eta, kernels, rho), atol=1e-14)


def test_apply_R_signed_inputs_match_tuple_sum(small, rng):
    kernels = [random_kernel(rng, 8, signed=True) for _ in range(2)]
    rho = rng.normal(size=8)
    np.testing.assert_allclose(apply_R(small, 5, kernels, rho),
                               brute_force_R(small, 5, kernels, rho), atol=1e-12)


def test_child_sum_law_is_a_law(small, rng):
    p = child_sum_law(small, [random_kernel(rng, 8) for _ in range(2)])
    assert np.allclose(p.sum(axis=1), 1.0) and p.min() > -1e-15


def test_constant_kernels_forget_the_measure(small, rng):
    row = rng.dirichlet(np.ones(8))
    kernels = [np.tile(row, (8, 1)), np.tile(rng.dirichlet(np.ones(8)), (8, 1))]
    a = apply_R(small, 3, kernels, rng.dirichlet(np.ones(8)))
    b = apply_R(small, 3, kernels, rng.dirichlet(np.ones(8)))
    np.testing.assert_allclose(a, b, atol=1e-15)
    np.testing.assert_allclose(apply_R(small, 3, kernels, 2.5 * rng.dirichlet(np.ones(8))),
                               2.5 * a, atol=1e-14)
    phi = solve_cavity(small, 3, kernels, max_iter=2)
    np.testing.assert_allclose(phi, a, atol=1e-15)


@settings(max_examples=40)
@given(st.integers(0, 2 ** 31))
def test_mass_preserved_and_zero_mass_contracts(seed):
    rng = np.random.default_rng(seed)
    space = CavitySpace(3, 1.0, rng.uniform(0.2, 2.0), rng.uniform(-1, 1), b=2)
    kernels = [random_kernel(rng, 8) for _ in range(2)]
    rho = rng.normal(size=8)
    eta = int(rng.integers(8))
    out = apply_R(space, eta, kernels, rho)
    assert out.sum() == pytest.approx(rho.sum(), abs=1e-12)
    zero = rho - rho.mean()
    out0 = apply_R(space, eta, kernels, zero)
    assert abs(out0.sum()) < 1e-12
    assert 0.5 * np.abs(out0).sum() <= gamma_envelope(space).gamma * 0.5 * np.abs(zero).sum() + 1e-12


@settings(max_examples=40)
@given(st.integers(0, 2 ** 31))
def test_total_mass_product_bound(seed):
    # |R(rho)|(Sigma) <= sum |rho(s0)| prod_i |rho_i^{s0}|(Sigma) for signed inputs
    rng = np.random.default_rng(seed)
    space = CavitySpace(3, 1.0, 0.9, 0.1, b=2)
    kernels = [random_kernel(rng, 8, signed=True) for _ in range(2)]
    rho = rng.normal(size=8)
    lhs = np.abs(apply_R(space, int(rng.integers(8)), kernels, rho)).sum()
    rhs = sum(abs(rho[s]) * np.prod([np.abs(k[s]).sum() for k in kernels]) for s in range(8))
    assert lhs <= rhs * (1 + 1e-12)


@settings(max_examples=40)
@given(st.integers(0, 2 ** 31))
def test_increment_bound_for_positive_directions(seed):
    rng = np.random.default_rng(seed)
    space = CavitySpace(3, 1.0, rng.uniform(0.3, 2.0), 0.0, b=2)
    pos = positive_kernel(rng, 8)
    assert all(stoch_positive(r) for r in pos)
    other = random_kernel(rng, 8)
    rho = rng.dirichlet(np.ones(8))
    eta = int(rng.integers(8))
    out = apply_R(space, eta, [pos, other], rho)
    dot_one = space.delta * space.signs.sum(axis=1)
    rhs = GAMMA_LIPSCHITZ * float(rho @ (pos @ dot_one))
    assert 0.5 * np.abs(out).sum() <= rhs + 1e-12


def test_fixed_point_methods_agree(small, rng):
    kernels = [random_kernel(rng, 8) for _ in range(2)]
    it = solve_cavity(small, 2, kernels)
    direct = solve_cavity(small, 2, kernels, method="direct")
    assert tv(it, direct) < 1e-11
    assert tv(it, apply_R(small, 2, kernels, it)) < 1e-12
    rows = solve_cavity_rows(small, kernels)
    assert tv(rows[2], it) < 1e-11
    with pytest.raises(ValueError):
        solve_cavity(small, 2, kernels, method="guess")


def test_perturbation_identity(small, rng):
    k1, k2 = random_kernel(rng, 8), random_kernel(rng, 8)
    k1_bar = 0.7 * k1 + 0.3 * random_kernel(rng, 8)
    eta = 6
    phi = solve_cavity(small, eta, [k1, k2], method="direct")
    phi_bar = solve_cavity(small, eta, [k1_bar, k2], method="direct")
    # transfer matrix of the perturbed operator built column by column from apply_R
    t_bar = np.array([apply_R(small, eta, [k1_bar, k2], e) for e in np.eye(8)])
    y = apply_R(small, eta, [k1_bar - k1, k2], phi)
    assert abs(y.sum()) < 1e-14
    # solve x (I - T) = y on zero-mass vectors
    a = np.vstack([(np.eye(8) - t_bar).T, np.ones((1, 8))])
    x = np.linalg.lstsq(a, np.append(y, 0.0), rcond=None)[0]
    assert np.abs((phi_bar - phi) - x).max() < 1e-9


def test_nu_recursion_matches_tree_marginals(nu4):
    space, nr = nu4
    assert nr.converged
    exact = tree_root_marginals(space, len(nr.nus) - 1)
    assert len(nr.nus) > 50  # deep enough that unnormalized messages would lose precision
    for k, nu in enumerate(nr.nus):
        assert kernel_sup_tv(nu - exact[k]) < 1e-10


def test_nu_recursion_is_stochastically_decreasing(nu4):
    space, nr = nu4
    for a, b in zip(nr.nus, nr.nus[1:]):
        for eta in range(space.n_states):
            assert stoch_leq(b[eta], a[eta], tol=1e-10)


def test_nu_rows_monotone_in_parent(nu4):
    space, nr = nu4
    ns = space.n_states
    for nu in nr.nus[1:8] + [nr.nu_inf]:
        for eta in range(ns):
            for k in range(space.n):
                if not eta >> k & 1:
                    assert stoch_leq(nu[eta], nu[eta | (1 << k)], tol=1e-10)


def test_density_bounds(nu4):
    space, nr = nu4
    c = min(density_bound(space, nu) for nu in nr.nus[1:] + [nr.nu_inf])
    assert 0 < c <= 1
    assert density_bound(space, nr.nus[0]) == 0.0


def test_apply_D_properties(nu4, rng):
    space, nr = nu4
    ns = space.n_states
    nu = nr.nu_inf
    assert np.abs(apply_D(space, np.zeros((ns, ns)), nu)).max() == 0
    rho = positive_kernel(rng, ns)
    out = apply_D(space, rho, nu)
    assert np.abs(out.sum(axis=1)).max() < 1e-12
    assert all(stoch_positive(r, tol=1e-10) for r in out)
    dmat = derivative_matrix(space, nu)
    signed = rng.normal(size=(ns, ns))
    signed -= signed.mean(axis=1, keepdims=True)
    np.testing.assert_allclose((dmat @ signed.ravel()).reshape(ns, ns),
                               apply_D(space, signed, nu), atol=1e-12)


def test_dk_scan_small_grid(nu4):
    space, nr = nu4
    scan = dk_norm_scan(space, nr.nu_inf, k_max=5)
    assert scan.norms[0] >= 1
    assert scan.rate <= 0.6
    assert max(scan.scaled[2:]) <= 1.5 * scan.scaled[2]
    # random positive directions never exceed the exact operator norm
    assert all(r <= n * (1 + 1e-9) for r, n in zip(scan.random_ratio_max, scan.norms))


def test_kappa_depth_zero_and_plus_bound():
    space = CavitySpace(4, 1.0, 1.0, 0.0, b=2)
    res = kappa_exact(space, 6)
    assert res.gaps[0] == pytest.approx(2.0)
    assert all(g > 0 for g in res.gaps)
    assert res.kappa <= 0.5 * 1.15


@pytest.mark.parametrize("boundary,beta", [(1, 0.7), (-1, 0.7), (1, 1.4)])
def test_kappa_classical_limit(boundary, beta):
    space = CavitySpace(3, beta, 0.0, 0.0, b=2)
    res = kappa_exact(space, 6, boundary=boundary)
    np.testing.assert_allclose(res.gaps, classical_tree_gaps(2, 6, beta, boundary), rtol=1e-10,
                               atol=1e-14)


def test_classical_gaps_hand_values():
    # depth 1, no boundary pull through the first edge: tanh(2J + J) - tanh(2J - J) over 2
    j = 0.5
    g = classical_tree_gaps(2, 1, j)
    assert g[1] == pytest.approx(2 * j * 0.5 * (math.tanh(3 * j) - math.tanh(j)))


def test_gamma_below_one_and_decreasing_in_lambda():
    vals = [gamma_exact(CavitySpace(4, 1.0, lam, 0.0, b=2)).gamma for lam in (0.25, 0.5, 1, 2, 4)]
    assert all(v < 1 for v in vals)
    # the lambda grid stops at lambda * delta = 1, where the grid reference is still a valid flip process
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_gamma_sampled_search_is_not_above_exhaustive():
    space = CavitySpace(5, 1.0, 1.0, 0.3, b=2)
    full = gamma_exact(space, exhaustive=True)
    part = gamma_exact(space, exhaustive=False, n_sampled=16)
    assert part.gamma <= full.gamma + 1e-15
    assert gamma_envelope(space).gamma >= full.gamma


def test_lipschitz_bound():
    res = lipschitz_check(CavitySpace(4, 1.0, 1.0, 0.2, b=2), n_pairs=500)
    assert res.violations == 0 and res.max_ratio <= res.bound


def test_kernel_norms(small):
    k = np.zeros((8, 8))
    k[:, 0], k[:, 7] = 1.0, -1.0
    assert kernel_sup_tv(k) == 1.0
    assert kernel_avg_tv(small, k) == pytest.approx(1.0)
    k[0] = 0
    assert kernel_avg_tv(small, k) == pytest.approx(1.0 - small.reference[0])


def test_row_operator_matches_single_row(small, rng):
    kernels = [random_kernel(rng, 8) for _ in range(2)]
    rows = rng.dirichlet(np.ones(8), size=8)
    full = apply_R_rows(small, kernels, rows)
    for eta in range(8):
        np.testing.assert_allclose(full[eta], apply_R(small, eta, kernels, rows[eta]), atol=1e-15)
