import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qising.ed import single_site_closed_form
from qising.sampler import (increasing_function_suite, monotone_endpoint_coupling,
                            sample_bridge, sample_free_reference, sample_site)
from qising.trajectory import ModelParams, PiecewiseField, Trajectory, dot, partial_leq
from qising.transfer import (FREE, PERIODIC, EndpointCondition, endpoint_law, interval_kernel,
                             log_partition)
from qising.workflows import constant_path_probabilities, three_piece_field

from conftest import pointwise_max, trajectories


def zscore(values, exact):
    values = np.asarray(values, float)
    se = values.std(ddof=1) / math.sqrt(len(values))
    return (values.mean() - exact) / se


def mean_dot_one_exact(h, lam, beta, bc, eps=1e-5):
    """E[sigma . 1] as the field derivative of the log partition function (central difference)."""
    params = ModelParams(beta, lam)
    up = log_partition(PiecewiseField.constant(h + eps, beta), params, bc)
    dn = log_partition(PiecewiseField.constant(h - eps, beta), params, bc)
    return (up - dn) / (2 * eps)


def test_free_reference(rng):
    params = ModelParams(2.0, 1.5)
    draws = [sample_free_reference(params, rng) for _ in range(100_000)]
    assert abs(zscore([d.n_flips for d in draws], 3.0)) < 3
    assert abs(zscore([d.initial_sign == 1 for d in draws], 0.5)) < 3
    zero = [sample_free_reference(ModelParams(2.0, 0.0), rng) for _ in range(200)]
    assert all(d.is_constant() for d in zero)
    assert 0 < sum(d.initial_sign == 1 for d in zero) < 200


def test_classical_site_has_no_flips(rng):
    beta, h = 1.0, 0.8
    draws = [sample_site(PiecewiseField.constant(h, beta), ModelParams(beta, 0.0), FREE, rng)
             for _ in range(20_000)]
    assert all(d.is_constant() for d in draws)
    p = math.exp(beta * h) / (2 * math.cosh(beta * h))
    assert abs(zscore([d.initial_sign == 1 for d in draws], p)) < 3


def test_zero_field_flip_count_is_poisson(rng):
    params = ModelParams(1.5, 2.0)
    counts = np.array([sample_site(PiecewiseField.constant(0.0, 1.5), params, FREE, rng).n_flips
                       for _ in range(50_000)])
    mu = 3.0
    assert abs(zscore(counts, mu)) < 3
    # variance equals the mean for a Poisson count
    assert counts.var() == pytest.approx(mu, rel=0.05)


def test_periodic_mean_matches_closed_form(rng):
    beta, lam, h = 1.0, 1.0, 1.0
    vals = [dot(sample_site(PiecewiseField.constant(h, beta), ModelParams(beta, lam), PERIODIC, rng),
                Trajectory.constant(1, beta)) for _ in range(100_000)]
    exact = single_site_closed_form(beta, h, lam)[0] * beta
    assert abs(zscore(vals, exact)) < 3


@pytest.mark.parametrize("bc", [FREE, PERIODIC, EndpointCondition(end=1)])
def test_mean_dot_one_matches_partition_derivative(bc, rng):
    beta, lam, h = 2.0, 0.7, -0.4
    vals = [dot(sample_site(PiecewiseField.constant(h, beta), ModelParams(beta, lam), bc, rng),
                Trajectory.constant(1, beta)) for _ in range(40_000)]
    assert abs(zscore(vals, mean_dot_one_exact(h, lam, beta, bc))) < 3


@pytest.mark.parametrize("bc", [FREE, PERIODIC])
def test_endpoint_frequencies_three_piece(bc, rng):
    field = three_piece_field(1.0, -0.3, bump=1.2)
    params = ModelParams(1.0, 0.9)
    law = endpoint_law(field, params, bc)
    draws = [sample_site(field, params, bc, rng) for _ in range(100_000)]
    for i, s0 in enumerate((1, -1)):
        for j, s1 in enumerate((1, -1)):
            hits = [d.initial_sign == s0 and d.final_sign == s1 for d in draws]
            if law[i, j] == 0:
                assert not any(hits)
            else:
                assert abs(zscore(hits, law[i, j])) < 4


@pytest.mark.parametrize("lam,length,end", [(1.0, 1.0, 1), (1.0, 1.0, -1), (3.0, 0.7, 1),
                                            (3.0, 0.7, -1)])
def test_zero_field_bridge_flip_mean(lam, length, end, rng):
    x = lam * length
    exact = x * math.tanh(x) if end == 1 else x / math.tanh(x)
    counts = [sample_bridge(0.0, lam, length, 1, end, rng).n_flips for _ in range(40_000)]
    assert abs(zscore(counts, exact)) < 3


@pytest.mark.parametrize("h,start,end", [(1.3, 1, 1), (1.3, -1, 1), (-0.8, -1, -1)])
def test_tilted_bridge_flip_mean(h, start, end, rng):
    # E[#flips] = lam d/dlam log(e^{lam L} K_ab(lam))
    lam, length, eps = 1.2, 1.5, 1e-6
    a, b = (0 if start == 1 else 1), (0 if end == 1 else 1)

    def logk(l):
        return math.log(interval_kernel(h, l, length)[a, b]) + l * length

    exact = lam * (logk(lam + eps) - logk(lam - eps)) / (2 * eps)
    draws = [sample_bridge(h, lam, length, start, end, rng) for _ in range(40_000)]
    assert all(d.initial_sign == start and d.final_sign == end for d in draws)
    assert abs(zscore([d.n_flips for d in draws], exact)) < 3


def test_bridge_large_rate(rng):
    counts = [sample_bridge(0.0, 700.0, 1.0, 1, 1, rng).n_flips for _ in range(300)]
    assert all(c % 2 == 0 for c in counts)
    assert abs(zscore(counts, 700.0)) < 3


def test_zero_probability_pinning_raises(rng):
    with pytest.raises(ValueError):
        sample_site(PiecewiseField.constant(0.5, 1.0), ModelParams(1.0, 0.0),
                    EndpointCondition(start=1, end=-1), rng)


def test_sampler_reproducible():
    field = three_piece_field(1.0, 0.2)
    params = ModelParams(1.0, 2.0)
    a = [sample_site(field, params, FREE, np.random.default_rng(5)) for _ in range(3)]
    b = [sample_site(field, params, FREE, np.random.default_rng(5)) for _ in range(3)]
    assert a == b


def test_coupling_order_and_product_identity(rng):
    field = three_piece_field(1.0, 0.3)
    params = ModelParams(1.0, 1.0)
    n = 20_000
    both = 0
    for _ in range(n):
        sp, sm = monotone_endpoint_coupling(field, params, rng)
        assert partial_leq(sm, sp)
        assert sp.final_sign == 1 and sm.final_sign == -1
        both += sp.is_constant() and sm.is_constant()
    pp, pm = constant_path_probabilities(field, params)
    target = pp * pm
    se = math.sqrt(target * (1 - target) / n)
    assert abs(both / n - target) < 3 * se


def test_constant_path_probability_oracle():
    # h = 0 constant field on [0, beta]: mu(sigma = + | end +) = e^{-lam beta} / P(end +) * 1/2
    beta, lam = 1.0, 0.8
    pp, pm = constant_path_probabilities(PiecewiseField.constant(0.0, beta), ModelParams(beta, lam))
    assert pp == pytest.approx(math.exp(-lam * beta))
    assert pm == pytest.approx(pp)


def test_coupling_marginal_matches_direct_pinning(rng):
    field = three_piece_field(1.0, -0.2)
    params = ModelParams(1.0, 1.5)
    one = Trajectory.constant(1, 1.0)
    n = 20_000
    coupled = [monotone_endpoint_coupling(field, params, rng)[0] for _ in range(n)]
    direct = [sample_site(field, params, EndpointCondition(end=1), rng) for _ in range(n)]
    for stat in (lambda s: s.n_flips, lambda s: dot(s, one)):
        a = np.array([stat(s) for s in coupled], float)
        b = np.array([stat(s) for s in direct], float)
        se = math.hypot(a.std(ddof=1), b.std(ddof=1)) / math.sqrt(n)
        assert abs(a.mean() - b.mean()) < 3 * se


def test_coupling_needs_positive_lambda(rng):
    with pytest.raises(ValueError):
        monotone_endpoint_coupling(PiecewiseField.constant(0.0, 1.0), ModelParams(1.0, 0.0), rng)


def test_suite_contents():
    suite = dict(increasing_function_suite(2.0))
    plus, minus = Trajectory.constant(1, 2.0), Trajectory.constant(-1, 2.0)
    assert suite["dot_one"](plus) == 2.0
    assert suite["magnetization"](plus) == 1.0 and suite["magnetization"](minus) == -1.0
    assert "ends_plus" in suite and "minus_ends_minus" in suite


@settings(max_examples=1000)
@given(trajectories(), trajectories())
def test_suite_functions_are_increasing(a, b):
    hi = pointwise_max(a, b)
    assert partial_leq(a, hi)
    for name, f in increasing_function_suite(1.0, n_grid=5):
        assert f(a) <= f(hi) + 1e-12, name


def test_field_monotonicity_exact_means():
    # mean of sigma . 1 increases with a constant field shift (oracle from the partition function)
    vals = [mean_dot_one_exact(h, 1.0, 1.0, FREE) for h in np.linspace(-1, 1, 9)]
    assert np.all(np.diff(vals) > 0)
