"""End-to-end checks shared by the command line and the acceptance tests.

Each function returns plain rows/dicts; writing them out is left to the caller.
Random streams are derived from the given seed with fixed keys, so the output
does not depend on how tasks are spread over worker processes.
"""
from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .ed import single_site_closed_form
from .estimators import (BatteryReport, censoring_mc_battery, fkg_battery,
                         monotone_field_battery)
from .glauber import GlauberChain, GridSystem, Schedule, censoring_check_exact
from .graph import build_tree, uniform_config
from .sampler import (increasing_function_suite, monotone_endpoint_coupling,
                      sample_site)
from .streams import child_sequence, keyed_generator
from .transfer import FREE, PERIODIC, EndpointCondition, path_kernel_scaled
from .trajectory import ModelParams, PiecewiseField, Trajectory, dot, partial_leq

DEFAULT_POINTS: Tuple[Tuple[float, float], ...] = (
    (0.4, 0.6), (1.0, 1.0), (0.0, 1.0), (-0.5, 0.3), (1.5, 2.0))

DEFAULT_SCHEDULE_PAIRS: Tuple[Tuple[str, str], ...] = (
    ("subtree:1", "full"),
    ("sites:0", "sites:0,1"),
    ("0:sites:1,2;0.75:full", "full"),
)


def _sigma_one(traj: Trajectory) -> float:
    return dot(traj, Trajectory.constant(1, traj.beta))


def closed_form_point(h: float, lam: float, beta: float, n_samples: int, seed) -> dict:
    """Exact periodic single-site draws against ``(h/r) tanh(beta r)``."""
    rng = keyed_generator(seed, 0)
    params = ModelParams(beta, lam, h)
    field = PiecewiseField.constant(h, beta)
    vals = np.fromiter((_sigma_one(sample_site(field, params, PERIODIC, rng)) / beta
                        for _ in range(n_samples)), float, n_samples)
    exact = single_site_closed_form(beta, h, lam)[0]
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples))
    z = (mean - exact) / se if se > 0 else (0.0 if mean == exact else math.inf)
    return {"h": h, "lambda": lam, "exact": exact, "mc": mean, "se": se, "z": z,
            "n_samples": n_samples}


def constant_path_probabilities(field: PiecewiseField, params: ModelParams) -> Tuple[float, float]:
    """``(mu(sigma = + | sigma(beta) = +), mu(sigma = - | sigma(beta) = -))`` from transfer kernels."""
    m, log_scale = path_kernel_scaled(field, params)
    area = field.integral()
    lb = params.lam * field.beta
    p_plus = math.exp(area - lb - log_scale) / (m[0, 0] + m[1, 0])
    p_minus = math.exp(-area - lb - log_scale) / (m[0, 1] + m[1, 1])
    return p_plus, p_minus


def coupling_check(field: PiecewiseField, params: ModelParams, n_samples: int, seed) -> dict:
    """Order, product identity and marginal checks of the endpoint coupling."""
    rng = keyed_generator(seed, 0)
    direct_rng = keyed_generator(seed, 1)
    violations = 0
    both_const = 0
    plus_stats, direct_stats = [], []
    for _ in range(n_samples):
        sp, sm = monotone_endpoint_coupling(field, params, rng)
        if not partial_leq(sm, sp):
            violations += 1
        if sp.is_constant and sp.initial_sign == 1 and sm.is_constant and sm.initial_sign == -1:
            both_const += 1
        plus_stats.append((sp.n_flips, _sigma_one(sp)))
        d = sample_site(field, params, EndpointCondition(end=1), direct_rng)
        direct_stats.append((d.n_flips, _sigma_one(d)))
    pp, pm = constant_path_probabilities(field, params)
    target = pp * pm
    freq = both_const / n_samples
    se = math.sqrt(target * (1 - target) / n_samples)
    rows = []
    a, b = np.asarray(plus_stats, float), np.asarray(direct_stats, float)
    for j, name in enumerate(("n_flips", "sigma_dot_one")):
        diff = float(a[:, j].mean() - b[:, j].mean())
        dse = math.hypot(a[:, j].std(ddof=1), b[:, j].std(ddof=1)) / math.sqrt(n_samples)
        rows.append({"statistic": name, "diff": diff, "se": dse,
                     "z": diff / dse if dse > 0 else 0.0})
    return {"n_samples": n_samples, "order_violations": violations,
            "both_constant_freq": freq, "both_constant_exact": target,
            "both_constant_se": se, "both_constant_z": (freq - target) / se if se > 0 else 0.0,
            "marginal_rows": rows}


def three_piece_field(beta: float, h: float, bump: float = 0.5) -> PiecewiseField:
    """Field ``h`` with an extra ``bump`` on the middle third of ``[0, beta]``."""
    return PiecewiseField((0.0, beta / 3, 2 * beta / 3, beta), (h, h + bump, h))


def order_batteries(beta: float, lam: float, h: float, shift: float, n_samples: int,
                    seed, n_grid: int = 4) -> List[BatteryReport]:
    """FKG and field-monotonicity batteries under free and periodic ends."""
    suite = increasing_function_suite(beta, n_grid)
    params = ModelParams(beta, lam, h)
    low = three_piece_field(beta, h)
    high = low + PiecewiseField.constant(shift, beta)
    reports = []
    for k, (name, bc) in enumerate((("free", FREE), ("periodic", PERIODIC))):
        rng_lo = keyed_generator(seed, k, 0)
        rng_hi = keyed_generator(seed, k, 1)
        s_lo = [sample_site(low, params, bc, rng_lo) for _ in range(n_samples)]
        s_hi = [sample_site(high, params, bc, rng_hi) for _ in range(n_samples)]
        reports.append(fkg_battery(s_lo, suite, label=f"fkg_{name}"))
        reports.append(monotone_field_battery(s_lo, s_hi, suite, label=f"monotone_field_{name}"))
    return reports


def strict_monotonicity_slope(beta: float, lam: float, h: float, shifts: Sequence[float],
                              n_samples: int, seed) -> dict:
    """Mean gain of ``sigma . 1`` per unit of ``(h' - h) . 1``, fitted through the origin."""
    params = ModelParams(beta, lam, h)
    base = PiecewiseField.constant(h, beta)
    rng0 = keyed_generator(seed, 0)
    ref = np.array([_sigma_one(sample_site(base, params, FREE, rng0)) for _ in range(n_samples)])
    rows = []
    for k, s in enumerate(shifts):
        rng = keyed_generator(seed, k + 1)
        f = PiecewiseField.constant(h + s, beta)
        vals = np.array([_sigma_one(sample_site(f, params, FREE, rng)) for _ in range(n_samples)])
        gap = float(vals.mean() - ref.mean())
        se = math.hypot(vals.std(ddof=1), ref.std(ddof=1)) / math.sqrt(n_samples)
        rows.append({"shift_area": s * beta, "gap": gap, "se": se})
    x = np.array([r["shift_area"] for r in rows])
    y = np.array([r["gap"] for r in rows])
    slope = float(x @ y / (x @ x))
    return {"rows": rows, "slope": slope,
            "all_positive": bool(all(r["gap"] > 0 for r in rows))}


def censoring_exact(b: int, depth: int, grid_n: int, params: ModelParams, boundary: str,
                    times: Sequence[float],
                    pairs: Sequence[Tuple[str, str]] = DEFAULT_SCHEDULE_PAIRS) -> List[dict]:
    """Exact censoring comparisons on a grid tree for each schedule pair."""
    tree = build_tree(b, depth, params.beta, boundary)
    system = GridSystem(tree, params, grid_n, periodic=False)
    out = []
    for a_txt, b_txt in pairs:
        sa, sb = Schedule.parse(a_txt, tree), Schedule.parse(b_txt, tree)
        for row in censoring_check_exact(system, sa, sb, times):
            d = dict(row.__dict__)
            d.update({"censored": a_txt, "reference": b_txt})
            out.append(d)
    return out


def censoring_mc(b: int, depth: int, params: ModelParams, boundary: str, censored: str,
                 reference: str, t_end: float, n_replicates: int, seed) -> BatteryReport:
    """Replicated continuum runs from all-plus: censored versus reference schedule."""
    tree = build_tree(b, depth, params.beta, boundary)
    sa, sb = Schedule.parse(censored, tree), Schedule.parse(reference, tree)
    stats: Dict[str, Dict[str, list]] = {"A": {}, "B": {}}
    for tag, sched, sid in (("A", sa, 0), ("B", sb, 1)):
        for r in range(n_replicates):
            chain = GlauberChain(tree, params, uniform_config(tree, 1, params.beta),
                                 child_sequence(seed, sid, r), False, sched)
            chain.advance(t_end)
            vals = {f"sigma_dot_one[{v}]": _sigma_one(chain.config[v]) for v in tree.free}
            vals["total"] = sum(vals.values())
            for k, v in vals.items():
                stats[tag].setdefault(k, []).append(v)
    arr = {tag: {k: np.asarray(v) for k, v in d.items()} for tag, d in stats.items()}
    return censoring_mc_battery(arr["A"], arr["B"])


def battery_verdict(reports: Sequence[BatteryReport]) -> str:
    verdicts = {r.verdict for r in reports}
    if "FAIL" in verdicts:
        return "FAIL"
    return "WARN" if "WARN" in verdicts else "PASS"

