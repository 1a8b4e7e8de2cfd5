"""Error bars, autocorrelation times, projected TV distances and test batteries.

Also holds the CSV/JSON writers used by the command line, so that every table
is formatted the same way (floats via ``repr``, fixed column order).
"""
from __future__ import annotations

import csv
import io
import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.stats import norm

__all__ = [
    "BatchMeans",
    "Autocorrelation",
    "ProjectedTV",
    "BatteryRow",
    "BatteryReport",
    "batch_mean",
    "integrated_autocorrelation",
    "projected_tv",
    "bonferroni_threshold",
    "fkg_battery",
    "monotone_field_battery",
    "monotone_bc_battery",
    "censoring_mc_battery",
    "csv_text",
    "write_csv",
    "json_text",
    "write_json",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


class BatchMeans(NamedTuple):
    mean: float
    se: float
    n_eff: float
    anticorrelated: bool


def batch_mean(series, n_batches: int = 50) -> BatchMeans:
    """Mean with a batch-means standard error.

    ``n_eff`` is the sample variance divided by the squared SE, i.e. the
    number of independent draws that would give the same error bar.  A value
    above the series length flags anticorrelation.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n_batches < 2 or n < 2 * n_batches:
        raise ValueError("series must hold at least two points per batch")
    m = n // n_batches
    trimmed = x[n - m * n_batches:]
    means = trimmed.reshape(n_batches, m).mean(axis=1)
    mean = float(x.mean())
    se = float(means.std(ddof=1) / math.sqrt(n_batches))
    var = float(x.var(ddof=1))
    if se > 0:
        n_eff = var / se ** 2
    elif var > 0:
        n_eff = math.inf
    else:
        n_eff = float(n)
    return BatchMeans(mean, se, n_eff, bool(n_eff > n))


class Autocorrelation(NamedTuple):
    tau: float      # in units of the sampling interval; iid data give 1/2
    se: float
    window: int
    n: int


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = len(x)
    y = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0]


def integrated_autocorrelation(series, c: float = 6.0, strict: bool = True) -> Autocorrelation:
    """Integrated autocorrelation time ``1/2 + sum_{k=1}^{W} rho_k`` with Sokal's window.

    W is the smallest lag with ``W >= c * tau(W)``.  With this convention an
    iid series has tau = 1/2 and the variance of the mean is ``2 tau var / n``.
    For a continuous-time process sampled every ``dt``, ``dt * tau`` is the
    trapezoid-rule value of the integral of its autocorrelation function.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4 or x.var() == 0:
        raise ValueError("series too short or constant")
    rho = _autocorr(x)
    tau = 0.5
    window = 0
    for w in range(1, n):
        tau += rho[w]
        window = w
        if w >= c * tau:
            break
    se = tau * math.sqrt(2.0 * (2 * window + 1) / n)
    if strict and n < 50 * tau:
        raise ValueError(f"series of length {n} is shorter than 50 tau = {50 * tau:.1f}")
    return Autocorrelation(float(tau), float(se), int(window), n)


# ---------------------------------------------------------------- projected TV

class ProjectedTV(NamedTuple):
    value: float
    ci_low: float
    ci_high: float
    per_projection: Dict[str, float]


def _edges(values: np.ndarray):
    uniq = np.unique(values)
    if len(uniq) <= 50:
        mids = 0.5 * (uniq[1:] + uniq[:-1])
        return np.concatenate([[-np.inf], mids, [np.inf]])
    e = np.histogram_bin_edges(values, bins="fd")
    if len(e) > 201:
        e = np.histogram_bin_edges(values, bins=200)
    e[0], e[-1] = -np.inf, np.inf
    return e


def _hist_tv(a: np.ndarray, b: np.ndarray, edges) -> float:
    ha = np.histogram(a, edges)[0] / len(a)
    hb = np.histogram(b, edges)[0] / len(b)
    return 0.5 * float(np.abs(ha - hb).sum())


def projected_tv(ensemble_a: Sequence, ensemble_b: Sequence,
                 projections: Sequence[Tuple[str, Callable]], seed: int = 0,
                 n_boot: int = 200, n_perm: int = 20, level: float = 0.95) -> ProjectedTV:
    """Lower bound on the TV distance of two laws from samples of each.

    For every projection the empirical TV between histograms is corrected by
    subtracting its mean under random relabelling of the pooled sample (the
    finite-sample bias at equal laws).  The bound is the largest corrected
    value, floored at zero; the interval comes from resampling both
    ensembles.  Since any statistic can only lose information, the true TV is
    at least the TV of every projection.
    """
    if not projections:
        raise ValueError("at least one projection is required")
    na, nb = len(ensemble_a), len(ensemble_b)
    if na < 2 or nb < 2:
        raise ValueError("ensembles need at least two members")
    raw, bias, data = {}, {}, {}
    for name, fn in projections:
        xa = np.array([fn(s) for s in ensemble_a], dtype=float)
        xb = np.array([fn(s) for s in ensemble_b], dtype=float)
        pooled = np.concatenate([xa, xb])
        edges = _edges(pooled)
        raw[name] = _hist_tv(xa, xb, edges)
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        null = []
        for _ in range(n_perm):
            perm = rng.permutation(pooled)
            null.append(_hist_tv(perm[:na], perm[na:], edges))
        bias[name] = float(np.mean(null))
        data[name] = (xa, xb, edges)
    corrected = {k: raw[k] - bias[k] for k in raw}
    value = max(0.0, max(corrected.values()))
    rng = np.random.default_rng([seed, 0x5EED])
    boots = np.empty(n_boot)
    for r in range(n_boot):
        ia = rng.integers(0, na, na)
        ib = rng.integers(0, nb, nb)
        best = 0.0
        for name, (xa, xb, edges) in data.items():
            best = max(best, _hist_tv(xa[ia], xb[ib], edges) - bias[name])
        boots[r] = best
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2])
    return ProjectedTV(value, float(lo), float(hi), corrected)


# ---------------------------------------------------------------- batteries

@dataclass
class BatteryRow:
    statistic: str
    estimate: float
    se: float
    z: float
    verdict: str = ""


@dataclass
class BatteryReport:
    name: str
    rows: List[BatteryRow]
    z_crit: float
    verdict: str

    def as_rows(self):
        return [[self.name, r.statistic, r.estimate, r.se, r.z, r.verdict] for r in self.rows]


def bonferroni_threshold(m: int, sigmas: float = 3.0) -> float:
    """z threshold keeping the family-wise one-sided level of a single ``sigmas`` test."""
    return float(-norm.ppf(norm.cdf(-sigmas) / max(m, 1)))


def _z(est: float, se: float, exact_tol: float = 1e-12) -> float:
    if se > 0:
        return est / se
    return 0.0 if est >= -exact_tol else -math.inf


def _finish(name: str, rows: List[BatteryRow]) -> BatteryReport:
    zc = bonferroni_threshold(len(rows))
    worst = "PASS"
    for r in rows:
        if r.z < -zc:
            r.verdict = "FAIL"
        elif r.z < -2.0:
            r.verdict = "WARN"
        else:
            r.verdict = "PASS"
        if r.verdict == "FAIL" or (r.verdict == "WARN" and worst == "PASS"):
            worst = r.verdict
    return BatteryReport(name, rows, zc, worst)


def _evaluate_suite(samples, suite):
    return {name: np.array([f(s) for s in samples], dtype=float) for name, f in suite}


def fkg_battery(samples: Sequence, suite: Sequence[Tuple[str, Callable]],
                label: str = "fkg") -> BatteryReport:
    """Covariances of every pair of increasing statistics over independent samples.

    A negative covariance beyond the error policy is a violation.
    """
    vals = _evaluate_suite(samples, suite)
    names = [n for n, _ in suite]
    n = len(samples)
    rows = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            f, g = vals[names[i]], vals[names[j]]
            prod = (f - f.mean()) * (g - g.mean())
            cov = float(prod.mean())
            se = float(prod.std(ddof=1) / math.sqrt(n))
            rows.append(BatteryRow(f"cov({names[i]},{names[j]})", cov, se, _z(cov, se)))
    return _finish(label, rows)


def _mean_diff_rows(high: Mapping[str, np.ndarray], low: Mapping[str, np.ndarray],
                    se_fn) -> List[BatteryRow]:
    rows = []
    for name in high:
        mh, sh = se_fn(high[name])
        ml, sl = se_fn(low[name])
        est = mh - ml
        se = math.hypot(sh, sl)
        rows.append(BatteryRow(f"diff({name})", est, se, _z(est, se)))
    return rows


def _iid_mean(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def _batch_mean_se(x):
    bm = batch_mean(x, min(50, len(x) // 2))
    return bm.mean, bm.se


def monotone_field_battery(samples_low: Sequence, samples_high: Sequence,
                           suite: Sequence[Tuple[str, Callable]],
                           label: str = "monotone_field") -> BatteryReport:
    """Independent samples at fields h <= h'; each statistic's mean should not drop."""
    return _finish(label, _mean_diff_rows(_evaluate_suite(samples_high, suite),
                                          _evaluate_suite(samples_low, suite), _iid_mean))


def monotone_bc_battery(series_plus: Mapping[str, np.ndarray],
                        series_minus: Mapping[str, np.ndarray],
                        label: str = "monotone_bc") -> BatteryReport:
    """Equilibrium series under plus and minus boundaries (batch-means SE)."""
    return _finish(label, _mean_diff_rows(series_plus, series_minus, _batch_mean_se))


def censoring_mc_battery(censored: Mapping[str, np.ndarray],
                         uncensored: Mapping[str, np.ndarray],
                         label: str = "censoring_mc") -> BatteryReport:
    """Replicate values of increasing statistics for censored and uncensored runs.

    From the all-plus start the censored law stays above the uncensored one,
    so ``mean(censored) - mean(uncensored)`` should be nonnegative.
    """
    return _finish(label, _mean_diff_rows(censored, uncensored, _iid_mean))


# ---------------------------------------------------------------- writers

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(header, rows))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if hasattr(obj, "_asdict"):
        return _plain(obj._asdict())
    if hasattr(obj, "__dataclass_fields__"):
        return _plain(asdict(obj))
    return obj


def json_text(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(json_text(obj))
