"""Tail function, equilibrium targets and convergence reports.

``rho(x) = x**alpha (1 - F0*(x))`` decides the long-time behaviour: a finite
positive limit ``c0`` gives the stable law with scale ``a0_from_c0(c0)``, a
zero limit gives the point mass at 0, and a diverging ``rho`` means no limit.
Finite samples only give evidence for the last case.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats

from .mckean import run_ensemble, tree_scales
from .model import ModelParams, symmetrize, unwrap
from .rng import SeededStream
from .stable import StableSpec, a0_from_c0, sample_stable, stable_cf

# relative spread of rho over the top decade above which no limit is claimed
RHO_SPREAD = 0.25
# rho values below this count as zero
RHO_FLOOR = 1e-12
# exceedances kept above the largest probe of an empirical tail
MIN_EXCEEDANCES = 400
CF_XI_MAX = 4.0
CF_POINTS = 161
# stream offset of the reference stable sample, far from ensemble streams
REFERENCE_STREAM = 1 << 48

CONVERGENT = "convergent"
VANISHING = "vanishing"
NOT_CONVERGENT = "not-convergent"


@dataclass
class TailReport:
    alpha: float
    xs: np.ndarray
    rho_values: np.ndarray
    c0_estimate: float | None
    status: str
    method: str

    def to_json(self):
        return {"alpha": self.alpha, "xs": [float(x) for x in self.xs],
                "rho_values": [float(r) for r in self.rho_values],
                "c0_estimate": self.c0_estimate if self.c0_estimate is not None else NOT_CONVERGENT,
                "status": self.status, "method": self.method}


def default_probes(law, alpha=None):
    """Log-spaced probes; empirical laws stop where enough points exceed them."""
    base, _ = unwrap(law)
    if base.has_analytic_tail:
        return np.logspace(0.0, 6.0, 25)
    a = np.sort(np.abs(base.samples))
    a = a[a > 0]
    if a.size < 10 * MIN_EXCEEDANCES:
        hi = a[-1] if a.size else 1.0
        return np.geomspace(hi / 100.0, hi, 13) if hi > 0 else np.array([1.0])
    hi = a[a.size - MIN_EXCEEDANCES]
    return np.geomspace(hi / 100.0, hi, 13)


def _classify(top):
    """(status, c0) from the rho values of the top decade of probes."""
    top = np.where(top < RHO_FLOOR, 0.0, top)
    mean = float(np.mean(top))
    if mean == 0.0:
        return VANISHING, 0.0
    spread = (top.max() - top.min()) / mean
    if spread <= RHO_SPREAD:
        return CONVERGENT, mean
    if np.all(np.diff(top) <= 0.0):
        # monotone decay: the limit is 0, only slowly approached
        return VANISHING, 0.0
    return NOT_CONVERGENT, None


def rho_curve(law, alpha, xs=None):
    """``rho`` at the probes and the estimated tail constant ``c0``."""
    sym = symmetrize(law)
    xs = default_probes(sym) if xs is None else np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValueError("rho_curve needs at least one probe point")
    if np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
        raise ValueError("probe points must be positive and strictly increasing")
    rho = xs ** alpha * np.asarray(sym.tail(xs), dtype=float)
    top = rho[xs >= xs[-1] / 10.0]
    status, c0 = _classify(top)
    method = "analytic" if sym.has_analytic_tail else "empirical"
    return TailReport(float(alpha), xs, rho, c0, status, method)


def empirical_cf(samples, xis):
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("empirical_cf needs at least one sample")
    xis = np.asarray(xis, dtype=float)
    flat = xis.ravel()
    out = np.empty(flat.size, dtype=complex)
    for lo in range(0, flat.size, 16):
        block = flat[lo:lo + 16]
        out[lo:lo + 16] = np.exp(1j * np.outer(block, samples)).mean(axis=1)
    return out.reshape(xis.shape)


def cf_sup_distance(a, b):
    """``max |a - b|`` over a shared grid (arrays or CfGrids)."""
    if hasattr(a, "same_grid"):
        if not a.same_grid(b):
            raise ValueError("CF grids differ")
        a, b = a.values, b.values
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"CF grids differ: {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b)))


def ks_two_sample(x, y):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("both samples must be non-empty")
    res = stats.ks_2samp(x, y, method="asymp")
    return float(res.statistic), float(res.pvalue)


def cf_noise_band(n):
    """Typical sup deviation of an ``n``-sample empirical CF on the window."""
    return 3.0 / math.sqrt(n)


def cf_window(xi_max=CF_XI_MAX, points=CF_POINTS):
    return np.linspace(0.0, xi_max, points)


def iqr(values):
    q1, q3 = np.percentile(values, [25.0, 75.0])
    return float(q3 - q1)


def equilibrium_target(params, law, xs=None):
    """``(StableSpec or None, status, TailReport or None)`` predicted for ``t -> inf``."""
    sym = symmetrize(law)
    if params.elastic:
        m2 = sym.second_moment()
        if not math.isfinite(m2):
            return None, NOT_CONVERGENT, None
        return StableSpec(2.0, m2 / 2.0), CONVERGENT if m2 > 0 else VANISHING, None
    tail = rho_curve(sym, params.alpha, xs)
    if tail.status == NOT_CONVERGENT:
        return None, NOT_CONVERGENT, tail
    return StableSpec(params.alpha, a0_from_c0(tail.c0_estimate, params.alpha)), tail.status, tail


@dataclass
class ConvergenceReport:
    target: StableSpec | None
    verdict: str
    t: float
    sample_size: int
    cf_sup_distance: float | None = None
    ks_statistic: float | None = None
    ks_p_value: float | None = None
    median_abs: float = 0.0
    iqr: float = 0.0
    cap_events: int = 0
    tail: dict | None = None
    extra: dict = field(default_factory=dict)
    # empirical cf on the comparison window (not serialised)
    xis: np.ndarray | None = field(default=None, repr=False)
    cf_values: np.ndarray | None = field(default=None, repr=False)

    @property
    def divergent(self):
        return self.target is None

    def to_json(self):
        out = {"target": self.target.to_json() if self.target else None,
               "verdict": self.verdict, "t": self.t, "sample_size": self.sample_size,
               "cf_sup_distance": self.cf_sup_distance, "ks_statistic": self.ks_statistic,
               "ks_p_value": self.ks_p_value, "median_abs": self.median_abs,
               "iqr": self.iqr, "cap_events": self.cap_events, "tail": self.tail}
        if self.divergent:
            out["note"] = "divergence verdict is finite-sample evidence, not proof"
        out.update(self.extra)
        return out


def equilibrium_check(params, law, t, n, seed, xis=None, ensemble=None):
    """Compare an ensemble at time ``t`` with the predicted equilibrium."""
    target, status, tail = equilibrium_target(params, law)
    if ensemble is None:
        ensemble = run_ensemble(params, law, t, n, seed)
    v = ensemble.values
    report = ConvergenceReport(
        target, "divergent" if target is None else ("degenerate" if target.degenerate else "stable"),
        float(t), int(v.size), median_abs=float(np.median(np.abs(v))), iqr=iqr(v),
        cap_events=ensemble.cap_events, tail=tail.to_json() if tail else None)
    if target is None:
        return report
    xis = cf_window() if xis is None else np.asarray(xis, dtype=float)
    report.xis = xis
    report.cf_values = empirical_cf(v, xis)
    report.cf_sup_distance = cf_sup_distance(report.cf_values, stable_cf(target, xis) + 0j)
    ref = sample_stable(target, v.size, seed, stream_index=REFERENCE_STREAM)
    report.ks_statistic, report.ks_p_value = ks_two_sample(v, ref)
    return report


def equilibrium_ladder(params, law, ts, n, seed):
    """Reports along a time ladder, plus monotonicity and spreading summaries."""
    reports = [equilibrium_check(params, law, t, n, seed) for t in ts]
    summary = {"t": [float(t) for t in ts], "noise_band": cf_noise_band(n)}
    if reports[0].divergent:
        summary["iqr_ratio_last_first"] = reports[-1].iqr / reports[0].iqr \
            if reports[0].iqr > 0 else math.inf
    else:
        d = [r.cf_sup_distance for r in reports]
        summary["cf_sup_distance"] = d
        summary["non_increasing_within_noise"] = bool(
            all(b <= a + 2.0 * cf_noise_band(n) for a, b in zip(d[:-1], d[1:])))
    return reports, summary


def tree_scale_growth(params, t0, t1, n, seed, power):
    """Ratio of mean ``(sum |beta_j|**power)**(1/power)`` between two times.

    For a stable initial law of index ``power`` the velocity given the tree is
    exactly stable with this scale, so the ratio measures spreading without
    any velocity sampling.
    """
    s0 = float(np.mean(tree_scales(params, t0, n, seed, power)))
    s1 = float(np.mean(tree_scales(params, t1, n, seed, power)))
    return s1 / s0, s0, s1


def normalized_sums(law, alpha, m, reps, seed):
    """``reps`` draws of ``m**(-1/alpha) (X_1 + ... + X_m)`` from the symmetrized law."""
    sym = symmetrize(law)
    out = np.empty(reps)
    for r in range(reps):
        out[r] = sym.sample(m, SeededStream(seed, r)).sum()
    return out * m ** (-1.0 / alpha)
