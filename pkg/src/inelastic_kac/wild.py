"""Deterministic solution of the equation through truncated Wild sums.

Characteristic functions live on a uniform grid of ``[0, xi_max]``; negative
frequencies follow from hermitian symmetry.  The p-Wild convolution needs the
inputs at ``xi c_p(theta)`` and ``xi s_p(theta)``; since ``|c_p|, |s_p| <= 1``
those points never leave the grid.  Off-node values come from 4-point cubic
Lagrange interpolation.  The real part is interpolated in a power coordinate
``u = |xi|**k`` chosen so that the input is smooth in ``u`` near the origin:
``k = alpha`` for stable-like behaviour ``1 - a|xi|**alpha`` (then
``|xi c_p(theta)|**alpha = u cos(theta)**2``), ``k = 2`` for inputs with a
finite second moment.  The imaginary part, which is odd, is interpolated in
``xi`` itself.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
import math

import numpy as np
from scipy import sparse

from .model import ModelParams, kernel_cp, kernel_sp

TWO_PI = 2.0 * math.pi


class SeriesCapExceeded(RuntimeError):
    def __init__(self, needed, cap, bound):
        super().__init__(f"Wild series needs {needed} terms (cap {cap}); "
                         f"truncating at the cap leaves a remainder bound of {bound:.3g}")
        self.needed = needed
        self.cap = cap
        self.bound = bound


@dataclass(frozen=True)
class SolverConfig:
    grid_size: int = 2049
    xi_max: float = 8.0
    quad_nodes: int = 128
    series_eps: float = 1e-10
    max_terms: int = 400
    # terms per Wild-sum substep; the horizon is split so each substep needs
    # at most this many (set substeps=False for one series over all of t)
    step_terms: int = 16
    substeps: bool = True
    # power of the real-part interpolation coordinate; None picks it per input
    interp_power: float | None = None

    def __post_init__(self):
        if int(self.grid_size) != self.grid_size or self.grid_size < 9:
            raise ValueError("grid_size must be an integer >= 9")
        if not self.xi_max > 0:
            raise ValueError("xi_max must be > 0")
        if int(self.quad_nodes) != self.quad_nodes or self.quad_nodes < 2 or self.quad_nodes % 2:
            raise ValueError("quad_nodes must be a positive even integer")
        if not 0.0 < self.series_eps < 1.0:
            raise ValueError("series_eps must lie in (0, 1)")
        if self.max_terms < 1 or self.step_terms < 2:
            raise ValueError("max_terms must be >= 1 and step_terms >= 2")
        if self.interp_power is not None and not 0.0 < self.interp_power <= 2.0:
            raise ValueError("interp_power must lie in (0, 2]")

    def to_json(self):
        return {"grid_size": self.grid_size, "xi_max": self.xi_max,
                "quad_nodes": self.quad_nodes, "series_eps": self.series_eps,
                "max_terms": self.max_terms, "step_terms": self.step_terms,
                "substeps": self.substeps, "interp_power": self.interp_power}

    @classmethod
    def from_json(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class CfGrid:
    """Characteristic function values on ``linspace(0, xi_max, size)``."""

    xi_max: float
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("CfGrid needs a 1-d array of at least two values")

    @property
    def size(self):
        return self.values.size

    @property
    def nodes(self):
        return np.linspace(0.0, self.xi_max, self.size)

    @classmethod
    def from_function(cls, f, xi_max=8.0, size=2049):
        xi = np.linspace(0.0, xi_max, size)
        return cls(xi_max, np.asarray(f(xi), dtype=complex))

    @classmethod
    def for_law(cls, law, config):
        return cls.from_function(law.cf, config.xi_max, config.grid_size)

    def same_grid(self, other):
        return self.size == other.size and self.xi_max == other.xi_max

    def real_part(self):
        return CfGrid(self.xi_max, self.values.real.astype(complex))

    def violations(self, tol=1e-10, symmetric=False):
        """Names of the grid invariants that fail."""
        bad = []
        if abs(self.values[0] - 1.0) > 1e-12:
            bad.append("value at 0 is not 1")
        if np.max(np.abs(self.values)) > 1.0 + tol:
            bad.append("modulus exceeds 1")
        if symmetric and np.max(np.abs(self.values.imag)) > tol:
            bad.append("imaginary part does not vanish")
        return bad

    def to_csv(self, path):
        data = np.column_stack([self.nodes, self.values.real, self.values.imag])
        np.savetxt(path, data, delimiter=",", header="xi,re,im", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xi = data[:, 0]
        if xi[0] != 0.0 or not np.allclose(np.diff(xi), xi[-1] / (xi.size - 1), rtol=1e-9, atol=0):
            raise ValueError(f"{path}: nodes are not a uniform grid starting at 0")
        return cls(float(xi[-1]), data[:, 1] + 1j * data[:, 2])


# ---------------------------------------------------------------------------
# interpolation and quadrature

def _lagrange_matrix(nodes, targets):
    """Sparse 4-point Lagrange interpolation from ``nodes`` to ``targets``."""
    n = nodes.size
    idx = np.searchsorted(nodes, targets, side="right") - 1
    start = np.clip(idx - 1, 0, n - 4)
    cols = start[:, None] + np.arange(4)[None, :]
    xs = nodes[cols]
    d = targets[:, None] - xs
    w = np.ones_like(xs)
    for a in range(4):
        for b in range(4):
            if a != b:
                w[:, a] *= d[:, b] / (xs[:, a] - xs[:, b])
    rows = np.repeat(np.arange(targets.size), 4)
    return sparse.csr_matrix((w.ravel(), (rows, cols.ravel())), shape=(targets.size, n))


def theta_rule(quad_nodes):
    """Composite Gauss-Legendre nodes and weights on ``(0, 2pi]``.

    Panels end at multiples of pi/2 (pi when ``quad_nodes`` is not a multiple
    of four), where ``c_p`` and ``s_p`` lose smoothness.
    """
    panels = 4 if quad_nodes % 4 == 0 else 2
    x, w = np.polynomial.legendre.leggauss(quad_nodes // panels)
    width = TWO_PI / panels
    theta = np.concatenate([width * (i + 0.5 * (x + 1.0)) for i in range(panels)])
    weight = np.concatenate([0.5 * width * w for _ in range(panels)])
    return theta, weight


class WildOperator:
    """The p-Wild convolution, precomputed for one grid and quadrature."""

    def __init__(self, p, xi_max, size, quad_nodes, power=None):
        self.params = ModelParams(p)
        self.xi_max = float(xi_max)
        self.size = int(size)
        alpha = self.params.alpha
        power = alpha if power is None else float(power)
        self.power = power
        xi = np.linspace(0.0, xi_max, size)
        theta, weight = theta_rule(quad_nodes)
        self.weights = weight / TWO_PI
        self.shape = (size, theta.size)
        self._xi = xi
        self._u = xi ** power
        c = kernel_cp(p, theta)
        s = kernel_sp(p, theta)
        self._factors = {"c": c, "s": s}
        if power == alpha:
            # |c_p|**alpha = cos**2 and |s_p|**alpha = sin**2 exactly
            fc, fs = np.cos(theta) ** 2, np.sin(theta) ** 2
        else:
            fc, fs = np.abs(c) ** power, np.abs(s) ** power
        self._real = {
            "c": _lagrange_matrix(self._u, np.outer(self._u, fc).ravel()),
            "s": _lagrange_matrix(self._u, np.outer(self._u, fs).ravel()),
        }
        self._imag = {}

    def _imag_matrix(self, which):
        if which not in self._imag:
            f = np.abs(self._factors[which])
            self._imag[which] = _lagrange_matrix(self._xi, np.outer(self._xi, f).ravel())
        return self._imag[which]

    def gather(self, values, which):
        """``g(xi_i * factor(theta_k))`` as an ``(size, quad)`` array."""
        values = np.asarray(values)
        out = (self._real[which] @ values.real).reshape(self.shape).astype(complex)
        if np.any(values.imag != 0.0):
            im = (self._imag_matrix(which) @ values.imag).reshape(self.shape)
            out += 1j * np.sign(self._factors[which])[None, :] * im
        return out

    def combine(self, a, b):
        return (a * b) @ self.weights

    def convolve(self, v1, v2):
        return self.combine(self.gather(v1, "c"), self.gather(v2, "s"))


@lru_cache(maxsize=8)
def wild_operator(p, xi_max, size, quad_nodes, power=None):
    return WildOperator(p, xi_max, size, quad_nodes, power)


def small_xi_exponent(values):
    """Exponent ``k`` in ``1 - Re phi(xi) ~ C xi**k``, from the first nodes."""
    r1 = 1.0 - values[1].real
    r2 = 1.0 - values[2].real
    if not (r1 > 0.0 and r2 > 0.0):
        return math.nan
    return math.log2(r2 / r1)


def interpolation_power(params, *grids):
    """2 when every input looks quadratic at the origin, else alpha."""
    alpha = params.alpha
    for g in grids:
        k = small_xi_exponent(g.values)
        if not k > 0.5 * (alpha + 2.0):
            return alpha
    return 2.0


def _operator(params, config, *grids):
    g = grids[0]
    power = config.interp_power
    if power is None:
        power = interpolation_power(params, *grids)
    return wild_operator(params.p, g.xi_max, g.size, config.quad_nodes, power)


# ---------------------------------------------------------------------------
# public operations

def p_wild_convolution(g1, g2, params, config=SolverConfig()):
    if not g1.same_grid(g2):
        raise ValueError("p-Wild convolution needs both inputs on the same grid")
    op = _operator(params, config, g1, g2)
    return CfGrid(g1.xi_max, op.convolve(g1.values, g2.values))


def _wild_values(values, op, count):
    """``[q_1, ..., q_count]`` as value arrays, by the quadratic recursion."""
    q = [np.asarray(values, dtype=complex)]
    a = [op.gather(q[0], "c")]
    b = [op.gather(q[0], "s")]
    for n in range(2, count + 1):
        acc = np.zeros(op.size, dtype=complex)
        for j in range(1, n):
            acc += op.combine(a[n - j - 1], b[j - 1])
        q.append(acc / (n - 1))
        if n < count:
            a.append(op.gather(q[-1], "c"))
            b.append(op.gather(q[-1], "s"))
    return q


def wild_terms(phi0, params, config=SolverConfig(), N=1):
    """``[q_1, ..., q_N]`` with ``q_1 = phi0``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    op = _operator(params, config, phi0)
    return [CfGrid(phi0.xi_max, v) for v in _wild_values(phi0.values, op, N)]


def terms_needed(t, eps):
    """Smallest ``N`` with ``(1 - e^-t)**N < eps``."""
    if t == 0:
        return 1
    return max(1, math.ceil(math.log(eps) / math.log1p(-math.exp(-t))))


def plan_steps(t, config):
    """``(substeps, terms per substep, remainder bound per substep)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0, 1, 0.0
    needed = terms_needed(t, config.series_eps)
    if not config.substeps or needed <= config.step_terms:
        if needed > config.max_terms:
            bound = (-math.expm1(-t)) ** config.max_terms
            raise SeriesCapExceeded(needed, config.max_terms, bound)
        return 1, needed, (-math.expm1(-t)) ** needed
    # largest step whose series fits in step_terms terms
    limit = -math.log1p(-config.series_eps ** (1.0 / config.step_terms))
    steps = math.ceil(t / limit)
    dt = t / steps
    terms = terms_needed(dt, config.series_eps)
    return steps, terms, (-math.expm1(-dt)) ** terms


def _wild_step(values, op, dt, terms):
    q = _wild_values(values, op, terms)
    n = np.arange(terms)
    w = math.exp(-dt) * (-math.expm1(-dt)) ** n
    # conditional weights given nu <= terms; keeps phi(0) = 1 exactly
    w = w / w.sum()
    return sum(wk * qk for wk, qk in zip(w, q))


def solve_cf(phi0, params, t, config=SolverConfig()):
    """Truncated Wild sum for the solution at time ``t``.

    When the series over the whole horizon would need more than
    ``config.step_terms`` terms, the horizon is cut into equal substeps and
    the Wild sum is applied repeatedly, each output serving as the next
    initial datum.
    """
    steps, terms, bound = plan_steps(t, config)
    power = None
    if steps == 0:
        out = CfGrid(phi0.xi_max, phi0.values.copy())
    else:
        op = _operator(params, config, phi0)
        power = op.power
        dt = t / steps
        values = phi0.values
        for _ in range(steps):
            values = _wild_step(values, op, dt, terms)
            # q_n(0) = phi(0)**n amplifies rounding at the origin by e^dt per
            # step; the exact solution keeps phi(0) = 1
            values = values / values[0].real
        out = CfGrid(phi0.xi_max, values)
    out.meta = {"t": t, "p": params.p, "substeps": steps, "terms": terms,
                "remainder_bound": bound, "interp_power": power, "config": config.to_json()}
    return out


def solve_cf_asymmetric(phi0_full, params, t, config=SolverConfig()):
    """``i e^-t Im(phi0) + solve_cf(Re(phi0))``."""
    sym = solve_cf(phi0_full.real_part(), params, t, config)
    out = CfGrid(phi0_full.xi_max, sym.values + 1j * math.exp(-t) * phi0_full.values.imag)
    out.meta = dict(sym.meta, decomposition="real-part solve plus damped imaginary part")
    return out


def fixed_point_residual(phi, params, config=SolverConfig()):
    """``max_i |(phi . phi)(xi_i) - phi(xi_i)|``."""
    conv = p_wild_convolution(phi, phi, params, config)
    return float(np.max(np.abs(conv.values - phi.values)))


def refined(config):
    """The same configuration with doubled grid and quadrature resolution."""
    return replace(config, grid_size=2 * config.grid_size - 1, quad_nodes=2 * config.quad_nodes)
