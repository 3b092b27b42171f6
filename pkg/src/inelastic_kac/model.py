"""Model parameters, collision kernels and initial laws."""

from dataclasses import dataclass, field
import math

import mpmath
import numpy as np
from scipy import special, stats

TWO_PI = 2.0 * math.pi

# integer codes understood by the compiled samplers
RADEMACHER, GAUSSIAN, STABLE, PARETO, POINT_MASS, EMPIRICAL = range(6)


def alpha_of(p):
    """Stable index ``2 / (1 + p)`` attached to the inelasticity ``p``."""
    p = float(p)
    if not p >= 0.0:
        raise ValueError(f"inelasticity p must be >= 0, got {p}")
    return 2.0 / (1.0 + p)


@dataclass(frozen=True)
class ModelParams:
    p: float

    def __post_init__(self):
        alpha_of(self.p)
        object.__setattr__(self, "p", float(self.p))

    @property
    def alpha(self):
        return alpha_of(self.p)

    @property
    def elastic(self):
        return self.p == 0.0


def wrap_angle(theta):
    """Map angles into (0, 2pi]; 0 goes to 2pi."""
    theta = np.asarray(theta, dtype=float)
    out = np.mod(theta, TWO_PI)
    return np.where(out == 0.0, TWO_PI, out)


def _signed_power(x, p):
    return x * np.abs(x) ** p


def kernel_cp(p, theta):
    """``cos(theta) * |cos(theta)|**p``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    out = _signed_power(np.cos(wrap_angle(theta)), p)
    return float(out) if np.ndim(out) == 0 else out


def kernel_sp(p, theta):
    """``sin(theta) * |sin(theta)|**p``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    out = _signed_power(np.sin(wrap_angle(theta)), p)
    return float(out) if np.ndim(out) == 0 else out


class InitialLaw:
    """Base class for the supported initial distributions.

    Subclasses provide ``cf`` (complex, hermitian), ``tail`` for the
    symmetrised law where it has a usable closed form, and the data the
    compiled sampler needs.
    """

    name = ""
    symmetric = True

    def cf(self, xi):
        raise NotImplementedError

    def tail(self, x):
        """``1 - F0*(x)`` of the symmetrised law, for ``x > 0``."""
        raise NotImplementedError

    @property
    def has_analytic_tail(self):
        return True

    def second_moment(self):
        """``E X**2`` (``inf`` when it diverges)."""
        raise NotImplementedError

    def sampler_spec(self):
        """``(code, float params, sample table)`` for the compiled samplers."""
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError

    def sample(self, n, stream):
        """``n`` draws of this law from a :class:`SeededStream`."""
        from .mckean import draw_initial
        return draw_initial(self, n, stream, symmetrized=False)


@dataclass(frozen=True)
class Rademacher(InitialLaw):
    v: float = 1.0
    name = "rademacher"

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError("Rademacher needs v > 0")

    def cf(self, xi):
        return np.cos(self.v * np.asarray(xi, dtype=float)) + 0j

    def tail(self, x):
        return np.where(np.asarray(x, dtype=float) < self.v, 0.5, 0.0)

    def second_moment(self):
        return self.v ** 2

    def sampler_spec(self):
        return RADEMACHER, np.array([self.v]), np.zeros(0)

    def to_config(self):
        return {"family": self.name, "v": self.v}


@dataclass(frozen=True)
class Gaussian(InitialLaw):
    sigma: float = 1.0
    name = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Gaussian needs sigma > 0")

    def cf(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-0.5 * (self.sigma * xi) ** 2) + 0j

    def tail(self, x):
        return 0.5 * special.erfc(np.asarray(x, dtype=float) / (self.sigma * math.sqrt(2.0)))

    def second_moment(self):
        return self.sigma ** 2

    def sampler_spec(self):
        return GAUSSIAN, np.array([self.sigma]), np.zeros(0)

    def to_config(self):
        return {"family": self.name, "sigma": self.sigma}


_STABLE_SERIES_FROM = 30.0


def stable_tail_series(z, alpha, terms=60):
    """``P(X > z)`` for cf ``exp(-|xi|**alpha)`` from the large-``z`` expansion.

    ``(1/pi) sum_k (-1)**(k+1) Gamma(k alpha) / k! sin(k pi alpha / 2) z**(-k alpha)``,
    convergent for ``alpha < 1`` and asymptotic otherwise; used for
    ``z**alpha >= 30``, where the terms fall off fast.
    """
    total = 0.0
    for k in range(1, terms + 1):
        size = math.exp(special.gammaln(k * alpha) - special.gammaln(k + 1.0)
                        - k * alpha * math.log(z)) / math.pi
        total += (-1) ** (k + 1) * size * math.sin(0.5 * k * math.pi * alpha)
        if size < 1e-17 * abs(total):
            break
    return total


@dataclass(frozen=True)
class SymmetricStable(InitialLaw):
    """Symmetric stable law with cf ``exp(-a |xi|**alpha0)``."""

    alpha0: float
    a: float = 1.0
    name = "stable"

    def __post_init__(self):
        if not 0.0 < self.alpha0 <= 2.0:
            raise ValueError("stable index must lie in (0, 2]")
        if not self.a >= 0.0:
            raise ValueError("stable scale must be >= 0")

    def cf(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-self.a * np.abs(xi) ** self.alpha0) + 0j

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        if self.a == 0.0:
            return np.zeros_like(x)
        scale = self.a ** (1.0 / self.alpha0)
        if self.alpha0 == 2.0:
            return 0.5 * special.erfc(x / (2.0 * scale))
        z = x / scale
        far = z ** self.alpha0 >= _STABLE_SERIES_FROM
        out = np.empty_like(z)
        # scipy's S1 parametrisation: cf exp(-|scale xi|**alpha) when beta = 0;
        # it underflows to 0 far out for alpha > 1, where the series takes over
        out[~far] = stats.levy_stable.sf(z[~far], self.alpha0, 0.0)
        out[far] = [stable_tail_series(v, self.alpha0) for v in z[far]]
        return out if out.ndim else float(out)

    def tail_constant(self):
        """``lim x**alpha0 (1 - F(x))``."""
        if self.alpha0 == 2.0:
            return 0.0
        return self.a * special.gamma(self.alpha0) * math.sin(math.pi * self.alpha0 / 2) / math.pi

    def second_moment(self):
        if self.a == 0.0:
            return 0.0
        return 2.0 * self.a if self.alpha0 == 2.0 else math.inf

    def sampler_spec(self):
        return STABLE, np.array([self.alpha0, self.a]), np.zeros(0)

    def to_config(self):
        return {"family": self.name, "alpha0": self.alpha0, "a": self.a}


@dataclass(frozen=True)
class SymmetricPareto(InitialLaw):
    """Symmetric law with ``1 - F*(x) = (x / x0)**(-alpha0) / 2`` for ``x >= x0``.

    The uniform core on ``[-x0, x0]`` holds whatever mass the two tails leave;
    with this normalisation that is nothing, so ``|X| = x0 * U**(-1/alpha0)``.
    """

    alpha0: float
    x0: float = 1.0
    name = "pareto"

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("Pareto index must be > 0")
        if not self.x0 > 0:
            raise ValueError("Pareto x0 must be > 0")

    @property
    def core_mass(self):
        return 1.0 - 2.0 * 0.5

    def cf(self, xi):
        xi = np.abs(np.asarray(xi, dtype=float))
        scalar = xi.ndim == 0
        xi = np.atleast_1d(xi)
        out = np.empty(xi.shape, dtype=complex)
        for idx, v in np.ndenumerate(xi):
            out[idx] = self._cf_one(float(v))
        return out[0] if scalar else out

    def _cf_one(self, xi):
        if xi == 0.0:
            return 1.0
        z = xi * self.x0
        core = 0.0
        if self.core_mass > 0:
            core = self.core_mass * math.sin(z) / z
        if self.alpha0 == 1.0:
            # cos z - z (pi/2 - Si(z))
            tail = math.cos(z) - z * (0.5 * math.pi - special.sici(z)[0])
        else:
            tail = float(self.alpha0 * mpmath.re(mpmath.expint(self.alpha0 + 1.0, -1j * z)))
        return core + (1.0 - self.core_mass) * tail

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        inner = 0.5 * (1.0 - self.core_mass * np.minimum(x, self.x0) / self.x0)
        outer = 0.5 * (np.maximum(x, self.x0) / self.x0) ** (-self.alpha0)
        return np.where(x >= self.x0, outer, inner)

    def second_moment(self):
        if self.alpha0 <= 2.0:
            return math.inf
        return self.alpha0 * self.x0 ** 2 / (self.alpha0 - 2.0)

    def sampler_spec(self):
        return PARETO, np.array([self.alpha0, self.x0, self.core_mass]), np.zeros(0)

    def to_config(self):
        return {"family": self.name, "alpha0": self.alpha0, "x0": self.x0}


@dataclass(frozen=True)
class PointMass(InitialLaw):
    x0: float = 0.0
    name = "point"

    @property
    def symmetric(self):
        return self.x0 == 0.0

    def cf(self, xi):
        return np.exp(1j * self.x0 * np.asarray(xi, dtype=float))

    def tail(self, x):
        return np.where(np.asarray(x, dtype=float) < abs(self.x0), 0.5, 0.0)

    def second_moment(self):
        return self.x0 ** 2

    def sampler_spec(self):
        return POINT_MASS, np.array([self.x0]), np.zeros(0)

    def to_config(self):
        return {"family": self.name, "x0": self.x0}


@dataclass(frozen=True, eq=False)
class Empirical(InitialLaw):
    samples: np.ndarray = field(repr=False)
    source: str = ""
    name = "empirical"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if s.size == 0:
            raise ValueError("empirical law needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("empirical samples must be finite")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", ndmin=1, comments="#")
        if data.ndim != 1:
            raise ValueError(f"{path}: expected a single column of numbers")
        return cls(data, source=str(path))

    @property
    def symmetric(self):
        return False

    def cf(self, xi):
        xi = np.asarray(xi, dtype=float)
        flat = xi.ravel()
        out = np.empty(flat.shape, dtype=complex)
        for lo in range(0, flat.size, 64):
            block = flat[lo:lo + 64]
            out[lo:lo + 64] = np.exp(1j * np.outer(block, self.samples)).mean(axis=1)
        return out.reshape(xi.shape)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sort(self.samples)
        n = s.size
        right = n - np.searchsorted(s, x, side="right")
        left = np.searchsorted(s, -x, side="left")
        return 0.5 * (right + left) / n

    @property
    def has_analytic_tail(self):
        return False

    def second_moment(self):
        return float(np.mean(self.samples ** 2))

    def sampler_spec(self):
        return EMPIRICAL, np.zeros(1), np.ascontiguousarray(self.samples)

    def to_config(self):
        return {"family": self.name, "path": self.source}


@dataclass(frozen=True)
class SymmetrizedLaw:
    """The even law ``F0*(x) = (F0(x) + 1 - F0(-x)) / 2`` built from ``base``."""

    base: InitialLaw

    symmetric = True

    def cf(self, xi):
        return np.real(self.base.cf(xi)) + 0j

    def tail(self, x):
        return self.base.tail(x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t = self.base.tail(np.abs(x))
        return np.where(x >= 0, 1.0 - t, t)

    @property
    def has_analytic_tail(self):
        return self.base.has_analytic_tail

    def second_moment(self):
        return self.base.second_moment()

    def sampler_spec(self):
        return self.base.sampler_spec()

    def to_config(self):
        return self.base.to_config()

    @property
    def name(self):
        return self.base.name

    def sample(self, n, stream):
        from .mckean import draw_initial
        return draw_initial(self.base, n, stream, symmetrized=True)


def symmetrize(law):
    if isinstance(law, SymmetrizedLaw):
        return law
    return SymmetrizedLaw(law)


def unwrap(law):
    """``(base law, symmetrized flag)``."""
    if isinstance(law, SymmetrizedLaw):
        return law.base, True
    return law, False


_FAMILIES = {
    "rademacher": (Rademacher, ("v",)),
    "gaussian": (Gaussian, ("sigma",)),
    "stable": (SymmetricStable, ("alpha0", "a")),
    "pareto": (SymmetricPareto, ("alpha0", "x0")),
    "point": (PointMass, ("x0",)),
}


def law_from_config(cfg):
    """Build an initial law from ``{"family": name, **params}``."""
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    if family == "empirical":
        path = cfg.pop("path", None)
        if path is None or cfg:
            raise ValueError("empirical law takes exactly one field: path")
        return Empirical.from_csv(path)
    if family not in _FAMILIES:
        raise ValueError(f"unknown initial law family {family!r}; "
                         f"choose from {sorted(_FAMILIES) + ['empirical']}")
    cls, names = _FAMILIES[family]
    unknown = set(cfg) - set(names)
    if unknown:
        raise ValueError(f"unknown fields for {family}: {sorted(unknown)}")
    return cls(**{k: float(v) for k, v in cfg.items()})
