"""Exact sampling of the solution through random McKean trees.

A draw from the solution at time ``t`` is ``V = sum_j beta_j X_j`` where the
number of leaves is geometric with success probability ``exp(-t)``, the tree
grows by splitting a uniformly chosen leaf ``w`` into ``(c_p(theta) w,
s_p(theta) w)`` with ``theta`` uniform on the circle, and the ``X_j`` are
i.i.d. from the initial law.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import math
import os

import numpy as np

from . import _kernels
from .model import kernel_cp, kernel_sp, unwrap
from .rng import LANE_NU, LANE_PICK, LANE_SPLIT, SeededStream, check_seed

TRUNCATION_MASS = 1e-12
# guard on n * E[nu]; above this a run would take hours
MAX_EXPECTED_LEAVES = 5e10
WORKERS_ENV = "KAC_WORKERS"



class CappedDraw(RuntimeError):
    """A geometric draw exceeded the truncation cap."""

    def __init__(self, value, cap):
        super().__init__(f"nu = {value} exceeds cap {cap}")
        self.value = value
        self.cap = cap


class WorkLimitExceeded(RuntimeError):
    pass


def nu_cap(t):
    """Smallest ``N`` with ``P(nu > N) = (1 - e^-t)**N < 1e-12``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 1
    return max(1, math.ceil(math.log(TRUNCATION_MASS) / math.log1p(-math.exp(-t))))


def _geometric(u, log_fail):
    # inversion of P(nu > n) = (1 - q)**n, u in (0, 1]
    return 1.0 + math.floor(math.log(u) / log_fail)


def sample_nu(t, rng, cap=None, attempt=0):
    """Number of leaves of the McKean tree at time ``t``.

    Raises :class:`CappedDraw` when the draw exceeds ``cap`` (default
    :func:`nu_cap`); callers resample with the next ``attempt``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 1
    cap = nu_cap(t) if cap is None else cap
    u = (float(rng.words(1, lane=LANE_NU, start=attempt)[0] >> np.uint64(11)) + 1.0) / 2.0 ** 53
    nu = _geometric(u, math.log1p(-math.exp(-t)))
    if nu > cap:
        raise CappedDraw(int(min(nu, 2 ** 62)), cap)
    return int(nu)


def build_weights(params, thetas, picks):
    """Leaf weights after splitting leaf ``picks[k-1]`` at step ``k``.

    Step ``k`` replaces the entry at 1-based position ``picks[k-1]`` (which
    must lie in ``1..k``) by ``(c_p(theta_k) w, s_p(theta_k) w)``.
    """
    thetas = list(thetas)
    picks = list(picks)
    if len(thetas) != len(picks):
        raise ValueError("thetas and picks must have the same length")
    weights = [1.0]
    for k, (theta, i) in enumerate(zip(thetas, picks), start=1):
        if not (isinstance(i, (int, np.integer)) and 1 <= i <= k):
            raise ValueError(f"pick {i!r} at step {k} is outside 1..{k}")
        old = weights[i - 1]
        weights[i - 1:i] = [kernel_cp(params.p, theta) * old, kernel_sp(params.p, theta) * old]
    return np.array(weights)


def symmetric_tree_picks(m, k):
    """Picks for the complete depth-``m`` tree with ``2k`` extra cherries.

    The extra two-leaf subtrees hang from leaves ``1, 2**m, 2, 2**m - 1, ...,
    k, 2**m - k + 1`` of the complete tree, giving ``2**m + 2k`` leaves.
    """
    if not (isinstance(m, (int, np.integer)) and m >= 1):
        raise ValueError("m must be an integer >= 1")
    if not (isinstance(k, (int, np.integer)) and 0 <= k < 2 ** (m - 1)):
        raise ValueError(f"k must be an integer in 0..{2 ** (m - 1) - 1}")
    picks = []
    for level in range(m):
        # splitting left to right, the j-th original leaf sits at 2j + 1
        picks.extend(2 * j + 1 for j in range(2 ** level))
    n = 2 ** m
    # descending positions so earlier splits do not shift later targets
    targets = sorted([n - i for i in range(k)] + [i + 1 for i in range(k)], reverse=True)
    picks.extend(targets)
    return picks


def leaf_depths(picks):
    """Depth of every leaf of the tree described by ``picks``."""
    depths = [0]
    for i in picks:
        d = depths[i - 1] + 1
        depths[i - 1:i] = [d, d]
    return depths


@dataclass(frozen=True)
class McKeanRealization:
    nu: int
    thetas: np.ndarray
    picks: np.ndarray
    weights: np.ndarray
    cap_events: int = 0

    def __post_init__(self):
        if len(self.weights) != self.nu or len(self.thetas) != self.nu - 1 \
                or len(self.picks) != self.nu - 1:
            raise ValueError("inconsistent realization lengths")

    def alpha_mass(self, alpha):
        return float(np.sum(np.abs(self.weights) ** alpha))


def sample_realization(params, t, rng):
    """One ``(nu, thetas, picks, weights)`` draw, built with :func:`build_weights`."""
    caps = 0
    while True:
        try:
            nu = sample_nu(t, rng, attempt=caps)
            break
        except CappedDraw:
            caps += 1
    steps = nu - 1
    thetas = 2.0 * math.pi * (1.0 - rng.uniforms(steps, lane=LANE_SPLIT))
    u = rng.uniforms(steps, lane=LANE_PICK)
    picks = (np.floor(u * np.arange(1, steps + 1)) + 1).astype(np.int64)
    weights = build_weights(params, thetas, picks.tolist())
    return McKeanRealization(nu, thetas, picks, weights, caps)


# ---------------------------------------------------------------------------
# public sampling API

@dataclass
class Ensemble:
    values: np.ndarray
    seed: int
    t: float
    p: float
    cap_events: int
    leaves: int
    law: dict = field(default_factory=dict)
    symmetrized: bool = False

    @property
    def n(self):
        return int(self.values.size)

    def sidecar(self):
        return {"seed": self.seed, "t": self.t, "p": self.p, "n": self.n,
                "cap_events": self.cap_events, "leaves": self.leaves,
                "law": self.law, "symmetrized": self.symmetrized}


def _log_fail(t):
    return math.log1p(-math.exp(-t)) if t > 0 else -math.inf


def _kernel_setup(params, law, t):
    base, sym = unwrap(law)
    code, prm, table = base.sampler_spec()
    sym = bool(sym and not base.symmetric)
    chunk, _ = _kernels.kernels(code, sym)
    args = (_log_fail(t), float(nu_cap(t)), params.p, _kernels.pow_mode(params.p),
            np.ascontiguousarray(prm, dtype=np.float64),
            np.ascontiguousarray(table, dtype=np.float64))
    return chunk, args


def worker_count():
    """Threads requested through ``KAC_WORKERS``; results never depend on it."""
    raw = os.environ.get(WORKERS_ENV, "")
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    return n


def _chunks(n, parts):
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b - a)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_ensemble(params, law, t, n, seed, start=0, workers=None):
    """``n`` velocity draws from streams ``start .. start + n - 1``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    n = int(n)
    if n < 1:
        raise ValueError("ensemble size must be >= 1")
    seed = check_seed(seed)
    if n * math.exp(min(t, 700.0)) > MAX_EXPECTED_LEAVES:
        raise WorkLimitExceeded(
            f"n * e^t = {n * math.exp(min(t, 700.0)):.3g} leaves exceeds {MAX_EXPECTED_LEAVES:.0e}")
    chunk, args = _kernel_setup(params, law, t)
    workers = worker_count() if workers is None else workers
    pieces = _chunks(n, workers)
    if len(pieces) == 1:
        results = [chunk(np.uint64(seed), start, n, *args)]
    else:
        with ThreadPoolExecutor(len(pieces)) as pool:
            results = list(pool.map(
                lambda pc: chunk(np.uint64(seed), start + pc[0], pc[1], *args), pieces))
    values = np.concatenate([r[0] for r in results])
    base, sym = unwrap(law)
    return Ensemble(values, seed, float(t), params.p,
                    int(sum(r[1] for r in results)), int(sum(r[2] for r in results)),
                    base.to_config(), bool(sym))


def sample_ensemble(params, law, t, n, seed):
    return run_ensemble(params, law, t, n, seed).values


def sample_velocity(params, law, t, rng):
    """One exact draw from the solution at time ``t``."""
    if not isinstance(rng, SeededStream):
        raise TypeError("rng must be a SeededStream")
    ens = run_ensemble(params, law, t, 1, rng.seed, start=rng.stream_index, workers=1)
    return float(ens.values[0])


def tree_scales(params, t, n, seed, power):
    """Per-tree ``(sum_j |beta_j|**power)**(1/power)`` for streams ``0..n-1``."""
    if power <= 0:
        raise ValueError("power must be > 0")
    return _kernels.tree_scale_chunk(np.uint64(check_seed(seed)), 0, int(n), _log_fail(t),
                                     float(nu_cap(t)), params.p,
                                     _kernels.pow_mode(params.p), float(power))


def leaf_counts(t, n, seed, start=0):
    """``(nu, cap events)`` per stream, exactly as the ensemble kernel draws them."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return _kernels.nu_chunk(np.uint64(check_seed(seed)), int(start), int(n), _log_fail(t),
                             float(nu_cap(t)))


def ensemble_tree(params, t, seed, stream_index):
    """Leaf weights that :func:`run_ensemble` uses for one stream."""
    return _kernels.tree_weights(np.uint64(check_seed(seed)), np.uint64(stream_index),
                                 _log_fail(t), float(nu_cap(t)), params.p,
                                 _kernels.pow_mode(params.p))


def draw_initial(law, n, stream, symmetrized=False):
    """``n`` i.i.d. draws of ``law`` using the leaf lane of ``stream``."""
    base, sym = unwrap(law)
    code, prm, table = base.sampler_spec()
    sym = bool((sym or symmetrized) and not base.symmetric)
    _, draw = _kernels.kernels(code, sym)
    return draw(np.uint64(stream.seed), np.uint64(stream.stream_index), int(n),
                np.ascontiguousarray(prm, dtype=np.float64),
                np.ascontiguousarray(table, dtype=np.float64))


def save_ensemble(ens, csv_path, json_path):
    np.savetxt(csv_path, ens.values, fmt="%.17g", header="v", comments="")
    with open(json_path, "w") as fh:
        json.dump(ens.sidecar(), fh, indent=2, sort_keys=True)


def load_ensemble_csv(path):
    return np.loadtxt(path, skiprows=1, ndmin=1)

