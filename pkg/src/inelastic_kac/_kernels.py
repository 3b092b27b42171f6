"""Compiled tree-growing and leaf-sampling kernels.

One kernel is compiled per initial-law family so the leaf sampler is a
compile-time constant inside the hot loop.  Random words come from
:mod:`inelastic_kac.rng` lanes:

* ``LANE_NU``     attempt ``a`` -> geometric draw for the leaf count
* ``LANE_SPLIT``  ``k | r << 40`` -> rotation at split ``k``, rejection round ``r``
* ``LANE_PICK``   ``k`` -> which of the ``k`` current leaves splits
* ``LANE_LEAF``   ``2j, 2j + 1`` -> the initial-law draw on leaf ``j``
  (Rademacher signs are packed 64 per word at counter ``j >> 6``)
"""

import math

import numba as nb
import numpy as np

from . import model
from .rng import LANE_LEAF, LANE_NU, LANE_PICK, LANE_SPLIT, stream_key, word

_INV32 = 1.0 / 4294967296.0
_INV53 = 1.0 / 9007199254740992.0
_S11 = np.uint64(11)
_S32 = np.uint64(32)
_S40 = np.uint64(40)
_S63 = np.uint64(63)
_LO32 = np.uint64(0xFFFFFFFF)
_ONE = np.uint64(1)
_M63 = np.uint64(63)
_S6 = np.uint64(6)


@nb.njit(inline="always")
def _uniform(w):
    # [0, 1); the shifted word fits in int64, whose float conversion is cheap
    return np.float64(np.int64(w >> _S11)) * _INV53


@nb.njit(inline="always")
def _uniform_open(w):
    return (np.float64(np.int64(w >> _S11)) + 1.0) * _INV53


@nb.njit(inline="always")
def _uniform_mid(w):
    return (np.float64(np.int64(w >> _S11)) + 0.5) * _INV53


@nb.njit(inline="always")
def rotation(key, k):
    """``(cos, sin)`` of a uniform angle, without trigonometric calls.

    A uniform point of the unit disc has a uniform polar angle ``phi``; the
    returned pair is ``(cos 2phi, sin 2phi)``, also uniform on the circle.
    """
    ln = np.uint64(LANE_SPLIT)
    r = np.uint64(0)
    while True:
        w = word(key, ln, np.uint64(k) | (r << _S40))
        x = 2.0 * np.float64(np.int64(w >> _S32)) * _INV32 - 1.0
        y = 2.0 * np.float64(np.int64(w & _LO32)) * _INV32 - 1.0
        rr = x * x + y * y
        if rr > 0.0 and rr < 1.0:
            inv = 1.0 / rr
            return (x * x - y * y) * inv, 2.0 * x * y * inv
        r += _ONE


@nb.njit(inline="always")
def abs_pow(x, p, mode):
    # mode 0: p == 0, 1: small integer p, 2: p == 1/2, 3: general
    if mode == 0:
        return 1.0
    if mode == 1:
        r = x
        for _ in range(int(p) - 1):
            r *= x
        return r
    if mode == 2:
        return math.sqrt(x)
    return x ** p


def pow_mode(p):
    if p == 0.0:
        return 0
    if p == int(p) and p <= 16:
        return 1
    if p == 0.5:
        return 2
    return 3


@nb.njit(inline="always")
def draw_nu(key, log_fail, ncap):
    """Geometric leaf count, resampled while above ``ncap``; returns (nu, caps)."""
    if math.isinf(log_fail):
        return 1, 0
    ln = np.uint64(LANE_NU)
    caps = 0
    while True:
        u = _uniform_open(word(key, ln, np.uint64(caps)))
        g = 1.0 + math.floor(math.log(u) / log_fail)
        if g <= ncap:
            return int(g), caps
        caps += 1


@nb.njit(inline="always")
def grow_tree(key, nu, p, pmode, buf):
    """Unordered leaf weights of a tree with ``nu`` leaves, written to ``buf``."""
    buf[0] = 1.0
    lp = np.uint64(LANE_PICK)
    for k in range(1, nu):
        c, s = rotation(key, k)
        if pmode != 0:
            c = c * abs_pow(abs(c), p, pmode)
            s = s * abs_pow(abs(s), p, pmode)
        i = int(_uniform(word(key, lp, np.uint64(k))) * k)
        old = buf[i]
        buf[i] = c * old
        buf[k] = s * old


@nb.njit(inline="always")
def stable_standard(alpha, u, e):
    """Chambers-Mallows-Stuck map to cf ``exp(-|xi|**alpha)``."""
    if alpha == 1.0:
        return math.tan(u)
    if alpha == 2.0:
        return 2.0 * math.sin(u) * math.sqrt(e)
    return (math.sin(alpha * u) / math.cos(u) ** (1.0 / alpha)
            * (math.cos((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha))


def _leaf_function(code, sym):
    """Compiled ``leaf(key, j, prm, table) -> X_j`` for one law family."""
    lane = np.uint64(LANE_LEAF)

    if code == model.RADEMACHER:
        @nb.njit(inline="always")
        def leaf(key, j, prm, table):
            w = word(key, lane, np.uint64(j) >> _S6)
            bit = (w >> (np.uint64(j) & _M63)) & _ONE
            return -prm[0] if bit else prm[0]

    elif code == model.GAUSSIAN:
        @nb.njit(inline="always")
        def leaf(key, j, prm, table):
            w1 = word(key, lane, np.uint64(2 * j))
            w2 = word(key, lane, np.uint64(2 * j + 1))
            r = math.sqrt(-2.0 * math.log(_uniform_open(w1)))
            return prm[0] * r * math.cos(2.0 * math.pi * _uniform(w2))

    elif code == model.STABLE:
        @nb.njit(inline="always")
        def leaf(key, j, prm, table):
            if prm[1] == 0.0:
                return 0.0
            w1 = word(key, lane, np.uint64(2 * j))
            w2 = word(key, lane, np.uint64(2 * j + 1))
            u = math.pi * (_uniform_mid(w1) - 0.5)
            e = -math.log(_uniform_mid(w2))
            return prm[1] ** (1.0 / prm[0]) * stable_standard(prm[0], u, e)

    elif code == model.PARETO:
        @nb.njit(inline="always")
        def leaf(key, j, prm, table):
            w1 = word(key, lane, np.uint64(2 * j))
            w2 = word(key, lane, np.uint64(2 * j + 1))
            sign = 1.0 if (w2 >> _S63) == 0 else -1.0
            u = _uniform_open(w1)
            core = prm[2]
            if u <= core:
                return sign * prm[1] * u / core
            v = (u - core) / (1.0 - core)
            if prm[0] == 1.0:
                return sign * prm[1] / v
            return sign * prm[1] * v ** (-1.0 / prm[0])

    elif code == model.POINT_MASS:
        if sym:
            @nb.njit(inline="always")
            def leaf(key, j, prm, table):
                w = word(key, lane, np.uint64(j) >> _S6)
                bit = (w >> (np.uint64(j) & _M63)) & _ONE
                return -prm[0] if bit else prm[0]
        else:
            @nb.njit(inline="always")
            def leaf(key, j, prm, table):
                return prm[0]

    elif code == model.EMPIRICAL:
        @nb.njit(inline="always")
        def leaf(key, j, prm, table):
            w1 = word(key, lane, np.uint64(2 * j))
            x = table[int(_uniform(w1) * table.shape[0])]
            if sym:
                w2 = word(key, lane, np.uint64(2 * j + 1))
                if (w2 >> _S63) != 0:
                    x = -x
            return x

    else:
        raise ValueError(f"unknown law code {code}")
    return leaf


_CACHE = {}


def kernels(code, sym):
    """``(ensemble_chunk, draw_leaves)`` compiled for one law family."""
    sym = bool(sym)
    if (code, sym) in _CACHE:
        return _CACHE[code, sym]
    leaf = _leaf_function(code, sym)

    @nb.njit(nogil=True)
    def ensemble_chunk(seed, start, count, log_fail, ncap, p, pmode, prm, table):
        out = np.empty(count)
        caps = 0
        leaves = 0
        buf = np.empty(1024)
        for i in range(count):
            key = stream_key(seed, np.uint64(start + i))
            nu, c = draw_nu(key, log_fail, ncap)
            if buf.shape[0] < nu:
                buf = np.empty(max(nu, 2 * buf.shape[0]))
            grow_tree(key, nu, p, pmode, buf)
            v = 0.0
            for j in range(nu):
                v += buf[j] * leaf(key, j, prm, table)
            out[i] = v
            caps += c
            leaves += nu
        return out, caps, leaves

    @nb.njit(nogil=True)
    def draw_leaves(seed, stream, n, prm, table):
        key = stream_key(seed, stream)
        out = np.empty(n)
        for j in range(n):
            out[j] = leaf(key, j, prm, table)
        return out

    _CACHE[code, sym] = (ensemble_chunk, draw_leaves)
    return _CACHE[code, sym]


@nb.njit(nogil=True, cache=True)
def tree_scale_chunk(seed, start, count, log_fail, ncap, p, pmode, power):
    """``(sum_j |beta_j|**power)**(1/power)`` per stream, from the same trees."""
    out = np.empty(count)
    buf = np.empty(1024)
    for i in range(count):
        key = stream_key(seed, np.uint64(start + i))
        nu, c = draw_nu(key, log_fail, ncap)
        if buf.shape[0] < nu:
            buf = np.empty(max(nu, 2 * buf.shape[0]))
        grow_tree(key, nu, p, pmode, buf)
        acc = 0.0
        for j in range(nu):
            acc += abs(buf[j]) ** power
        out[i] = acc ** (1.0 / power)
    return out


@nb.njit(nogil=True, cache=True)
def tree_weights(seed, stream, log_fail, ncap, p, pmode):
    """Leaf weights of one stream's tree, as used by the ensemble kernel."""
    key = stream_key(seed, stream)
    nu, c = draw_nu(key, log_fail, ncap)
    buf = np.empty(nu)
    grow_tree(key, nu, p, pmode, buf)
    return buf


@nb.njit(nogil=True, cache=True)
def nu_chunk(seed, start, count, log_fail, ncap):
    """Leaf counts and cap events of streams ``start .. start + count - 1``."""
    nus = np.empty(count, dtype=np.int64)
    caps = np.empty(count, dtype=np.int64)
    for i in range(count):
        key = stream_key(seed, np.uint64(start + i))
        nus[i], caps[i] = draw_nu(key, log_fail, ncap)
    return nus, caps
