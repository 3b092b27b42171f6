"""Counter-based random streams.

Every random word is a pure function of ``(seed, stream_index, lane, counter)``::

    key  = mix(mix(seed) ^ mix2(stream_index))
    word = mix(key ^ mix2(counter | lane << 56))

where ``mix`` is the SplitMix64 finaliser and ``mix2`` the MurmurHash3 one.
Both are bijections, so distinct stream indices get distinct keys and, within
a stream, distinct counters give distinct words.  No state is carried between
draws, which makes ensembles bit-identical regardless of how the work is split.
"""

from dataclasses import dataclass

import numba as nb
import numpy as np

_A1 = np.uint64(0xBF58476D1CE4E5B9)
_A2 = np.uint64(0x94D049BB133111EB)
_B1 = np.uint64(0xFF51AFD7ED558CCD)
_B2 = np.uint64(0xC4CEB9FE1A85EC53)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_S33 = np.uint64(33)
_S56 = np.uint64(56)
_LO32 = np.uint64(0xFFFFFFFF)
_INV53 = 1.0 / 9007199254740992.0
_INV32 = 1.0 / 4294967296.0

MASK64 = (1 << 64) - 1
COUNTER_LIMIT = 1 << 56

# lanes partition the counter space of one stream
LANE_SPLIT = 0
LANE_PICK = 1
LANE_LEAF = 2
LANE_NU = 3
LANE_AUX = 4


@nb.njit(inline="always")
def mix(z):
    """SplitMix64 output function."""
    z = (z ^ (z >> _S30)) * _A1
    z = (z ^ (z >> _S27)) * _A2
    return z ^ (z >> _S31)


@nb.njit(inline="always")
def mix2(z):
    z = (z ^ (z >> _S33)) * _B1
    z = (z ^ (z >> _S33)) * _B2
    return z ^ (z >> _S33)


@nb.njit(inline="always")
def stream_key(seed, stream):
    return mix(mix(seed) ^ mix2(stream))


@nb.njit(inline="always")
def word(key, lane, counter):
    return mix(key ^ mix2(counter | (lane << _S56)))


@nb.njit(inline="always")
def u01(w):
    """Uniform on [0, 1) from the top 53 bits."""
    return np.float64(w >> _S11) * _INV53


@nb.njit(inline="always")
def u01_open(w):
    """Uniform on (0, 1], safe under log."""
    return (np.float64(w >> _S11) + 1.0) * _INV53


@nb.njit(inline="always")
def two_signed(w):
    """Two uniforms on [-1, 1) from the 32-bit halves of one word."""
    hi = np.float64(w >> _S32) * _INV32
    lo = np.float64(w & _LO32) * _INV32
    return 2.0 * hi - 1.0, 2.0 * lo - 1.0


@nb.njit(cache=True)
def _words(seed, stream, lane, start, count):
    key = stream_key(seed, stream)
    ln = np.uint64(lane)
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = word(key, ln, np.uint64(start + i))
    return out


@dataclass(frozen=True)
class SeededStream:
    """One independent random stream, named by ``(seed, stream_index)``."""

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if not 0 <= self.stream_index <= MASK64:
            raise ValueError("stream_index must be a nonnegative 64-bit integer")

    def words(self, count, lane=LANE_AUX, start=0):
        if start < 0 or start + count > COUNTER_LIMIT:
            raise ValueError("counter range exceeds 2**56")
        return _words(np.uint64(self.seed), np.uint64(self.stream_index),
                      lane, start, count)

    def uniforms(self, count, lane=LANE_AUX, start=0):
        """``count`` uniforms on [0, 1)."""
        w = self.words(count, lane, start)
        return (w >> np.uint64(11)).astype(np.float64) * _INV53


def splitmix64(state, count):
    """Reference SplitMix64 sequence in pure Python."""
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        out.append(z ^ (z >> 31))
    return out


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return seed
