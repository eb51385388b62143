"""Counter-based deterministic randomness.

Every uniform draw is a pure function of ``(seed, stream, counter, draw)``::

    z = mix64(seed)
    z = mix64(z ^ stream)
    z = mix64(z ^ counter)
    z = mix64(z ^ draw)
    u = (z >> 11) * 2**-53            # uniform in [0, 1)

where ``mix64`` is the SplitMix64 output step (add the golden-ratio
increment, then the two xor-shift-multiply rounds and a final xor-shift).
All arithmetic is modulo 2**64.  Because no state is carried between draws,
rounds can be simulated in any order, split across workers, or recomputed
individually and still produce identical values.  This algorithm is part of
the reproducibility contract and must not change between versions.

Streams in use:

* ``STREAM_ROUNDS``     per-round protocol draws, ``counter`` = round index
* ``STREAM_DISCLOSURE`` check-bit sampling, ``counter`` = candidate position
* ``STREAM_TOEPLITZ``   privacy-amplification matrix bits
"""

from __future__ import annotations

import numpy as np

from ._accel import njit

STREAM_ROUNDS = 0
STREAM_DISCLOSURE = 1
STREAM_TOEPLITZ = 2

# draw indices inside one protocol round
DRAW_ALICE_ACTION = 0
DRAW_BOB_HADAMARD = 1
DRAW_BOB_SECOND = 2  # sigma_z (improved) or reflect/measure (krawec)
DRAW_ALICE_MEASURE = 3
DRAW_ATTACK = 4
DRAW_BOB_MEASURE = 5
DRAW_TP_MEASURE = 6
DRAW_EVE_GUESS = 7

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_MASK64 = (1 << 64) - 1


@njit(cache=True)
def mix64(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def uniform_scalar(seed, stream, counter, draw):
    """One draw; all arguments are ``np.uint64``."""
    z = mix64(seed)
    z = mix64(z ^ stream)
    z = mix64(z ^ counter)
    z = mix64(z ^ draw)
    return float(z >> _S11) * _INV53


def _u64(value: int) -> np.uint64:
    return np.uint64(int(value) & _MASK64)


def uniforms(seed: int, stream: int, counters, draw: int) -> np.ndarray:
    """Vectorized draws for an array of counters (numpy only, no numba)."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64_np(np.full(c.shape, _u64(seed), dtype=np.uint64))
        z = _mix64_np(z ^ _u64(stream))
        z = _mix64_np(z ^ c)
        z = _mix64_np(z ^ _u64(draw))
    return (z >> _S11).astype(np.float64) * _INV53


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


class CounterRNG:
    """Seeded handle on the counter-based generator.

    The object is stateless apart from its seed, so it can be shared freely
    between threads.
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        if int(seed) < 0 or int(seed) > _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)

    def uniform(self, counter: int, draw: int, stream: int = STREAM_ROUNDS) -> float:
        return float(uniforms(self.seed, stream, [counter], draw)[0])

    def uniforms(self, counters, draw: int, stream: int = STREAM_ROUNDS) -> np.ndarray:
        return uniforms(self.seed, stream, counters, draw)

    def bits(self, count: int, stream: int = STREAM_TOEPLITZ) -> np.ndarray:
        return (uniforms(self.seed, stream, np.arange(count), 0) < 0.5).astype(np.uint8)

    def __repr__(self) -> str:
        return f"CounterRNG(seed={self.seed})"
