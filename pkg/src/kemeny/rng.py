"""Per-stream random numbers usable from numba kernels.

Every random walk (or spanning-tree sample) draws from its own SplitMix64
stream.  A stream is identified by ``(seed, domain, index)``: the three
integers are hashed into a 64-bit starting state, and the stream then
advances by the golden-ratio Weyl increment, each state being passed
through the SplitMix64 finalizer.  Because a stream depends only on its
identifier, results do not depend on how work is split over threads.

Domains keep streams of different kinds apart::

    WALK_DOMAIN   index = start node          (truncated walks)
    TREE_DOMAIN   index = tree sample number  (Wilson-style sampling)
    ROUND_DOMAIN  index = node * 2**20 + round * 2**16 + walker  (DynamicMC)
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

WALK_DOMAIN = 1
TREE_DOMAIN = 2
ROUND_DOMAIN = 3

_MASK64 = (1 << 64) - 1


@nb.njit(cache=True, inline="always")
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def stream_key(seed, domain, index):
    """Starting state of the stream ``(seed, domain, index)``."""
    z = mix64(np.uint64(seed) + GOLDEN_GAMMA)
    z = mix64(z ^ (np.uint64(domain) * GOLDEN_GAMMA))
    return mix64(z ^ (np.uint64(index) + GOLDEN_GAMMA))


@nb.njit(cache=True, inline="always")
def next_u64(state):
    # states come back to Python as plain ints; re-typing them as int64 would
    # make the shifts below sign-extending, so force unsigned arithmetic
    state = np.uint64(state) + GOLDEN_GAMMA
    return state, mix64(state)


@nb.njit(cache=True, inline="always")
def next_below(state, bound):
    """Uniform integer in ``[0, bound)`` from the top 53 bits."""
    state, z = next_u64(state)
    u = np.float64(z >> _S11) * _INV53
    k = np.int64(u * bound)
    if k >= bound:  # guard against u*bound rounding up
        k = bound - 1
    return state, k


def normalize_seed(seed: int) -> int:
    """Reduce any Python int (negative or > 64 bits) to an unsigned 64-bit seed."""
    return int(seed) & _MASK64


@dataclass
class Stream:
    """A single stream, advanced in place by the functions that consume it."""

    state: np.uint64

    def __setattr__(self, name, value):
        super().__setattr__(name, np.uint64(value) if name == "state" else value)

    @classmethod
    def for_index(cls, seed: int, domain: int, index: int) -> "Stream":
        return cls(stream_key(np.uint64(normalize_seed(seed)), domain, index))

    def below(self, bound: int) -> int:
        self.state, k = next_below(self.state, bound)
        return int(k)
