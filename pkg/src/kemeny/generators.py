"""Small graph families used as fixtures, examples and benchmark inputs."""
from __future__ import annotations

import numpy as np

from .graph import Digraph, largest_scc


def directed_cycle(n: int) -> Digraph:
    i = np.arange(n)
    return Digraph.from_edges(i, (i + 1) % n, n=n)


def cycle_with_chord(n: int, chord: tuple[int, int] | None = None) -> Digraph:
    """Directed n-cycle plus one chord; the default chord 0 -> 2 makes it aperiodic."""
    i = np.arange(n)
    u, v = chord if chord is not None else (0, 2 % n)
    return Digraph.from_edges(np.append(i, u), np.append((i + 1) % n, v), n=n)


def complete_bidirectional(n: int) -> Digraph:
    u, v = np.nonzero(~np.eye(n, dtype=bool))
    return Digraph.from_edges(u, v, n=n)


def self_loop() -> Digraph:
    return Digraph.from_edges([0], [0], n=1)


def random_k_out(n: int, k: int, seed: int, lscc: bool = True) -> Digraph:
    """Every node picks ``k`` distinct uniform out-neighbours (no self-loops)."""
    rng = np.random.default_rng(seed)
    # draw from n-1 candidates and shift past the node itself
    picks = np.empty((n, k), dtype=np.int64)
    for c in range(k):
        picks[:, c] = rng.integers(0, n - 1, size=n)
    picks += picks >= np.arange(n)[:, None]
    g = Digraph.from_edges(np.repeat(np.arange(n), k), picks.ravel(), n=n)
    return largest_scc(g) if lscc else g


def random_strongly_connected(n: int, p: float, seed: int) -> Digraph:
    """A random Hamiltonian cycle plus each other ordered pair with probability ``p``."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    src = [perm]
    dst = [np.roll(perm, -1)]
    extra = rng.random((n, n)) < p
    np.fill_diagonal(extra, False)
    u, v = np.nonzero(extra)
    src.append(u)
    dst.append(v)
    return Digraph.from_edges(np.concatenate(src), np.concatenate(dst), n=n)


def two_cliques(k: int = 4) -> Digraph:
    """Two bidirectional K_k joined by bridges 0<->k and 1<->k+1."""
    edges = []
    for off in (0, k):
        edges += [(off + a, off + b) for a in range(k) for b in range(k) if a != b]
    edges += [(0, k), (k, 0), (1, k + 1), (k + 1, 1)]
    u, v = zip(*edges)
    return Digraph.from_edges(u, v, n=2 * k)


def preferential_digraph(n: int, k: int, seed: int, lscc: bool = True) -> Digraph:
    """Directed graph with hubs: node i links to k earlier nodes chosen by in-degree,
    and every node gets one back edge to a uniform earlier node so the LSCC is large."""
    rng = np.random.default_rng(seed)
    src, dst = [], []
    indeg = np.ones(n)
    for i in range(1, n):
        w = indeg[:i] / indeg[:i].sum()
        t = rng.choice(i, size=min(k, i), replace=False, p=w)
        src += [i] * len(t)
        dst += t.tolist()
        indeg[t] += 1
        j = int(rng.integers(0, i))
        src.append(j)
        dst.append(i)
    g = Digraph.from_edges(src, dst, n=n)
    return largest_scc(g) if lscc else g
