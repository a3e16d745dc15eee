"""Digraphs in CSR form: loading, LSCC extraction and structural statistics."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numba as nb
import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

EXACT_DIAMETER_LIMIT = 10_000


class EdgeListError(ValueError):
    """Raised for unreadable or empty edge-list files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, eq=False)
class Digraph:
    """Immutable out-adjacency structure.

    Row ``i`` of the transition matrix is uniform over
    ``out_targets[out_offsets[i]:out_offsets[i+1]]``; targets are sorted and
    distinct within each slice.  ``labels[i]`` is the original id of node ``i``.
    """

    out_offsets: np.ndarray
    out_targets: np.ndarray
    labels: np.ndarray | None = None
    _degrees: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        off = np.ascontiguousarray(self.out_offsets, dtype=np.int64)
        tgt = np.ascontiguousarray(self.out_targets, dtype=np.int32)
        off.flags.writeable = False
        tgt.flags.writeable = False
        object.__setattr__(self, "out_offsets", off)
        object.__setattr__(self, "out_targets", tgt)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            lab.flags.writeable = False
            object.__setattr__(self, "labels", lab)
        deg = np.diff(off)
        deg.flags.writeable = False
        object.__setattr__(self, "_degrees", deg)

    @classmethod
    def from_edges(cls, src, dst, n: int | None = None, labels=None) -> "Digraph":
        """Build from parallel arrays of internal ids; duplicates are collapsed."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if n is None:
            n = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
        key = np.unique(src * n + dst)
        src, dst = key // n, key % n
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
        return cls(offsets, dst, labels)

    @property
    def n(self) -> int:
        return len(self.out_offsets) - 1

    @property
    def m(self) -> int:
        return int(self.out_offsets[-1])

    @property
    def out_degree(self) -> np.ndarray:
        return self._degrees

    def successors(self, i: int) -> np.ndarray:
        return self.out_targets[self.out_offsets[i]:self.out_offsets[i + 1]]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degree)
        return src, self.out_targets.astype(np.int64)

    def original_ids(self) -> np.ndarray:
        return self.labels if self.labels is not None else np.arange(self.n)

    def to_scipy(self) -> sp.csr_matrix:
        data = np.ones(self.m, dtype=np.float64)
        return sp.csr_matrix((data, self.out_targets, self.out_offsets), shape=(self.n, self.n))

    def same_structure(self, other: "Digraph") -> bool:
        return (
            np.array_equal(self.out_offsets, other.out_offsets)
            and np.array_equal(self.out_targets, other.out_targets)
            and np.array_equal(self.original_ids(), other.original_ids())
        )

    def __repr__(self) -> str:
        return f"Digraph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class GraphStats:
    d_max: int
    tau: int
    tau_is_estimate: bool
    degree_histogram: np.ndarray

    def to_dict(self) -> dict:
        return {
            "d_max": self.d_max,
            "tau": self.tau,
            "tau_is_estimate": self.tau_is_estimate,
        }


# -- loading -----------------------------------------------------------------

def _split(line: str, fmt: str) -> list[str]:
    if fmt == "csv":
        return next(csv.reader([line]))
    return line.split()


def load_edge_list(path: str | os.PathLike, format: str = "whitespace") -> Digraph:
    """Read ``src dst`` integer pairs; '#' and '%' start comment lines.

    Ids are densely re-indexed in ascending order of the original id.  Extra
    columns (weights, timestamps as in KONECT files) are ignored.
    """
    if format not in ("whitespace", "csv"):
        raise ValueError(f"unknown edge-list format {format!r}")
    src: list[int] = []
    dst: list[int] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line[0] in "#%":
                continue
            parts = _split(line, format)
            if len(parts) < 2:
                raise EdgeListError(f"expected 'src dst', got {line!r}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(f"non-integer node id in {line!r}", lineno) from None
            if u < 0 or v < 0:
                raise EdgeListError(f"negative node id in {line!r}", lineno)
            src.append(u)
            dst.append(v)
    if not src:
        raise EdgeListError(f"{path}: no edges found")
    s = np.asarray(src, dtype=np.int64)
    d = np.asarray(dst, dtype=np.int64)
    labels, inverse = np.unique(np.concatenate([s, d]), return_inverse=True)
    k = len(s)
    return Digraph.from_edges(inverse[:k], inverse[k:], n=len(labels), labels=labels)


def write_edge_list(g: Digraph, path: str | os.PathLike, format: str = "whitespace") -> None:
    sep = "," if format == "csv" else " "
    ids = g.original_ids()
    src, dst = g.edges()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={g.n} m={g.m}\n")
        for u, v in zip(ids[src].tolist(), ids[dst].tolist()):
            fh.write(f"{u}{sep}{v}\n")


# -- connectivity ------------------------------------------------------------

def induced_subgraph(g: Digraph, nodes: np.ndarray) -> Digraph:
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    src, dst = g.edges()
    keep = (remap[src] >= 0) & (remap[dst] >= 0)
    return Digraph.from_edges(
        remap[src[keep]], remap[dst[keep]], n=len(nodes), labels=g.original_ids()[nodes]
    )


def largest_scc(g: Digraph) -> Digraph:
    """Induced subgraph on the largest SCC.

    Ties go to the component whose smallest original id is smallest.
    """
    _, comp = csgraph.connected_components(g.to_scipy(), directed=True, connection="strong")
    sizes = np.bincount(comp)
    ids = g.original_ids()
    best = -1
    best_key = None
    for c in np.flatnonzero(sizes == sizes.max()):
        key = ids[comp == c].min()
        if best_key is None or key < best_key:
            best, best_key = c, key
    nodes = np.flatnonzero(comp == best)
    if len(nodes) == g.n:
        return g
    return induced_subgraph(g, nodes)


def is_strongly_connected(g: Digraph) -> bool:
    """One forward and one reverse BFS sweep from node 0."""
    if g.n == 0:
        return False
    a = g.to_scipy()
    fwd = csgraph.breadth_first_order(a, 0, directed=True, return_predecessors=False)
    rev = csgraph.breadth_first_order(a.T.tocsr(), 0, directed=True, return_predecessors=False)
    return len(fwd) == g.n and len(rev) == g.n


# -- diameter ----------------------------------------------------------------

@nb.njit(cache=True)
def _bfs(offsets, targets, source, dist, queue):
    dist[:] = -1
    dist[source] = 0
    head, tail = 0, 1
    queue[0] = source
    far = source
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        for e in range(offsets[u], offsets[u + 1]):
            v = targets[e]
            if dist[v] < 0:
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
                far = v
    return dist[far], far, tail


@nb.njit(cache=True)
def _all_pairs_max(offsets, targets):
    n = len(offsets) - 1
    dist = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    best = 0
    for s in range(n):
        ecc, _, reached = _bfs(offsets, targets, s, dist, queue)
        if reached < n:
            return -1
        if ecc > best:
            best = ecc
    return best


def _reverse(g: Digraph) -> Digraph:
    src, dst = g.edges()
    return Digraph.from_edges(dst, src, n=g.n)


def diameter(g: Digraph, mode: str = "exact", node_limit: int = EXACT_DIAMETER_LIMIT) -> tuple[int, bool]:
    """Return ``(tau, is_estimate)``.

    ``exact`` runs a BFS from every node.  ``double_sweep_estimate`` alternates
    forward sweeps from the farthest node found so far with reverse sweeps, and
    returns the largest eccentricity seen: a lower bound on the diameter.
    """
    if mode == "exact":
        if g.n > node_limit:
            raise ValueError(
                f"exact diameter refused for n={g.n} > {node_limit}; use double_sweep_estimate"
            )
        tau = _all_pairs_max(g.out_offsets, g.out_targets)
        if tau < 0:
            raise ValueError("diameter is infinite: graph is not strongly connected")
        return int(tau), False
    if mode != "double_sweep_estimate":
        raise ValueError(f"unknown diameter mode {mode!r}")
    rev = _reverse(g)
    dist = np.empty(g.n, np.int64)
    queue = np.empty(g.n, np.int64)
    best = 0
    start = int(np.argmax(g.out_degree))
    for _ in range(4):
        ecc, far, reached = _bfs(g.out_offsets, g.out_targets, start, dist, queue)
        if reached < g.n:
            raise ValueError("diameter is infinite: graph is not strongly connected")
        best = max(best, int(ecc))
        # the node farthest *into* `far` is a good next source
        ecc_r, far_r, _ = _bfs(rev.out_offsets, rev.out_targets, far, dist, queue)
        best = max(best, int(ecc_r))
        start = int(far_r)
    return best, True


def graph_stats(g: Digraph, diameter_mode: str = "auto", node_limit: int = EXACT_DIAMETER_LIMIT) -> GraphStats:
    if diameter_mode == "auto":
        diameter_mode = "exact" if g.n <= node_limit else "double_sweep_estimate"
    tau, est = diameter(g, diameter_mode, node_limit)
    deg = g.out_degree
    return GraphStats(int(deg.max()), tau, est, np.bincount(deg))
