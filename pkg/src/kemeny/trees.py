"""Incoming spanning-tree sampling and the TreeMC estimator.

For any root ``s``, ``K = trace((I - P_{-s})^{-1}) - Phi(s)``.  The trace is
estimated from passage counts of Wilson-style loop-erased walks absorbed at
``s``: the number of times node ``i`` is visited before it joins the tree has
mean ``(I - P_{-s})^{-1}[i, i]``.  ``Phi(s) = F[s, s] / pi[s]`` comes from
truncated walks started at ``s``:

    F[s, s] ~ sum_{k=0}^{l} (P^k[s, s] - pi[s]) = 1 + E[returns] - (l + 1) pi[s]

so ``Phi(s) ~ (1 + t_s) / pi[s] - (l + 1)``.  The "as-printed" combination
drops the ``(l + 1)`` term; "corrected" keeps it.
"""
from __future__ import annotations

import math
import time

import numba as nb
import numpy as np

from .config import CapExhausted, EstimateReport, EstimatorConfig, TreeSampleStats, WalkStats
from .graph import Digraph, GraphStats
from .rng import TREE_DOMAIN, Stream, next_below, normalize_seed, stream_key
from .spectral import SpectralError, SpectralInfo
from .walks import _cap, set_threads, simulate_from_nodes


class TruncationDomainError(ValueError):
    """The diameter-based length formula is undefined for this graph."""


# -- kernels -----------------------------------------------------------------

@nb.njit(cache=True)
def _sample_tree(offsets, targets, s, state, nxt, in_tree, stamp, passages):
    """One in-tree rooted at ``s``.

    ``in_tree[i] == stamp`` marks tree membership, so the buffer never needs
    clearing between samples.  ``passages`` is incremented in place.
    """
    n = len(offsets) - 1
    in_tree[s] = stamp
    nxt[s] = -1
    steps = 0
    for u in range(n):
        i = u
        while in_tree[i] != stamp:
            passages[i] += 1
            lo = offsets[i]
            state, k = next_below(state, offsets[i + 1] - lo)
            nxt[i] = targets[lo + k]
            i = nxt[i]
            steps += 1
        i = u
        while in_tree[i] != stamp:
            in_tree[i] = stamp
            i = nxt[i]
    return state, steps


@nb.njit(cache=True, parallel=True)
def _sample_trees(offsets, targets, s, r, seed, nchunks):
    n = len(offsets) - 1
    sums = np.zeros((nchunks, n), np.int64)
    sumsq = np.zeros((nchunks, n), np.int64)
    steps = np.zeros(nchunks, np.int64)
    for c in nb.prange(nchunks):
        lo = c * r // nchunks
        hi = (c + 1) * r // nchunks
        nxt = np.empty(n, np.int64)
        in_tree = np.zeros(n, np.int64)
        p = np.zeros(n, np.int64)
        for j in range(lo, hi):
            state = stream_key(seed, TREE_DOMAIN, j)
            state, st = _sample_tree(offsets, targets, s, state, nxt, in_tree, j + 1, p)
            steps[c] += st
            for i in range(n):
                sums[c, i] += p[i]
                sumsq[c, i] += p[i] * p[i]
                p[i] = 0
    return sums.sum(axis=0), sumsq.sum(axis=0), steps.sum()


# -- sampling API ------------------------------------------------------------

def select_root(pi: np.ndarray) -> int:
    """Node with the largest stationary probability; ties go to the smallest index."""
    return int(np.argmax(pi))


def sample_in_tree(g: Digraph, s: int, stream: Stream) -> tuple[np.ndarray, np.ndarray]:
    """One incoming spanning tree rooted at ``s``.

    Returns ``(parent, passages)``; ``parent[s] == -1`` and ``passages[s] == 0``.
    """
    nxt = np.empty(g.n, np.int64)
    in_tree = np.zeros(g.n, np.int64)
    passages = np.zeros(g.n, np.int64)
    stream.state, _ = _sample_tree(g.out_offsets, g.out_targets, s, stream.state, nxt, in_tree, 1, passages)
    return nxt, passages


def tree_stream(seed: int, j: int) -> Stream:
    """The stream used for tree sample ``j`` by :func:`tree_trace_estimate`."""
    return Stream.for_index(seed, TREE_DOMAIN, j)


def verify_in_tree(g: Digraph, parent: np.ndarray, s: int) -> bool:
    """n-1 edges of g, every non-root node following parents reaches ``s`` without a cycle."""
    n = g.n
    if parent[s] != -1:
        return False
    for i in range(n):
        if i == s:
            continue
        p = int(parent[i])
        if not 0 <= p < n:
            return False
        succ = g.successors(i)
        k = np.searchsorted(succ, p)
        if k >= len(succ) or succ[k] != p:
            return False
    state = np.zeros(n, np.int8)  # 0 unknown, 1 on current path, 2 reaches s
    state[s] = 2
    for i in range(n):
        path = []
        v = i
        while state[v] == 0:
            state[v] = 1
            path.append(v)
            v = int(parent[v])
        if state[v] == 1:
            return False
        for u in path:
            state[u] = 2
    return True


def tree_trace_estimate(g: Digraph, s: int, r: int, seed: int, threads: int = 1) -> TreeSampleStats:
    """Passage statistics over ``r`` sampled in-trees; ``.trace`` estimates
    ``trace((I - P_{-s})^{-1})`` without bias."""
    if r < 1:
        raise ValueError("r must be >= 1")
    eff = set_threads(threads)
    nchunks = max(1, min(r, 4 * eff))
    sums, sumsq, steps = _sample_trees(
        g.out_offsets, g.out_targets, int(s), int(r), np.uint64(normalize_seed(seed)), nchunks
    )
    return TreeSampleStats(int(s), int(r), sums, sumsq, int(steps))


# -- sample sizes and truncation lengths --------------------------------------

def diag_trunc_len_raw(n: int, epsilon: float, tau: int, d_max: int) -> float:
    """Diameter-based walk length for one diagonal entry of F (may be ``inf``).

    ``ceil(tau * log(n eps / (2 tau) * d^-tau) / log(1 - n d^-tau)) + tau - 1``,
    defined only when ``0 < n d^-tau < 1``.
    """
    tau = max(int(tau), 1)
    log_x = math.log(n) - tau * math.log(d_max) if d_max > 1 else math.log(n)
    if log_x >= 0.0:
        raise TruncationDomainError(
            f"n * d_max^-tau = {math.exp(log_x):.4g} >= 1 (n={n}, d_max={d_max}, tau={tau}); "
            "set the walk length with --tree-l"
        )
    x = math.exp(log_x)
    den = math.log1p(-x)
    if den == 0.0:
        return math.inf
    num = math.log(n * epsilon / (2 * tau)) - tau * math.log(d_max)
    val = tau * num / den
    if not math.isfinite(val) or val > 1e18:
        return math.inf
    return float(max(1, math.ceil(val) + tau - 1))


def spectral_trunc_len(epsilon: float, lam: float, pi_s: float) -> int:
    """Smallest ``l`` with ``lam^(l+1) / ((1 - lam) pi_s) <= eps``.

    Bounds the tail ``sum_{k>l} |P^k[s,s] - pi_s| / pi_s`` when the decay of
    ``P^k`` is governed by the second eigenvalue modulus.
    """
    if not 0.0 < lam < 1.0:
        raise SpectralError(f"spectral precondition violated: lambda={lam} not in (0, 1)")
    return max(1, math.ceil(math.log(epsilon * (1 - lam) * pi_s) / math.log(lam)) - 1)


def resolve_phi_trunc_len(
    n: int, epsilon: float, tau: int, d_max: int, pi_s: float, lam: float | None, cfg: EstimatorConfig
) -> tuple[int, dict]:
    """Pick the walk length for the walk-centrality stage.

    ``diameter`` uses the diameter formula, ``spectral`` the eigenvalue bound,
    ``auto`` the smaller of whichever are available.  Clamped to
    ``cfg.max_trunc_len``.
    """
    info: dict = {"l_diameter": None, "l_spectral": None}
    if cfg.tree_trunc_len is not None:
        info["l_source"] = "override"
        return cfg.tree_trunc_len, info
    rule = cfg.tree_trunc_rule
    candidates = []
    if rule in ("auto", "diameter"):
        try:
            l_d = diag_trunc_len_raw(n, epsilon, tau, d_max)
            info["l_diameter"] = l_d if math.isfinite(l_d) else "inf"
            candidates.append((l_d, "diameter"))
        except TruncationDomainError:
            if rule == "diameter":
                raise
    if rule in ("auto", "spectral") and lam is not None and 0.0 < lam < 1.0:
        l_s = spectral_trunc_len(epsilon, lam, pi_s)
        info["l_spectral"] = l_s
        candidates.append((float(l_s), "spectral"))
    if not candidates:
        raise TruncationDomainError(
            "no valid walk length: the diameter formula is outside its domain and lambda is "
            "unavailable; pass --tree-l or --lambda"
        )
    l_val, source = min(candidates)
    info["l_source"] = source
    l = cfg.max_trunc_len if not math.isfinite(l_val) else int(l_val)
    return l, info


def tree_sample_count_log(n: int, epsilon: float, tau: int, d_max: int) -> float:
    """Natural log of ``eps^-2 e^2 tau^2 d^(2 tau) ceil(log^3(4 n^2))``."""
    tau = max(int(tau), 1)
    c = math.ceil(math.log(4.0 * n * n) ** 3)
    return (-2 * math.log(epsilon) + 2 + 2 * math.log(tau) + 2 * tau * math.log(d_max) + math.log(c))


def phi_walk_count(n: int, epsilon: float, l: int, pi_s: float) -> int:
    """``ceil(l^2 log n / (2 eps^2 pi_s^2 n^2))``, at least 1."""
    v = l * l * math.log(n) / (2 * epsilon * epsilon * pi_s * pi_s * n * n) if n > 1 else 1.0
    return max(1, math.ceil(v)) if math.isfinite(v) else 2**62


def _phi_stats(g: Digraph, s: int, pi_s: float, l: int, r_prime: int, cfg: EstimatorConfig) -> WalkStats:
    n = g.n
    threshold = cfg.epsilon / 2 if cfg.conservative_stop else math.sqrt(n) * cfg.epsilon / 2
    sup = float(l) if cfg.strict_sup else l / 2
    delta = cfg.failure_prob_delta if cfg.failure_prob_delta is not None else 1.0 / max(n, 2)
    return simulate_from_nodes(
        g, np.array([s]), l, r_prime, cfg.seed, threshold, sup, delta, cfg.early_stop
    )


def phi_s_estimate(
    g: Digraph, s: int, pi_s: float, l: int, r_prime: int, cfg: EstimatorConfig
) -> float:
    """Mean return count to ``s`` of up to ``r_prime`` walks of length ``l``,
    stopped early once the Bernstein half-width drops to ``sqrt(n) eps / 2``."""
    return float(_phi_stats(g, s, pi_s, l, r_prime, cfg).means[0])


def combine_estimate(trace: float, t_s: float, pi_s: float, l: int, mode: str = "corrected") -> float:
    k = trace - (t_s + 1.0) / pi_s
    if mode == "corrected":
        return k + (l + 1)
    if mode == "as-printed":
        return k
    raise ValueError(f"unknown combination mode {mode!r}")


# -- estimator ----------------------------------------------------------------

def tree_mc(g: Digraph, spec: SpectralInfo, stats: GraphStats, cfg: EstimatorConfig) -> EstimateReport:
    t0 = time.perf_counter()
    threads = set_threads(cfg.threads)
    n, eps = g.n, cfg.epsilon
    notes: list[str] = []
    pi = spec.pi
    s = cfg.root if cfg.root is not None else select_root(pi)
    if not 0 <= s < n:
        raise ValueError(f"root {s} out of range")
    pi_s = float(pi[s])
    tau = cfg.tau_override if cfg.tau_override is not None else stats.tau
    tau_is_estimate = stats.tau_is_estimate and cfg.tau_override is None
    d_max = stats.d_max
    lam = cfg.lambda_override if cfg.lambda_override is not None else spec.lam

    log_r = tree_sample_count_log(n, eps, tau, d_max)
    r_theory = math.ceil(math.exp(log_r)) if log_r < math.log(2**62) else None
    r = cfg.max_tree_samples
    if r_theory is not None and r_theory <= r:
        r = r_theory
    else:
        msg = f"tree samples r=10^{log_r / math.log(10):.1f} clamped to cap {r}"
        if cfg.strict_caps:
            raise CapExhausted(msg)
        notes.append(msg)
    tstats = tree_trace_estimate(g, s, r, cfg.seed, cfg.threads)

    l, linfo = resolve_phi_trunc_len(n, eps, tau, d_max, pi_s, lam, cfg)
    if l > cfg.max_trunc_len:
        l = _cap("l", l, cfg.max_trunc_len, cfg, notes)
    r_prime_theory = phi_walk_count(n, eps, l, pi_s)
    r_prime = _cap("r_prime", r_prime_theory, cfg.max_walks_per_node, cfg, notes)
    wstats = _phi_stats(g, s, pi_s, l, r_prime, cfg)
    t_s = float(wstats.means[0])
    trace = tstats.trace
    estimate = combine_estimate(trace, t_s, pi_s, l, cfg.combine)

    params = {
        "epsilon": eps,
        "root": s,
        "pi_root": pi_s,
        "tau": tau,
        "tau_is_estimate": tau_is_estimate,
        "r_is_heuristic": tau_is_estimate,
        "d_max": d_max,
        "lambda": lam,
        "r": r,
        "r_theory": r_theory,
        "r_theory_log10": log_r / math.log(10),
        "l": l,
        **linfo,
        "r_prime": r_prime,
        "r_prime_theory": r_prime_theory,
        "phi_walks_used": int(wstats.walks[0]),
        "trace_estimate": trace,
        "t_root": t_s,
        "combine": cfg.combine,
        "mean_tree_steps": tstats.mean_steps,
    }
    return EstimateReport(
        algorithm="tree-mc",
        estimate=float(estimate),
        params=params,
        total_steps=tstats.total_steps + wstats.steps,
        elapsed=time.perf_counter() - t0,
        seed=cfg.seed,
        threads=threads,
        early_stops=int(wstats.walks[0] < r_prime),
        warnings=notes,
    )
