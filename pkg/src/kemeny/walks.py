"""Truncated random walks and the walk-based Kemeny estimators.

Kemeny's constant equals ``trace(F)`` with ``F = sum_k (P^k - 1 pi^T)``.
Truncating the series after ``l`` terms gives

    trace(F^(l)) = n - l - 1 + sum_i sum_{k=1}^{l} P^k[i, i]

and the inner sum is the expected number of returns of an ``l``-step walk
started at ``i``.  ``improved_mc`` estimates it on a uniform node subset with
Bernstein early stopping, ``ablation_mc`` on every node, and ``dynamic_mc``
grows ``l`` instead of fixing it.
"""
from __future__ import annotations

import logging
import math
import time
import warnings

import numba as nb
import numpy as np

from .config import CapExhausted, EstimateReport, EstimatorConfig, WalkStats
from .graph import Digraph
from .rng import ROUND_DOMAIN, WALK_DOMAIN, Stream, next_below, normalize_seed, stream_key
from .spectral import SpectralError, SpectralInfo

log = logging.getLogger(__name__)


class TruncationCapWarning(UserWarning):
    pass


def set_threads(threads: int) -> int:
    """Apply a numba thread count; returns the count actually used."""
    eff = max(1, min(int(threads), nb.config.NUMBA_NUM_THREADS))
    nb.set_num_threads(eff)
    return eff


# -- kernels -----------------------------------------------------------------

@nb.njit(cache=True)
def walk_once(offsets, targets, start, l, state):
    """One ``l``-step walk; returns (visits to ``start`` at steps 1..l, new state)."""
    v = start
    c = 0
    for _ in range(l):
        lo = offsets[v]
        state, k = next_below(state, offsets[v + 1] - lo)
        v = targets[lo + k]
        if v == start:
            c += 1
    return c, state


@nb.njit(cache=True)
def bernstein_halfwidth(j, emp_var, sup, delta):
    """Empirical Bernstein confidence radius after ``j`` samples in ``[0, sup]``."""
    lg = math.log(3.0 / delta)
    return math.sqrt(2.0 * emp_var * lg / j) + 3.0 * sup * lg / j


@nb.njit(cache=True, parallel=True)
def _walk_nodes(offsets, targets, nodes, l, r, seed, threshold, sup, delta, early_stop):
    k = len(nodes)
    walks = np.zeros(k, np.int64)
    sums = np.zeros(k, np.int64)
    sumsq = np.zeros(k, np.int64)
    for idx in nb.prange(k):
        start = nodes[idx]
        state = stream_key(seed, WALK_DOMAIN, start)
        s = 0
        ss = 0
        j = 0
        while j < r:
            c, state = walk_once(offsets, targets, start, l, state)
            j += 1
            s += c
            ss += c * c
            if early_stop:
                mean = s / j
                var = ss / j - mean * mean
                if var < 0.0:
                    var = 0.0
                if bernstein_halfwidth(j, var, sup, delta) <= threshold:
                    break
        walks[idx] = j
        sums[idx] = s
        sumsq[idx] = ss
    return walks, sums, sumsq


@nb.njit(cache=True, parallel=True)
def _extend_walkers(offsets, targets, pos, returns, round_sq, l_from, l_to, seed, rnd):
    n, r = pos.shape
    for i in nb.prange(n):
        acc = 0
        sq = 0.0
        for w in range(r):
            before = acc
            state = stream_key(seed, ROUND_DOMAIN, (i * r + w) * 64 + rnd)
            v = pos[i, w]
            for _ in range(l_from, l_to):
                lo = offsets[v]
                state, k = next_below(state, offsets[v + 1] - lo)
                v = targets[lo + k]
                if v == i:
                    acc += 1
            pos[i, w] = v
            sq += float(acc - before) ** 2
        returns[i] += acc
        round_sq[i] = sq


# -- public helpers ----------------------------------------------------------

def simulate_truncated_walk(g: Digraph, start: int, l: int, stream: Stream) -> int:
    """Return count of one ``l``-step walk from ``start``; advances ``stream``."""
    if l < 1:
        raise ValueError("l must be >= 1")
    c, stream.state = walk_once(g.out_offsets, g.out_targets, start, l, stream.state)
    return int(c)


def trunc_len_improved_raw(epsilon: float, lam: float) -> int:
    """``ceil(log(3 / (eps - eps*lam)) / log(1/lam))``, floored at 1, no cap."""
    if not 0.0 < lam < 1.0:
        raise SpectralError(f"spectral precondition violated: lambda={lam} not in (0, 1)")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    return max(1, math.ceil(math.log(3.0 / (epsilon - epsilon * lam)) / math.log(1.0 / lam)))


def trunc_len_improved(epsilon: float, lam: float, max_len: int = 100_000) -> int:
    """Walk length for ImprovedMC, clamped to ``max_len`` with a warning."""
    l = trunc_len_improved_raw(epsilon, lam)
    if l > max_len:
        warnings.warn(f"truncation length {l} clamped to {max_len}", TruncationCapWarning, stacklevel=2)
        return max_len
    return l


def walks_per_node(epsilon: float, l: int, n: int) -> int:
    """Hoeffding sample size ``ceil(9 eps^-2 l^2 log(2n) / 4)``."""
    return math.ceil(9.0 * l * l * math.log(2 * n) / (4.0 * epsilon * epsilon))


def subset_size(n: int, l: int, epsilon: float) -> int:
    """``min(ceil(3 l sqrt(n log n) / (2 eps)), n)``, natural log, at least 1."""
    k = math.ceil(3.0 * l * math.sqrt(n) * math.sqrt(math.log(n)) / (2.0 * epsilon))
    return max(1, min(k, n))


def draw_subset(n: int, k: int, seed: int) -> np.ndarray:
    """Sorted uniform ``k``-subset of ``range(n)``; the full range when ``k >= n``."""
    if k >= n:
        return np.arange(n)
    rng = np.random.default_rng(normalize_seed(seed))
    return np.sort(rng.choice(n, size=k, replace=False))


def simulate_from_nodes(
    g: Digraph,
    nodes: np.ndarray,
    l: int,
    r: int,
    seed: int,
    threshold: float = 0.0,
    sup: float | None = None,
    delta: float | None = None,
    early_stop: bool = True,
) -> WalkStats:
    """Up to ``r`` walks of length ``l`` from each node, stopping a node once its
    Bernstein half-width is at most ``threshold``."""
    nodes = np.ascontiguousarray(nodes, dtype=np.int64)
    sup = l / 2 if sup is None else sup
    delta = 1.0 / max(g.n, 2) if delta is None else delta
    walks, sums, sumsq = _walk_nodes(
        g.out_offsets, g.out_targets, nodes, int(l), int(r),
        np.uint64(normalize_seed(seed)), float(threshold), float(sup), float(delta), bool(early_stop),
    )
    return WalkStats(nodes, walks, sums, sumsq, int(walks.sum()) * int(l))


def _resolve_lambda(spec: SpectralInfo | None, cfg: EstimatorConfig) -> float:
    lam = cfg.lambda_override if cfg.lambda_override is not None else (spec.lam if spec else None)
    if lam is None or not 0.0 < lam < 1.0:
        raise SpectralError(
            f"spectral precondition violated: lambda={lam} not in (0, 1); "
            "the chain may be periodic, or pass --lambda"
        )
    return lam


def _cap(name: str, value: int, cap: int, cfg: EstimatorConfig, notes: list[str]) -> int:
    if value > cap:
        msg = f"{name}={value} clamped to cap {cap}"
        if cfg.strict_caps:
            raise CapExhausted(msg)
        notes.append(msg)
        log.warning(msg)
        return cap
    return value


# -- estimators --------------------------------------------------------------

def improved_mc(
    g: Digraph, spec: SpectralInfo | None, cfg: EstimatorConfig, algorithm: str = "improved-mc"
) -> EstimateReport:
    """Subset-sampled, adaptively stopped truncated-walk estimator."""
    t0 = time.perf_counter()
    threads = set_threads(cfg.threads)
    n, eps = g.n, cfg.epsilon
    notes: list[str] = []
    lam = _resolve_lambda(spec, cfg)

    l_raw = trunc_len_improved_raw(eps, lam)
    l = _cap("l", l_raw, cfg.max_trunc_len, cfg, notes)
    r_raw = walks_per_node(eps, l, n)
    r = _cap("r", r_raw, cfg.max_walks_per_node, cfg, notes)
    k = cfg.subset_override if cfg.subset_override is not None else subset_size(n, l, eps)
    k = min(k, n)
    nodes = draw_subset(n, k, cfg.seed)

    delta = cfg.failure_prob_delta if cfg.failure_prob_delta is not None else 1.0 / max(n, 2)
    sup = float(l) if cfg.strict_sup else l / 2
    threshold = eps / 3 if cfg.conservative_stop else n * eps / 3
    stats = simulate_from_nodes(g, nodes, l, r, cfg.seed, threshold, sup, delta, cfg.early_stop)
    estimate = n - l - 1 + (n / k) * float(stats.means.sum())

    params = {
        "epsilon": eps,
        "lambda": lam,
        "l": l,
        "l_theory": l_raw,
        "r": r,
        "r_theory": r_raw,
        "subset_size": k,
        "delta": delta,
        "x_sup": sup,
        "stop_threshold": threshold,
        "early_stop": cfg.early_stop,
        "walks_used": int(stats.walks.sum()),
        "max_walks_any_node": int(stats.walks.max()),
    }
    return EstimateReport(
        algorithm=algorithm,
        estimate=float(estimate),
        params=params,
        total_steps=stats.steps,
        elapsed=time.perf_counter() - t0,
        seed=cfg.seed,
        threads=threads,
        early_stops=int(np.count_nonzero(stats.walks < r)),
        warnings=notes,
    )


def ablation_mc(g: Digraph, spec: SpectralInfo | None, cfg: EstimatorConfig) -> EstimateReport:
    """ImprovedMC with the subset sampling switched off (every node is a start node)."""
    return improved_mc(g, spec, cfg.replace(subset_override=g.n), algorithm="ablation-mc")


def dynamic_walk_count(epsilon: float, n: int) -> int:
    """Hoeffding size for per-step return indicators in [0, 1]: ``ceil(log(2n) / (2 eps^2))``."""
    return math.ceil(math.log(2 * n) / (2.0 * epsilon * epsilon))


def dynamic_mc(g: Digraph, cfg: EstimatorConfig) -> EstimateReport:
    """DynamicMC baseline, reconstructed.

    Each node keeps ``r`` walkers.  Depth rounds double the truncation length
    starting from ``cfg.dynamic_start_len``, extending the existing walkers
    instead of restarting them.  The run stops when the running estimate moves
    by less than ``eps_d`` (default 0.0005 n) between consecutive rounds, or,
    with ``dynamic_noise_stop``, when that move is within two standard errors
    of zero so that deeper rounds would only add variance.
    """
    t0 = time.perf_counter()
    threads = set_threads(cfg.threads)
    n = g.n
    notes: list[str] = []
    eps_d = cfg.dynamic_threshold if cfg.dynamic_threshold is not None else 0.0005 * n
    r = cfg.dynamic_walks if cfg.dynamic_walks is not None else dynamic_walk_count(cfg.epsilon, n)
    r = _cap("r", r, cfg.max_walks_per_node, cfg, notes)
    seed = np.uint64(normalize_seed(cfg.seed))

    pos = np.repeat(np.arange(n, dtype=np.int32)[:, None], r, axis=1)
    returns = np.zeros(n, np.int64)
    before = np.zeros(n, np.int64)
    round_sq = np.zeros(n, np.float64)
    l_prev, l = 0, min(cfg.dynamic_start_len, cfg.max_trunc_len)
    history: list[tuple[int, float]] = []
    est_prev = None
    converged = False
    stop_reason = "cap"
    rnd = 0
    while True:
        before[:] = returns
        _extend_walkers(g.out_offsets, g.out_targets, pos, returns, round_sq, l_prev, l, seed, rnd)
        est = n - l - 1 + float(returns.sum()) / r
        history.append((l, est))
        if est_prev is not None:
            delta = abs(est - est_prev)
            # standard error of this round's increment, from per-walker round counts
            mean = (returns - before) / r
            var = np.maximum(round_sq / r - mean * mean, 0.0) * (r / max(r - 1, 1))
            se = math.sqrt(float(var.sum()) / r)
            if delta < eps_d:
                converged, stop_reason = True, "threshold"
                break
            if cfg.dynamic_noise_stop and delta <= 2.0 * se:
                converged, stop_reason = True, "noise"
                break
        if l >= cfg.max_trunc_len or rnd >= 63:
            break
        est_prev = est
        l_prev, l = l, min(2 * l, cfg.max_trunc_len)
        rnd += 1
    if not converged:
        msg = f"depth reached cap {l} before the increment fell below {eps_d}"
        if cfg.strict_caps:
            raise CapExhausted(msg)
        notes.append(msg)

    params = {
        "epsilon_d": eps_d,
        "r": r,
        "l": l,
        "rounds": len(history),
        "history": [[ll, e] for ll, e in history],
        "converged": converged,
        "stop_reason": stop_reason,
        "reconstruction": True,
    }
    return EstimateReport(
        algorithm="dynamic-mc",
        estimate=float(history[-1][1]),
        params=params,
        total_steps=int(n) * r * l,
        elapsed=time.perf_counter() - t0,
        seed=cfg.seed,
        threads=threads,
        warnings=notes,
    )
