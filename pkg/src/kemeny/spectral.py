"""Stationary distribution, second eigenvalue modulus, and the dense exact oracle.

The exact quantities all come from the fundamental matrix
``F = (I - P + 1 pi^T)^{-1} - 1 pi^T``:

* Kemeny's constant ``K = trace(F)``
* walk centrality ``Phi(s) = F[s, s] / pi[s]``
* ``trace((I - P_{-s})^{-1}) = K + Phi(s)`` for every node ``s``
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .graph import Digraph

DENSE_LIMIT = 5000
DENSE_EIG_LIMIT = 2000
GROWTH_MIN_N = 50_000

log = logging.getLogger(__name__)


class SpectralError(RuntimeError):
    """An iterative eigen-computation failed or a spectral precondition is violated."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class DenseLimitError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralInfo:
    pi: np.ndarray
    lam: float | None
    pi_iterations: int = 0
    pi_residual: float = 0.0
    lam_iterations: int = 0
    lam_residual: float = 0.0
    lam_method: str = "subspace"

    @property
    def lambda_valid(self) -> bool:
        return self.lam is not None and 0.0 < self.lam < 1.0

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "lambda_valid": self.lambda_valid,
            "lambda_iterations": self.lam_iterations,
            "lambda_residual": self.lam_residual,
            "lambda_method": self.lam_method,
            "pi_sum": float(self.pi.sum()) if self.pi is not None else None,
            "pi_max": float(self.pi.max()) if self.pi is not None else None,
            "pi_iterations": self.pi_iterations,
            "pi_residual": self.pi_residual,
        }


def transition_matrix(g: Digraph) -> sp.csr_matrix:
    """Sparse ``P = D^{-1} A``."""
    data = np.repeat(1.0 / g.out_degree, g.out_degree)
    return sp.csr_matrix((data, g.out_targets, g.out_offsets), shape=(g.n, g.n))


def dense_transition(g: Digraph, limit: int = DENSE_LIMIT) -> np.ndarray:
    _check_dense(g, limit)
    return transition_matrix(g).toarray()


def _check_dense(g: Digraph, limit: int) -> None:
    if g.n > limit:
        raise DenseLimitError(f"n={g.n} exceeds the dense limit {limit}")


# -- iterative ---------------------------------------------------------------

def stationary_distribution(
    g: Digraph, tol: float = 1e-12, max_iter: int = 100_000, lazy: bool = True
) -> tuple[np.ndarray, int, float]:
    """Power iteration on P^T; returns ``(pi, iterations, residual)``.

    ``lazy`` iterates with ``(I + P) / 2``, which has the same stationary
    vector but no periodicity.  The residual is ``||pi^T P - pi^T||_1``.
    """
    pt = transition_matrix(g).T.tocsr()
    x = np.full(g.n, 1.0 / g.n)
    res = np.inf
    for it in range(1, max_iter + 1):
        y = pt @ x
        res = float(np.abs(y - x).sum())
        if res <= tol:
            return x / x.sum(), it, res
        x = 0.5 * (x + y) if lazy else y
        x /= x.sum()
    raise SpectralError(
        f"stationary distribution did not converge in {max_iter} iterations "
        f"(residual {res:.3e}); the chain may be periodic, retry with lazy=True",
        residual=res,
    )


class LambdaResult(NamedTuple):
    lam: float
    iterations: int
    residual: float
    method: str


def _subspace_modulus(p, pi, n, tol, max_iter, block, seed):
    k = min(block, n - 1)
    rng = np.random.default_rng(seed)
    v, _ = np.linalg.qr(rng.standard_normal((n, k)))
    ones = np.ones(n)
    history: list[float] = []
    res = np.inf
    for it in range(1, max_iter + 1):
        w = p @ v - np.outer(ones, pi @ v)
        h = v.T @ w
        mu = float(np.max(np.abs(np.linalg.eigvals(h))))
        res = float(np.linalg.norm(w - v @ h))
        history.append(mu)
        if mu == 0.0 and np.linalg.norm(w) == 0.0:
            return 0.0, it, 0.0, True
        if len(history) > 10 and abs(history[-1] - history[-11]) <= tol * max(mu, 1.0):
            return mu, it, res, True
        v, _ = np.linalg.qr(w)
    return history[-1], max_iter, res, False


def _growth_modulus(p, pi, n, tol, max_iter, seed):
    """Geometric-mean growth rate of deflated power iterates.

    Averaging ``log ||B x_k||`` over the second half of a run smooths the
    rotation caused by complex or negative dominant eigenvalues.  The run
    length doubles until two consecutive estimates agree to ``tol``.
    """
    x = np.random.default_rng(seed).standard_normal(n)
    logs = np.empty(max_iter)
    prev = None
    k, check = 0, 1024  # the estimate can plateau early below its limit
    while k < max_iter:
        x = p @ x
        x -= pi @ x
        norm = float(np.linalg.norm(x))
        if norm == 0.0:
            return 0.0, k + 1, 0.0, True
        logs[k] = np.log(norm)
        x /= norm
        k += 1
        if k == check or k == max_iter:
            est = float(np.exp(logs[k // 2:k].mean()))
            if prev is not None:
                change = abs(est - prev) / max(est, 1e-300)
                if change <= tol:
                    return est, k, change, True
            prev, check = est, 2 * check
    return prev, max_iter, np.inf, False


def _fallback_modulus(g: Digraph, p, pi, seed: int) -> tuple[float, float, str]:
    n = g.n
    if n <= DENSE_EIG_LIMIT:
        ev = np.linalg.eigvals(p.toarray())
        # drop the eigenvalue closest to 1 (the stationary one)
        ev = np.delete(ev, np.argmin(np.abs(ev - 1.0)))
        return float(np.max(np.abs(ev))), 0.0, "dense"
    ones = np.ones(n)
    op = sla.LinearOperator((n, n), matvec=lambda x: p @ x - ones * (pi @ x), dtype=np.float64)
    # a wide Krylov basis: the bulk of a sparse random digraph's spectrum is a
    # dense cluster of near-equal moduli, and a narrow one can settle inside it
    k = min(10, n - 2)
    vals, vecs = sla.eigs(op, k=k, ncv=min(n - 1, 4 * k), which="LM", v0=np.random.default_rng(seed).standard_normal(n))
    j = int(np.argmax(np.abs(vals)))
    res = float(np.linalg.norm(op @ vecs[:, j] - vals[j] * vecs[:, j]))
    return float(np.abs(vals[j])), res, "arnoldi"


def second_eigenvalue_modulus(
    g: Digraph,
    pi: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 20_000,
    block: int = 4,
    seed: int = 0,
    fallback: bool = True,
    method: str = "auto",
    growth_tol: float = 5e-4,
) -> LambdaResult:
    """Modulus of the second eigenvalue of P.

    Subspace iteration with ``block`` vectors on the deflated operator
    ``B = P - 1 pi^T`` (whose spectrum is that of P with 1 replaced by 0).
    Ritz values of the small projection capture complex-conjugate or
    ``+-lam`` pairs, which a single-vector iteration cannot.  Converged when
    the largest Ritz modulus changes by less than ``tol`` over 10 iterations.

    Nearly tied moduli can stall the iteration.  With ``fallback`` the value
    then comes from a dense eigensolve (small n) or ARPACK on ``B``, and
    ``method`` says which; without it a :class:`SpectralError` is raised.

    Sparse random digraphs are strongly non-normal and their spectral bulk
    has no gap at its edge, so both of those slow to minutes past ~10^5
    nodes.  ``method="auto"`` therefore switches above ``GROWTH_MIN_N``
    nodes to the norm growth rate of single-vector deflated power
    iteration, accurate to about ``growth_tol`` relative; the residual
    field then holds the last relative change.
    """
    if method not in ("auto", "subspace", "growth"):
        raise ValueError(f"unknown lambda method {method!r}")
    p = transition_matrix(g)
    n = g.n
    if n == 1:
        return LambdaResult(0.0, 0, 0.0, "trivial")
    if method == "growth" or (method == "auto" and n > GROWTH_MIN_N):
        lam, it, change, ok = _growth_modulus(p, pi, n, growth_tol, max_iter, seed)
        if not ok:
            log.warning("growth-rate lambda did not settle to %.1e in %d iterations; using %.6f",
                        growth_tol, max_iter, lam)
        return LambdaResult(lam, it, change, "growth")
    mu, it, res, ok = _subspace_modulus(p, pi, n, tol, max_iter, block, seed)
    if ok:
        return LambdaResult(mu, it, res, "subspace")
    if fallback:
        try:
            lam, fres, method = _fallback_modulus(g, p, pi, seed)
        except sla.ArpackError as exc:
            raise SpectralError(f"second eigenvalue: ARPACK failed ({exc}); pass --lambda", res) from exc
        log.warning("subspace iteration stalled at %.6f; %s solver gives %.10f", mu, method, lam)
        return LambdaResult(lam, it, fres, method)
    raise SpectralError(
        f"second eigenvalue did not converge in {max_iter} iterations (last estimate "
        f"{mu:.6f}, residual {res:.3e}); eigenvalues may be nearly tied, "
        "pass --lambda to override",
        residual=res,
    )


def spectral_info(g: Digraph, tol: float = 1e-12, lam_tol: float = 1e-10, need_lambda: bool = True) -> SpectralInfo:
    pi, pit, pres = stationary_distribution(g, tol=tol)
    if not need_lambda:
        return SpectralInfo(pi, None, pit, pres)
    lr = second_eigenvalue_modulus(g, pi, tol=lam_tol)
    return SpectralInfo(pi, lr.lam, pit, pres, lr.iterations, lr.residual, lr.method)


# -- dense exact oracle ------------------------------------------------------

def dense_stationary(p: np.ndarray) -> np.ndarray:
    """Left 1-eigenvector of a dense stochastic matrix by a direct solve."""
    n = len(p)
    a = (np.eye(n) - p).T
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return la.solve(a, b)


def fundamental_matrix(g: Digraph, pi: np.ndarray | None = None, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Group inverse of ``I - P`` via an LU solve."""
    p = dense_transition(g, limit)
    if pi is None:
        pi = dense_stationary(p)
    n = g.n
    w = np.outer(np.ones(n), pi)
    a = np.eye(n) - p + w
    lu = la.lu_factor(a, overwrite_a=True)
    return la.lu_solve(lu, np.eye(n)) - w


def exact_kemeny(g: Digraph, pi: np.ndarray | None = None, limit: int = DENSE_LIMIT) -> float:
    return float(np.trace(fundamental_matrix(g, pi, limit)))


def exact_walk_centrality(g: Digraph, s: int, pi: np.ndarray | None = None, limit: int = DENSE_LIMIT) -> float:
    p = dense_transition(g, limit)
    if pi is None:
        pi = dense_stationary(p)
    f = fundamental_matrix(g, pi, limit)
    return float(f[s, s] / pi[s])


def absorbing_inverse(g: Digraph, s: int, limit: int = DENSE_LIMIT) -> np.ndarray:
    """``(I - P_{-s})^{-1}``; entry (i, j) counts expected visits to j before absorption at s."""
    p = dense_transition(g, limit)
    keep = np.arange(g.n) != s
    sub = np.eye(g.n - 1) - p[np.ix_(keep, keep)]
    try:
        lu = la.lu_factor(sub)
    except la.LinAlgError as exc:  # pragma: no cover - needs a non-SCC input
        raise SpectralError(f"I - P_-{s} is singular: {exc}") from exc
    return la.lu_solve(lu, np.eye(g.n - 1))


def exact_submatrix_trace(g: Digraph, s: int, limit: int = DENSE_LIMIT) -> float:
    return float(np.trace(absorbing_inverse(g, s, limit)))


def truncated_fundamental(g: Digraph, l: int, pi: np.ndarray | None = None, limit: int = DENSE_LIMIT) -> np.ndarray:
    """``sum_{k=0}^{l} (P^k - 1 pi^T)``."""
    p = dense_transition(g, limit)
    if pi is None:
        pi = dense_stationary(p)
    w = np.outer(np.ones(g.n), pi)
    acc = np.zeros_like(p)
    pk = np.eye(g.n)
    for _ in range(l + 1):
        acc += pk - w
        pk = pk @ p
    return acc


def return_probability_sums(g: Digraph, node: int, l: int, limit: int = DENSE_LIMIT) -> np.ndarray:
    """``c[k] = sum_{j=1}^{k} (P^j)[node, node]`` for ``k = 0..l`` (c[0] = 0)."""
    p = dense_transition(g, limit)
    row = np.zeros(g.n)
    row[node] = 1.0
    out = np.zeros(l + 1)
    for k in range(1, l + 1):
        row = row @ p
        out[k] = out[k - 1] + row[node]
    return out
