"""Plain-text cache of precomputed spectral quantities and graph statistics.

Layout: a version header, ``key value`` lines, then a ``pi`` line followed by
one stationary probability per line.  Floats are written with ``repr`` so
they round-trip exactly.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .graph import Digraph, GraphStats
from .spectral import SpectralInfo

HEADER = "kemeny-spectral-cache 1"


class CacheError(ValueError):
    pass


def fingerprint(g: Digraph) -> str:
    h = hashlib.sha1()
    h.update(g.out_offsets.tobytes())
    h.update(g.out_targets.tobytes())
    return h.hexdigest()


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return str(int(v))
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_cache(path, g: Digraph, spec: SpectralInfo, stats: GraphStats) -> None:
    fields = [
        ("n", g.n),
        ("m", g.m),
        ("fingerprint", fingerprint(g)),
        ("lambda", spec.lam),
        ("lambda_iterations", spec.lam_iterations),
        ("lambda_residual", float(spec.lam_residual)),
        ("lambda_method", spec.lam_method),
        ("pi_iterations", spec.pi_iterations),
        ("pi_residual", float(spec.pi_residual)),
        ("d_max", stats.d_max),
        ("tau", stats.tau),
        ("tau_is_estimate", stats.tau_is_estimate),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(HEADER + "\n")
        for k, v in fields:
            fh.write(f"{k} {_fmt(v)}\n")
        fh.write("pi\n")
        fh.writelines(repr(float(x)) + "\n" for x in spec.pi)


def read_cache(path, g: Digraph | None = None) -> tuple[SpectralInfo, GraphStats]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != HEADER:
        raise CacheError(f"{path}: not a spectral cache (expected header {HEADER!r})")
    meta: dict[str, str] = {}
    i = 1
    while i < len(lines) and lines[i] != "pi":
        key, _, val = lines[i].partition(" ")
        meta[key] = val
        i += 1
    pi = np.array([float(x) for x in lines[i + 1:]], dtype=np.float64)
    n = int(meta["n"])
    if len(pi) != n:
        raise CacheError(f"{path}: expected {n} pi values, found {len(pi)}")
    if g is not None and (g.n != n or meta.get("fingerprint") != fingerprint(g)):
        raise CacheError(f"{path}: cache was computed for a different graph")
    lam = None if meta["lambda"] == "none" else float(meta["lambda"])
    spec = SpectralInfo(
        pi, lam,
        int(meta["pi_iterations"]), float(meta["pi_residual"]),
        int(meta["lambda_iterations"]), float(meta["lambda_residual"]),
        meta.get("lambda_method", "subspace"),
    )
    stats = GraphStats(int(meta["d_max"]), int(meta["tau"]), meta["tau_is_estimate"] == "1", np.array([]))
    return spec, stats
