"""``kemeny`` command line: estimate, bench, precompute.

Exit codes: 0 ok, 1 parse/IO error, 2 precondition violated (lambda,
truncation-formula domain, dense limit, non-convergence), 3 cap exhausted
under ``--strict-caps``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

from . import __version__
from .cache import CacheError, read_cache, write_cache
from .config import CapExhausted, EstimatorConfig
from .graph import Digraph, EdgeListError, GraphStats, graph_stats, largest_scc, load_edge_list
from .spectral import (
    DENSE_LIMIT,
    DenseLimitError,
    SpectralError,
    SpectralInfo,
    exact_kemeny,
    second_eigenvalue_modulus,
    stationary_distribution,
)
from .trees import TruncationDomainError, tree_mc
from .walks import ablation_mc, dynamic_mc, improved_mc

log = logging.getLogger("kemeny")

ALGORITHMS = ("exact", "improved-mc", "ablation-mc", "dynamic-mc", "tree-mc")
MANIFEST_SCHEMA = "kemeny.manifest/1"
BENCH_FIELDS = [
    "graph", "n", "m", "algorithm", "epsilon", "seed", "estimate", "exact",
    "relative_error", "wall_time", "total_steps", "error",
]


class PreconditionError(RuntimeError):
    pass


@dataclass
class Prepared:
    path: str
    graph: Digraph
    n_input: int
    m_input: int
    stats: GraphStats
    spectral: SpectralInfo | None
    precompute_time: float


def _needs(algo: str, cfg: EstimatorConfig) -> tuple[bool, bool]:
    """(needs pi, needs lambda) for an algorithm."""
    if algo in ("improved-mc", "ablation-mc"):
        return cfg.lambda_override is None, cfg.lambda_override is None
    if algo == "tree-mc":
        return True, cfg.lambda_override is None and cfg.tree_trunc_len is None
    return False, False


def prepare(path: str, algos, cfg: EstimatorConfig, fmt: str = "whitespace", cache: str | None = None) -> Prepared:
    g0 = load_edge_list(path, fmt)
    g = largest_scc(g0)
    t0 = time.perf_counter()
    if cache:
        spec, stats = read_cache(cache, g)
    else:
        stats = graph_stats(g)
        need_pi = need_lam = False
        for a in algos:
            p, l_ = _needs(a, cfg)
            need_pi |= p
            need_lam |= l_
        spec = None
        if need_pi or need_lam:
            pi, pit, pres = stationary_distribution(g)
            spec = SpectralInfo(pi, None, pit, pres)
            if need_lam:
                try:
                    lr = second_eigenvalue_modulus(g, pi)
                    spec = SpectralInfo(pi, lr.lam, pit, pres, lr.iterations, lr.residual, lr.method)
                except SpectralError:
                    if any(a in ("improved-mc", "ablation-mc") for a in algos):
                        raise
                    log.warning("lambda did not converge; tree-mc falls back to the diameter rule")
    if cfg.tau_override is not None:
        stats = GraphStats(stats.d_max, cfg.tau_override, False, stats.degree_histogram)
    return Prepared(path, g, g0.n, g0.m, stats, spec, time.perf_counter() - t0)


def run_algorithm(algo: str, prep: Prepared, cfg: EstimatorConfig, dense_limit: int = DENSE_LIMIT) -> dict:
    g = prep.graph
    if algo == "exact":
        t0 = time.perf_counter()
        k = exact_kemeny(g, limit=dense_limit)
        return {"algorithm": "exact", "estimate": k, "params": {}, "total_steps": 0,
                "elapsed": time.perf_counter() - t0, "seed": cfg.seed, "threads": 1,
                "early_stops": 0, "warnings": []}
    if algo == "improved-mc":
        rep = improved_mc(g, prep.spectral, cfg)
    elif algo == "ablation-mc":
        rep = ablation_mc(g, prep.spectral, cfg)
    elif algo == "dynamic-mc":
        rep = dynamic_mc(g, cfg)
    elif algo == "tree-mc":
        rep = tree_mc(g, prep.spectral, prep.stats, cfg)
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    return rep.to_dict()


def build_manifest(algo: str, prep: Prepared, cfg: EstimatorConfig, report: dict, exact: float | None) -> dict:
    rel = None
    if exact is not None:
        rel = abs(report["estimate"] - exact) / abs(exact) if exact != 0 else abs(report["estimate"])
    return {
        "schema": MANIFEST_SCHEMA,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "input": os.path.abspath(prep.path),
        "algorithm": algo,
        "config": cfg.to_dict(),
        "graph": {"n_input": prep.n_input, "m_input": prep.m_input, "n": prep.graph.n,
                  "m": prep.graph.m, **prep.stats.to_dict()},
        "spectral": prep.spectral.summary() if prep.spectral is not None else None,
        "precompute_time": prep.precompute_time,
        "report": report,
        "exact": exact,
        "relative_error": rel,
    }


# -- argument parsing ----------------------------------------------------------

def _default_seed() -> int:
    env = os.environ.get("KEMENY_SEED")
    return int(env) if env else 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=None, help="falls back to $KEMENY_SEED, then 0")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--lambda", dest="lambda_override", type=float, default=None)
    p.add_argument("--tau", dest="tau_override", type=int, default=None)
    p.add_argument("--max-l", dest="max_trunc_len", type=int, default=100_000)
    p.add_argument("--max-walks", dest="max_walks_per_node", type=int, default=10_000_000)
    p.add_argument("--max-trees", dest="max_tree_samples", type=int, default=100_000)
    p.add_argument("--subset", dest="subset_override", type=int, default=None)
    p.add_argument("--combine", choices=("as-printed", "corrected"), default="corrected")
    p.add_argument("--strict-sup", action="store_true")
    p.add_argument("--conservative-stop", action="store_true")
    p.add_argument("--strict-caps", action="store_true", help="exit 3 instead of clamping to caps")
    p.add_argument("--tree-l", dest="tree_trunc_len", type=int, default=None)
    p.add_argument("--tree-l-rule", dest="tree_trunc_rule", choices=("auto", "diameter", "spectral"), default="auto")
    p.add_argument("--root", type=int, default=None)
    p.add_argument("--dynamic-threshold", type=float, default=None)
    p.add_argument("--dynamic-walks", type=int, default=None)
    p.add_argument("--no-dynamic-noise-stop", dest="dynamic_noise_stop", action="store_false",
                   help="dynamic-mc stops only on the fixed threshold")
    p.add_argument("--spectral-cache", default=None)
    p.add_argument("--input-format", choices=("whitespace", "csv"), default="whitespace")
    p.add_argument("--dense-limit", type=int, default=DENSE_LIMIT)


def _config_from_args(a: argparse.Namespace, **extra) -> EstimatorConfig:
    seed = a.seed if a.seed is not None else _default_seed()
    return EstimatorConfig(
        epsilon=a.epsilon, seed=seed, threads=a.threads, lambda_override=a.lambda_override,
        tau_override=a.tau_override, max_trunc_len=a.max_trunc_len,
        max_walks_per_node=a.max_walks_per_node, max_tree_samples=a.max_tree_samples,
        subset_override=a.subset_override, strict_sup=a.strict_sup,
        conservative_stop=a.conservative_stop, strict_caps=a.strict_caps, combine=a.combine,
        root=a.root, tree_trunc_len=a.tree_trunc_len, tree_trunc_rule=a.tree_trunc_rule,
        dynamic_threshold=a.dynamic_threshold, dynamic_walks=a.dynamic_walks,
        dynamic_noise_stop=a.dynamic_noise_stop, **extra,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kemeny", description="Estimate Kemeny's constant of digraphs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="run one estimator and emit a JSON manifest")
    est.add_argument("graph", nargs="?")
    est.add_argument("--algo", choices=ALGORITHMS, default="improved-mc")
    est.add_argument("--with-exact", action="store_true", help="also compute the dense exact value")
    est.add_argument("--replay", default=None, help="re-run the configuration stored in a manifest")
    est.add_argument("--format", choices=("json", "csv"), default="json")
    est.add_argument("--output", default=None)
    _add_config_flags(est)

    bench = sub.add_parser("bench", help="run a grid of graphs x algorithms x epsilons x seeds")
    bench.add_argument("graphs", nargs="+")
    bench.add_argument("--algos", nargs="+", choices=ALGORITHMS, default=["improved-mc", "tree-mc"])
    bench.add_argument("--epsilons", nargs="+", type=float, default=[0.3, 0.2, 0.15])
    bench.add_argument("--repeats", type=int, default=10)
    bench.add_argument("--parallel-rows", action="store_true")
    bench.add_argument("--format", choices=("json", "csv"), default="csv")
    bench.add_argument("--output", default=None)
    _add_config_flags(bench)

    pre = sub.add_parser("precompute", help="compute pi, lambda and graph stats into a cache file")
    pre.add_argument("graph")
    pre.add_argument("--output", required=True)
    pre.add_argument("--input-format", choices=("whitespace", "csv"), default="whitespace")
    return parser


# -- commands ------------------------------------------------------------------

def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def cmd_estimate(a: argparse.Namespace) -> int:
    if a.replay:
        with open(a.replay, encoding="utf-8") as fh:
            old = json.load(fh)
        cfg = EstimatorConfig.from_dict(old["config"])
        algo = old["algorithm"]
        path = a.graph or old["input"]
    else:
        if not a.graph:
            raise EdgeListError("estimate needs a graph file (or --replay)")
        cfg = _config_from_args(a)
        algo, path = a.algo, a.graph
    prep = prepare(path, [algo], cfg, a.input_format, a.spectral_cache)
    report = run_algorithm(algo, prep, cfg, a.dense_limit)
    exact = None
    if algo == "exact":
        exact = report["estimate"]
    elif a.with_exact:
        exact = exact_kemeny(prep.graph, limit=a.dense_limit)
    manifest = build_manifest(algo, prep, cfg, report, exact)
    if a.format == "json":
        _emit(json.dumps(manifest, indent=2) + "\n", a.output)
    else:
        flat = _flatten(manifest)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(flat))
        w.writeheader()
        w.writerow(flat)
        _emit(buf.getvalue(), a.output)
    return 0


def _bench_row(algo: str, prep: Prepared, cfg: EstimatorConfig, exact: float | None, dense_limit: int) -> dict:
    row = {"graph": prep.path, "n": prep.graph.n, "m": prep.graph.m, "algorithm": algo,
           "epsilon": cfg.epsilon, "seed": cfg.seed, "estimate": None, "exact": exact,
           "relative_error": None, "wall_time": None, "total_steps": None, "error": None}
    try:
        rep = run_algorithm(algo, prep, cfg, dense_limit)
    except Exception as exc:  # recorded per row, the run continues
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(estimate=rep["estimate"], wall_time=rep["elapsed"], total_steps=rep["total_steps"])
    if exact is not None:
        row["relative_error"] = abs(rep["estimate"] - exact) / abs(exact)
    return row


def bench_rows(paths, algos, epsilons, repeats, base_cfg: EstimatorConfig, fmt="whitespace",
               dense_limit=DENSE_LIMIT, parallel=False, cache=None):
    rows = []
    for path in paths:
        try:
            prep = prepare(path, algos, base_cfg, fmt, cache)
        except Exception as exc:
            rows.append({**dict.fromkeys(BENCH_FIELDS), "graph": path, "error": f"{type(exc).__name__}: {exc}"})
            continue
        exact = None
        if prep.graph.n <= dense_limit:
            try:
                exact = exact_kemeny(prep.graph, limit=dense_limit)
            except Exception as exc:  # pragma: no cover - singular dense system
                log.warning("exact value failed for %s: %s", path, exc)
        jobs = []
        for algo in algos:
            for eps in epsilons:
                for rep in range(repeats if algo != "exact" else 1):
                    cfg = base_cfg.replace(epsilon=eps, seed=base_cfg.seed + rep)
                    jobs.append((algo, prep, cfg, exact, dense_limit))
        if parallel:
            with ProcessPoolExecutor() as ex:
                rows += list(ex.map(_bench_row, *zip(*jobs)))
        else:
            rows += [_bench_row(*j) for j in jobs]
    return rows


def cmd_bench(a: argparse.Namespace) -> int:
    cfg = _config_from_args(a)
    rows = bench_rows(a.graphs, a.algos, a.epsilons, a.repeats, cfg, a.input_format,
                      a.dense_limit, a.parallel_rows, a.spectral_cache)
    if a.format == "json":
        _emit(json.dumps(rows, indent=2) + "\n", a.output)
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=BENCH_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in BENCH_FIELDS})
        _emit(buf.getvalue(), a.output)
    return 0


def cmd_precompute(a: argparse.Namespace) -> int:
    g = largest_scc(load_edge_list(a.graph, a.input_format))
    stats = graph_stats(g)
    pi, pit, pres = stationary_distribution(g)
    lr = second_eigenvalue_modulus(g, pi)
    write_cache(a.output, g, SpectralInfo(pi, lr.lam, pit, pres, lr.iterations, lr.residual, lr.method), stats)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"estimate": cmd_estimate, "bench": cmd_bench, "precompute": cmd_precompute}
    try:
        return handlers[a.command](a)
    except (EdgeListError, CacheError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"kemeny: error: {exc}", file=sys.stderr)
        return 1
    except (SpectralError, TruncationDomainError, DenseLimitError, PreconditionError) as exc:
        print(f"kemeny: precondition violated: {exc}", file=sys.stderr)
        return 2
    except CapExhausted as exc:
        print(f"kemeny: cap exhausted: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"kemeny: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
