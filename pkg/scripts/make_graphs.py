"""Write synthetic strongly connected test graphs as edge lists."""
import argparse
from pathlib import Path

from kemeny.generators import preferential_digraph, random_k_out
from kemeny.graph import write_edge_list

FAMILIES = {
    "kout": lambda n, k, seed: random_k_out(n, k, seed),
    "pref": lambda n, k, seed: preferential_digraph(n, k, seed),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", choices=sorted(FAMILIES), default="kout")
    ap.add_argument("--sizes", nargs="+", type=int, default=[1200, 2000, 4500])
    ap.add_argument("--k", type=int, default=3, help="out-degree per node")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="graphs")
    a = ap.parse_args()
    out = Path(a.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for n in a.sizes:
        g = FAMILIES[a.family](n, a.k, a.seed)
        path = out / f"{a.family}{a.k}_n{n}_s{a.seed}.txt"
        write_edge_list(g, path)
        print(f"{path}: {g.n} nodes in the largest strongly connected component")


if __name__ == "__main__":
    main()
