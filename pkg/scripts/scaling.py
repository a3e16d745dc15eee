"""Time ImprovedMC on k-out random digraphs of growing size and fit a log-log slope."""
import argparse
import time

import numpy as np

from kemeny.config import EstimatorConfig
from kemeny.generators import random_k_out
from kemeny.spectral import spectral_info
from kemeny.walks import improved_mc


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", nargs="+", type=int, default=[10**4, 10**5, 10**6])
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--epsilon", type=float, default=0.3)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    a = ap.parse_args()

    est_times = []
    print("n_input,n_lscc,generate_s,spectral_s,lambda,estimator_s_median,estimate")
    for n in a.sizes:
        t0 = time.perf_counter()
        g = random_k_out(n, a.k, 0)
        t1 = time.perf_counter()
        info = spectral_info(g)
        t2 = time.perf_counter()
        reps = [improved_mc(g, info, EstimatorConfig(epsilon=a.epsilon, seed=s, threads=a.threads))
                for s in range(a.repeats)]
        med = float(np.median([r.elapsed for r in reps]))
        est_times.append(med)
        print(f"{n},{g.n},{t1 - t0:.2f},{t2 - t1:.2f},{info.lam:.5f},{med:.3f},{reps[0].estimate:.2f}")
    if len(a.sizes) > 1:
        slope = np.polyfit(np.log(a.sizes), np.log(est_times), 1)[0]
        print(f"fitted exponent of estimator time vs n: {slope:.3f}")


if __name__ == "__main__":
    main()
