"""Time the compiled and numpy EM kernels on the same fits.

    python benchmarks/bench_kernels.py [--n 50000] [--components 3] [--repeat 3]

Both backends are run on identical inputs; the script also reports the
largest parameter difference between them.
"""

import argparse
import time

import numpy as np

from emperor import kernels
from emperor.gmm1d import EMConfig, fit_gmm1d
from emperor.model import make_rng


def make_samples(n, k, seed):
    rng = make_rng(seed)
    centers = np.linspace(-4.0, 4.0, k)
    labels = rng.integers(0, k, n)
    return centers[labels] + rng.standard_normal(n)


def time_backend(name, y, config, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        rep = fit_gmm1d(y, config, backend=name)
        best = min(best, time.perf_counter() - t0)
    return best, rep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50000)
    ap.add_argument("--components", type=int, default=3)
    ap.add_argument("--restarts", type=int, default=1)
    ap.add_argument("--max-iters", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    y = make_samples(args.n, args.components, 0)
    cfg = EMConfig(components=args.components, restarts=args.restarts, max_iters=args.max_iters, rel_tol=0.0)
    print(f"N={args.n} K={args.components} iterations={args.max_iters} restarts={args.restarts}")
    results = {}
    for name in kernels.available():
        sec, rep = time_backend(name, y, cfg, args.repeat)
        results[name] = (sec, rep)
        print(f"{name:<8} {sec * 1e3:10.1f} ms  loglik={rep.final_loglik:.10g}")
    if "cython" in results:
        a, b = results["python"][1].gmm, results["cython"][1].gmm
        diff = max(np.abs(a.weights - b.weights).max(), np.abs(a.means - b.means).max(), np.abs(a.stddevs - b.stddevs).max())
        print(f"speedup  {results['python'][0] / results['cython'][0]:.2f}x   max parameter difference {diff:.2e}")
    else:
        print("compiled kernels not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
