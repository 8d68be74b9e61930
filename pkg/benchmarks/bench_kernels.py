"""Compare the compiled and pure-Python coordinate-descent kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each case builds a Gram system from a random unit-column dictionary and
times ``bpdn_gram`` and ``lasso_cd`` under both backends, checking that the
two return the same solution.
"""
import argparse
import time

import numpy as np

from bbsrc import _cd_py
from bbsrc.sparse import residual_tolerance

try:
    from bbsrc import _cd
except ImportError:
    _cd = None

# (rows, atoms): block-ensemble sized systems and a larger whole-image one
CASES = [(256, 39), (625, 173), (1024, 79), (4096, 173)]


def system(l, s, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(l, s))
    A /= np.linalg.norm(A, axis=0)
    y = A[:, :3] @ rng.normal(size=3) + 0.3 * rng.normal(size=l)
    G = np.ascontiguousarray(A.T @ A)
    b = np.ascontiguousarray(A.T @ y)
    return G, b, float(y @ y)


def best_time(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = [("python", _cd_py)] + ([("cython", _cd)] if _cd is not None else [])
    if _cd is None:
        print("compiled extension not built; timing the Python kernels only")
    print(f"{'case':>12} {'kernel':>10} " + " ".join(f"{n:>10}" for n, _ in backends) + "   speedup  max|dx|")
    for l, s in CASES:
        G, b, yy = system(l, s, seed=l + s)
        eps = 0.05 * np.sqrt(yy)   # default relative residual bound
        lam = 0.1 * float(np.max(np.abs(b)))
        jobs = {
            "bpdn_gram": lambda m: m.bpdn_gram(G, b, yy, eps, residual_tolerance(eps))[0],
            "lasso_cd": lambda m: m.lasso_cd(G, b, lam)[0],
        }
        for kname, job in jobs.items():
            xs, ts = [], []
            for _, mod in backends:
                x, t = best_time(lambda: job(mod), args.repeat)
                xs.append(np.asarray(x))
                ts.append(t)
            gap = max(float(np.max(np.abs(x - xs[0]))) for x in xs)
            speed = f"{ts[0] / ts[-1]:8.1f}x" if len(ts) > 1 else "       -"
            print(f"{l:>5}x{s:<6} {kname:>10} " + " ".join(f"{t * 1e3:8.2f}ms" for t in ts)
                  + f"  {speed}  {gap:.1e}")


if __name__ == "__main__":
    main()
