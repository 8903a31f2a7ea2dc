"""Compare the compiled and pure-Python kernels on MCES search and Euler sampling.

    python3 benchmarks/bench_kernels.py [--pairs 40] [--repeat 3]
"""

import argparse
import statistics
import time

import numpy as np

from safeflow import _kernels
from safeflow.chemmetrics import mces_distance
from safeflow.molgraph import parse_smiles
from safeflow.toyset import toy_corpus


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_mces(backend, pairs, repeat):
    mols = [parse_smiles(s) for s in toy_corpus(2 * pairs, seed=11, max_atoms=14)]
    work = list(zip(mols[::2], mols[1::2]))

    def run():
        return [mces_distance(a, b, backend=backend) for a, b in work]
    return _best_of(run, repeat)


def bench_euler(backend, repeat, n=100 * 96, k=40):
    rng = np.random.default_rng(0)
    post = rng.dirichlet(np.ones(k), size=n)
    cur = rng.integers(0, k, n)
    u = rng.random(n)

    def run():
        return [backend.euler_sample(post, cur, 0.3, 0.02, u) for _ in range(20)]
    return _best_of(run, repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = [("python", _kernels.python_backend)]
    if _kernels.compiled_backend is not None:
        backends.insert(0, ("cython", _kernels.compiled_backend))
    else:
        print("compiled extension not available; timing the Python fallback only")
    results = {}
    for name, be in backends:
        t_mces, mces_out = bench_mces(be, args.pairs, args.repeat)
        t_euler, euler_out = bench_euler(be, args.repeat)
        results[name] = (t_mces, t_euler, mces_out, euler_out)
        print(f"{name:>7}  mces {args.pairs} pairs: {t_mces:8.3f} s   euler 20 x {100 * 96} rows: {t_euler:8.3f} s")
    if len(results) == 2:
        c, p = results["cython"], results["python"]
        assert c[2] == p[2], "MCES results differ between backends"
        assert all(np.array_equal(a, b) for a, b in zip(c[3], p[3])), "Euler draws differ between backends"
        print(f"speedup  mces x{p[0] / c[0]:.1f}   euler x{p[1] / c[1]:.1f}   (outputs identical)")
        expansions = statistics.mean(r.expansions for r in c[2])
        print(f"mean branch-and-bound expansions per pair: {expansions:.0f}")


if __name__ == "__main__":
    main()
