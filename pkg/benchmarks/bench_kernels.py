"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--rows 2000] [--cols 800] [--repeat 3]
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from cfbench import kernels
from cfbench.baselines.factor import sample_triples


def synthetic(rows, cols, density, seed):
    rng = np.random.default_rng(seed)
    # skewed item popularity, roughly like rating data
    pop = rng.pareto(1.2, cols) + 1.0
    pop /= pop.sum()
    nnz = int(rows * cols * density)
    r = rng.integers(0, rows, nnz)
    c = rng.choice(cols, nnz, p=pop)
    x = sp.csr_matrix((np.ones(nnz), (r, c)), shape=(rows, cols))
    x.data[:] = 1.0
    return x


def bench_cd(impl, x, n_targets):
    csc = x.tocsc()
    col_ptr = csc.indptr.astype(np.int64)
    col_rows = csc.indices.astype(np.int64)
    col_sq = np.asarray(csc.sum(axis=0)).ravel()
    n = x.shape[0]
    start = time.perf_counter()
    for j in range(n_targets):
        cand = np.array([c for c in range(x.shape[1]) if c != j], dtype=np.int64)
        resid = np.zeros(n)
        resid[col_rows[col_ptr[j]:col_ptr[j + 1]]] = 1.0
        impl.elastic_net_cd(col_ptr, col_rows, col_sq, cand, np.zeros(len(cand)), resid,
                            n * 1e-4, n * 1e-3, 20, 1e-4)
    return time.perf_counter() - start


def bench_bpr(impl, x, factors):
    rng = np.random.default_rng(0)
    P = rng.normal(0, 0.1, (x.shape[0], factors))
    Q = rng.normal(0, 0.1, (x.shape[1], factors))
    users, pos, neg = sample_triples(x, rng)
    start = time.perf_counter()
    impl.bpr_epoch(P, Q, users, pos, neg, 0.05, 1e-4)
    return time.perf_counter() - start, len(users)


def bench_adam(impl, size, steps):
    rng = np.random.default_rng(0)
    p = rng.normal(0, 0.1, size).astype(np.float32)
    g = rng.normal(0, 0.1, size).astype(np.float32)
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    start = time.perf_counter()
    for t in range(1, steps + 1):
        impl.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8,
                         1e-3 / (1 - 0.9 ** t), 1 / np.sqrt(1 - 0.999 ** t))
    return time.perf_counter() - start


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--cols", type=int, default=800)
    ap.add_argument("--density", type=float, default=0.03)
    ap.add_argument("--targets", type=int, default=20, help="SLIM target columns to fit")
    ap.add_argument("--factors", type=int, default=32)
    ap.add_argument("--adam-size", type=int, default=400_000, help="parameters per ADAM step")
    ap.add_argument("--adam-steps", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    x = synthetic(args.rows, args.cols, args.density, 0)
    print(f"matrix {x.shape[0]} x {x.shape[1]}, nnz {x.nnz}")
    names = ["python"]
    try:
        kernels.get_backend("cython")
        names.append("cython")
    except ImportError:
        print("compiled kernels not built; timing the fallback only")

    results = {}
    for name in names:
        impl = kernels.get_backend(name)
        cd = min(bench_cd(impl, x, args.targets) for _ in range(args.repeat))
        bpr = min(bench_bpr(impl, x, args.factors)[0] for _ in range(args.repeat))
        adam = min(bench_adam(impl, args.adam_size, args.adam_steps) for _ in range(args.repeat))
        results[name] = (cd, bpr, adam)
        print(f"{name:>7}: elastic-net CD {cd:8.4f} s ({args.targets} targets)   "
              f"BPR epoch {bpr:8.4f} s ({x.nnz} triples)   "
              f"ADAM {adam:8.4f} s ({args.adam_steps} steps)")
    if len(results) == 2:
        (pc, pb, pa), (cc, cb, ca) = results["python"], results["cython"]
        print(f"speed-up: elastic-net CD x{pc / cc:.1f}, BPR x{pb / cb:.1f}, ADAM x{pa / ca:.1f}")


if __name__ == "__main__":
    main()
