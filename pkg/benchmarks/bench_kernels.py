"""Compare the compiled and pure-Python tree kernels.

Grows the same trees with both backends, checks that the outputs agree
bit for bit, and reports milliseconds per tree.

    python benchmarks/bench_kernels.py --n 500 --p 50 --trees 20
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from irf import _backend
from irf.simgen import CovSpec, RuleSpec, apply_rule, gen_features
from irf.tree import TreeParams, dense_ranks, integer_weights


def _problem(n: int, p: int, seed: int):
    X = gen_features(n, p, CovSpec(), seed)
    y = apply_rule(X, RuleSpec("AND", range(min(4, p)), -1.0))
    XT = np.ascontiguousarray(X.T)
    counts = np.bincount(np.random.default_rng(seed).integers(0, n, n), minlength=n).astype(np.int32)
    return X, XT, dense_ranks(XT), y, counts


def _time_grow(kernels, args, trees: int, repeats: int):
    XT, RT, y, counts, w, mtry = args
    best, out = np.inf, None
    for _ in range(repeats):
        bg = np.random.PCG64(0)
        t0 = time.perf_counter()
        out = [kernels.grow_tree(XT, RT, y, counts, w, mtry, 1, -1, bg) for _ in range(trees)]
        best = min(best, (time.perf_counter() - t0) / trees)
    return best * 1e3, out


def _time_apply(kernels, X, tree, repeats: int):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        kernels.apply_tree(X, *tree[:4])
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--p", type=int, default=50)
    ap.add_argument("--mtry", type=int, default=None, help="default: floor(sqrt(p))")
    ap.add_argument("--trees", type=int, default=20, help="trees per timing run")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    compiled, python = _backend.compiled_kernels, _backend.python_kernels
    if compiled is None:
        print("compiled extension not available; only the Python kernels can be timed")
    mtry = TreeParams(mtry=args.mtry).resolve_mtry(args.p)
    X, XT, RT, y, counts = _problem(args.n, args.p, args.seed)
    w = integer_weights(np.ones(args.p))
    grow_args = (XT, RT, y, counts, w, mtry)

    print(f"n={args.n} p={args.p} mtry={mtry} trees={args.trees} (best of {args.repeats})")
    rows = []
    results = {}
    for name, k in (("compiled", compiled), ("python", python)):
        if k is None:
            continue
        ms, trees = _time_grow(k, grow_args, args.trees, args.repeats)
        results[name] = trees
        rows.append((name, ms, _time_apply(k, X, trees[0], args.repeats)))
    for name, grow_ms, apply_ms in rows:
        print(f"{name:>9}  grow {grow_ms:9.3f} ms/tree  apply {apply_ms:8.3f} ms/tree")
    if len(rows) == 2:
        print(f"  speed-up  grow {rows[1][1] / rows[0][1]:9.1f}x        apply {rows[1][2] / rows[0][2]:8.1f}x")
        same = all(np.array_equal(a, b) for ta, tb in zip(results["compiled"], results["python"])
                   for a, b in zip(ta, tb))
        print(f"  outputs identical: {same}")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
