"""Time the compiled kernels against the numpy fallback and check they agree.

    python benchmarks/bench_backends.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from dppflow._backend import compiled_kernels, python_kernels


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def cases(rng):
    x = rng.standard_normal((10_000, 256))
    w = rng.standard_normal((256, 256)) / 16
    b = rng.standard_normal(256)
    cost = rng.random((256, 256))
    a, c = rng.standard_normal((256, 2)) * 2, rng.standard_normal((256, 2)) * 3
    ot = np.einsum("ijk,ijk->ij", a[:, None] - c[None], a[:, None] - c[None])
    sym = rng.standard_normal((32, 32))
    sym = sym + sym.T
    pts = rng.standard_normal((1000, 10, 2))
    return [
        ("dense 10000x256x256", lambda K: K.dense(x, w, b)),
        ("hungarian 256", lambda K: K.hungarian(cost)),
        ("sinkhorn 256, 200 iters", lambda K: K.sinkhorn_log(ot, 0.02, 200)),
        ("jacobi 32", lambda K: np.sort(K.jacobi_eigenvalues(sym)[0])),
        ("dpp_grad 1000x10x2 exact", lambda K: K.dpp_grad_batch(pts, 1.0, None, 0, 10)[:2]),
        ("dpp_grad 1000x10x2 soft", lambda K: K.dpp_grad_batch(pts, 1.0, None, 1, 10)[:2]),
        ("pg_grad 1000x10x2", lambda K: K.pg_grad_batch(pts, 1.0)[0]),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled_kernels is None:
        print("compiled extension not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in cases(rng):
        tc, oc = _best(lambda: fn(compiled_kernels), args.repeat)
        tp, op = _best(lambda: fn(python_kernels), args.repeat)
        print(f"{name:28s} {tc:11.4f} {tp:10.4f} {tp / tc:8.1f} {_diff(oc, op):11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
