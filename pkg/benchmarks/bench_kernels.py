"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Shapes match a student training batch (64 x 128 tokens, 300-dim embeddings,
100 filters). Outputs of the two backends are compared before timing.
"""
import argparse
import json
import timeit

import numpy as np

from gendistill.numerics import kernels


def cases(rng):
    B, T, D, F, V = 64, 128, 300, 100, 4096
    x = rng.standard_normal((B, T, D))
    y = rng.standard_normal((B, T - 2, F))
    n_valid = rng.integers(1, T - 2, size=B)
    dcols = rng.standard_normal((B, T - 2, 3 * D))
    idx = rng.integers(0, T - 2, size=(B, F))
    ids = rng.integers(0, V, size=(B, T))
    dmax = rng.standard_normal((B, F))
    dout = rng.standard_normal((B, T, D))
    return {
        "im2col": lambda f: f(x, 3),
        "col2im": lambda f: f(dcols, 3, T),
        "masked_max_time": lambda f: f(y, n_valid),
        "max_time_bwd": lambda f: f(dmax, idx, T - 2),
        "embedding_scatter": lambda f: f(np.zeros((V, D)), ids, dout),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rows = []
    print(f"{'kernel':<20}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, call in cases(np.random.default_rng(0)).items():
        f_np, f_nb = kernels.get_impl(name, "numpy"), kernels.get_impl(name, "numba")
        a, b = call(f_np), call(f_nb)          # also triggers jit compilation
        for u, v in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-12)
        t_np = min(timeit.repeat(lambda: call(f_np), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: call(f_nb), number=1, repeat=args.repeat)) * 1e3
        rows.append({"kernel": name, "numpy_ms": t_np, "numba_ms": t_nb,
                     "speedup": t_np / t_nb})
        print(f"{name:<20}{t_np:>10.2f}{t_nb:>10.2f}{t_np / t_nb:>8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
