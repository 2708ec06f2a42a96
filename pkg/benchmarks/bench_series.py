"""Time the compiled binomial-series kernel against the numpy fallback.

    python benchmarks/bench_series.py [--repeat 200] [--sizes 2 4 8 16]

Inputs are random contractions with norm 0.9, so both kernels run the
same number of terms; the script checks they agree before timing.
"""
import argparse
import timeit

import numpy as np

from oat._kernels import _series_py

try:
    from oat._kernels import _cseries
except ImportError:
    _cseries = None


def contraction(rng, n, top=0.9):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return x / np.linalg.norm(x, 2) * top


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--sizes", type=int, nargs="+", default=[2, 4, 8, 16])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _cseries is None:
        print("compiled kernel not built; only the fallback can be timed")
    rng = np.random.default_rng(args.seed)
    series_args = (0.5, 1e-12, 20.0, 8, 10_000)
    print(f"{'n':>4} {'terms':>6} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for n in args.sizes:
        x = contraction(rng, n)
        ref = _series_py.binomial_series(x, *series_args)
        py = timeit.timeit(lambda: _series_py.binomial_series(x, *series_args), number=args.repeat)
        py_ms = 1e3 * py / args.repeat
        if _cseries is None:
            print(f"{n:>4} {ref[1]:>6} {py_ms:>10.3f} {'-':>12} {'-':>8}")
            continue
        got = _cseries.binomial_series(x, *series_args)
        if got[1] != ref[1] or not np.allclose(got[0], ref[0], atol=1e-12):
            raise SystemExit(f"kernels disagree at n={n}")
        cy = timeit.timeit(lambda: _cseries.binomial_series(x, *series_args), number=args.repeat)
        cy_ms = 1e3 * cy / args.repeat
        print(f"{n:>4} {ref[1]:>6} {py_ms:>10.3f} {cy_ms:>12.3f} {py_ms / cy_ms:>7.1f}x")


if __name__ == "__main__":
    main()
