"""Time the compiled kernels against the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py [--n 256] [--repeat 20]``. Prints
one line per kernel with the median time of each backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from tvcs import kernels


def _cases(n, rng):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    g1, g2 = rng.normal(size=(n, n)) + 0j, rng.normal(size=(n, n)) + 0j
    flat = np.ascontiguousarray(rng.random((n, n)) < 0.7, dtype=np.uint8)
    return {
        "grad2d": lambda impl: impl.grad2d(x),
        "grad2d_adjoint": lambda impl: impl.grad2d_adjoint(g1, g2),
        "shrink_iso": lambda impl: impl.shrink_iso(g1, g2, 0.5),
        "shrink_soft": lambda impl: impl.shrink_soft(x.ravel(), 0.5),
        "label_components": lambda impl: impl.label_components(flat),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)
    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"N={args.n}, median of {args.repeat} runs")
    print(f"{'kernel':<18}" + "".join(f"{name:>14}" for name in impls) + f"{'speedup':>10}")
    for name, fn in _cases(args.n, rng).items():
        times = {}
        for label, impl in impls.items():
            runs = timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)
            times[label] = float(np.median(runs))
        row = f"{name:<18}" + "".join(f"{times[k] * 1e3:>11.3f} ms" for k in impls)
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
