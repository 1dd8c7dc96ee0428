"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from istd_forge import kernels
from istd_forge.regen import _blend_system, _origins


def cases(g):
    patch, bg = g.random((19, 19)), g.random((512, 640))
    ys, xs = _origins(bg.shape[0], 19, 8), _origins(bg.shape[1], 19, 8)
    mask = g.random((512, 640)) < 0.05
    src, win = g.random((40, 40)), g.random((40, 40))
    b, x0 = _blend_system(src, win)
    return {
        "ssim_scan 19x19 on 640x512": lambda k: k.ssim_scan(patch, bg, ys, xs, 1e-4, 9e-4),
        "label8 640x512, 5% fill": lambda k: k.label8(mask),
        "cg_poisson 40x40 window": lambda k: k.cg_poisson(x0, b, 1e-5, 10000),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is available")
    g = np.random.default_rng(0)
    print(f"{'kernel':32s}" + "".join(f"{name:>12s}" for name in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label, fn in cases(g).items():
        times = {name: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) for name, mod in backends.items()}
        row = f"{label:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times.values())
        if len(times) > 1:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
