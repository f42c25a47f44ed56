"""Time the compiled kernels against the numpy fallback.

Run from the repository root after ``pip install -e .``::

    python3 benchmarks/bench_kernels.py [--bins 129] [--frames 505] [--mics 4] [--repeat 5]

Each kernel gets the same random batch; the script also reports the largest
difference between the two backends so a speedup never hides a wrong answer.
"""
import argparse
import timeit

import numpy as np

from maskbf import _fallback
from maskbf.kernels import BACKEND

try:
    from maskbf import _kernels
except ImportError:
    _kernels = None


def make_inputs(bins, frames, mics, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((bins, frames, mics)) + 1j * rng.standard_normal((bins, frames, mics))
    m = rng.uniform(0, 1, (bins, frames))
    a = np.einsum("ftn,ftm->fnm", x, np.conj(x)) / frames
    b = np.einsum("ftn,ftm->fnm", x * m[..., None], np.conj(x)) / frames + 1e-3 * np.eye(mics)
    return x, m, a, b


def bench(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--bins", type=int, default=129)
    parser.add_argument("--frames", type=int, default=505)
    parser.add_argument("--mics", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels is None:
        print(f"compiled extension not built (active backend: {BACKEND}); nothing to compare")
        return 1

    x, m, a, b = make_inputs(args.bins, args.frames, args.mics)
    cases = [
        ("weighted_cov", (x, m), lambda r: r),
        ("heev_batch", (a,), lambda r: r[0]),
        ("gev_batch", (a, b), lambda r: r[0]),
    ]
    print(f"batch: {args.bins} bins x {args.frames} frames x {args.mics} mics")
    print(f"{'kernel':<14}{'compiled [ms]':>15}{'fallback [ms]':>15}{'speedup':>10}{'max diff':>12}")
    for name, inputs, pick in cases:
        fast, slow = getattr(_kernels, name), getattr(_fallback, name)
        diff = np.abs(pick(fast(*inputs)) - pick(slow(*inputs))).max()
        t_fast = bench(fast, inputs, args.repeat)
        t_slow = bench(slow, inputs, args.repeat)
        print(f"{name:<14}{1e3 * t_fast:>15.3f}{1e3 * t_slow:>15.3f}{t_slow / t_fast:>10.1f}{diff:>12.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
