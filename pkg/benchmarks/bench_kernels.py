"""Timing of the compiled kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is called
once to trigger compilation, then timed with :mod:`timeit`.  The numpy
path is what ``IMPSTAB_DISABLE_NUMBA=1`` selects.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from impstab import _kernels as K


def _roots(rng, n):
    return rng.normal(size=n) * 50 + 1j * rng.normal(size=n) * 200


def cases(rng):
    s = 1j * np.linspace(-2000, 2000, 20001)
    z, p = _roots(rng, 12), _roots(rng, 14)
    g = np.exp(1j * np.linspace(0, 40, 20001)) * (1.5 + np.cos(np.linspace(0, 9, 20001)))
    # a product of three polynomials as a sum of factored terms for Aberth
    roots_flat = np.concatenate([_roots(rng, 8), _roots(rng, 8)])
    offsets = np.array([0, 8, 16])
    gains = np.array([1.0 + 0j, -0.5 + 0j])
    z0 = _roots(rng, 8) * 1.1
    A = rng.normal(size=(12, 12))
    a, b = _roots(rng, 60), _roots(rng, 60)
    return {
        "eval_factored": (s, 2.0, z, p),
        "sum_dlog": (s[::50], gains, roots_flat, offsets),
        "aberth": (z0, gains, roots_flat, offsets),
        "greedy_match": (a, b + 1e-9, 1e-6),
        "leverrier": (A,),
        "phase_increments": (g, 0j),
        "central_logderiv": (g, 0.01),
        "track_branches": (g, g[::-1].copy()),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    if not K.HAVE_NUMBA:
        print("numba is not installed; only the numpy path is available")
    print(f"{'kernel':<18} {'numpy [ms]':>11} {'numba [ms]':>11} {'speed-up':>9}")
    for name, call_args in cases(rng).items():
        np_fn, nb_fn = K.implementations(name)
        t_np = min(timeit.repeat(lambda: np_fn(*call_args), number=args.number,
                                 repeat=args.repeat)) / args.number
        if nb_fn is None:
            print(f"{name:<18} {t_np * 1e3:11.3f} {'-':>11} {'-':>9}")
            continue
        nb_fn(*call_args)   # compile
        t_nb = min(timeit.repeat(lambda: nb_fn(*call_args), number=args.number,
                                 repeat=args.repeat)) / args.number
        print(f"{name:<18} {t_np * 1e3:11.3f} {t_nb * 1e3:11.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
