#!/usr/bin/env python3
"""Miranda sign checks on a small family of maps, sampled vs Lipschitz rigor.

Each row: map, dimension, verdict under face sampling, verdict under
Lipschitz subdivision, and the minimum face margin from a dense oracle grid.
"""

import argparse
import math
import time

import numpy as np

from bpm import geometry as geo
from bpm.certify import Lipschitz, Sampled, check_miranda
from bpm.geometry import BoxDomain


def neg(x):
    return -np.asarray(x, dtype=float)


def perturbed(x):
    return np.array([-x[0] + 0.1 * math.sin(x[1]), -x[1] + 0.1 * math.sin(x[0])])


def swap(x):
    return np.array([x[1], x[0]])


def saddle(x):
    return np.array([x[0], -x[1]])


def cubic(x):
    x = np.asarray(x, dtype=float)
    return -(x**3) + 0.2 * np.roll(x, 1)


# name, map, dimensions, half-width, Lipschitz constant in the sup norm
SUITE = [
    ("-x", neg, (1, 2, 3, 4), 1.0, 1.0),
    ("-x + 0.1 sin", perturbed, (2,), 1.0, 1.1),
    ("-x^3 + 0.2 roll", cubic, (2, 3), 1.0, 3.2),
    ("swap", swap, (2,), 1.0, 1.0),
    ("saddle", saddle, (2,), 1.0, 1.0),
]


def oracle_margin(f, box, density):
    return min(-face.side * f(p)[face.axis - 1] for p, face in geo.boundary_grid(box, density))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--density", type=int, default=9, help="sampled-mode points per face axis")
    ap.add_argument("--oracle", type=int, default=101, help="oracle points per face axis")
    args = ap.parse_args(argv)
    print(f"{'map':<16} {'n':>2}  {'sampled':<13} {'lipschitz':<13} {'oracle margin':>13}  {'secs':>5}")
    for name, f, dims, half, lip in SUITE:
        for n in dims:
            box = BoxDomain.cube(half, n)
            t0 = time.perf_counter()
            s = check_miranda(f, box, Sampled(args.density))
            l_ = check_miranda(f, box, Lipschitz(lip))
            dens = args.oracle if n <= 2 else max(5, int(args.oracle ** (1.0 / (n - 1))) * 2)
            m = oracle_margin(f, box, dens)
            dt = time.perf_counter() - t0
            print(f"{name:<16} {n:>2}  {s.verdict.value:<13} {l_.verdict.value:<13} {m:13.6f}  {dt:5.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
