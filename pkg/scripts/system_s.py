#!/usr/bin/env python3
"""Walk through the worked system L x + g(x) = 0 on the sup-norm plane.

Prints ell, the a-priori radius R, the homotopy stages, the polished root and
the grid-oracle cross-check.  Usage: python scripts/system_s.py [--tol 1e-12]
"""

import argparse
import time
from pathlib import Path

import numpy as np

from bpm.certify import Lipschitz, check_linear_growth, check_miranda
from bpm.exprlang import lipschitz_estimate
from bpm.geometry import BoxDomain
from bpm.problem import load_problem
from bpm.solve import grid_oracle, proof_homotopy

HERE = Path(__file__).resolve().parent.parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default=str(HERE / "problems" / "system_s.prob"))
    ap.add_argument("--tol", type=float, default=1e-12)
    ap.add_argument("--oracle-grid", type=int, default=61)
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    p = load_problem(args.problem)
    cert = check_linear_growth(p.linear, p.map, p.space, p.growth["alpha"], p.growth["beta"])
    ell, R = cert.details["ell"], cert.details["R"]
    print(f"growth: {cert.verdict.value}  ell = {ell:.15g}  R = {R:.15g}")

    F = p.zero_map()
    box = BoxDomain.cube(R, p.dim)
    est = lipschitz_estimate(F, box, grid=41)
    mir = check_miranda(F, box, Lipschitz(est, max_depth=10))
    print(f"miranda on [-R, R]^2 (estimated L = {est:.4g}): {mir.verdict.value}"
          + (f" ({mir.reason})" if mir.reason else ""))

    res = proof_homotopy(F, p.domain, np.zeros(p.dim), inner_tol=min(args.tol, 1e-10), tol=args.tol)
    # at every stage f(x_n) = (z - x_n) / n, so the last two columns agree
    print(f"{'n':>10} {'|f(x_n)|':>12} {'|x_n - z|/n':>12}  iters")
    shown = res.stages[::4] if (len(res.stages) - 1) % 4 == 0 else res.stages[::4] + res.stages[-1:]
    for s in shown:
        print(f"{s['n']:10.0f} {s['residual']:12.3e} {s['distance_to_anchor'] / s['n']:12.3e}  {s['iterations']}")
    print(f"root x* = {res.x.tolist()}  residual {res.residual:.3e}  ({res.message})")

    xo, ro = grid_oracle(F, p.domain, args.oracle_grid)
    cell = (p.domain.hi - p.domain.lo) / (args.oracle_grid - 1)
    agree = bool(np.all(np.abs(xo - res.x) <= cell))
    print(f"oracle ({args.oracle_grid}^2 lattice): {xo.tolist()}  |F| = {ro:.3e}  within one cell: {agree}")
    print(f"elapsed {time.perf_counter() - t0:.2f} s")
    return 0 if res.converged and agree else 1


if __name__ == "__main__":
    raise SystemExit(main())
