#!/usr/bin/env python3
"""Periodic orbits of forced ODEs through the displacement map.

For each shipped ODE problem: inward check on the sphere |x| = R, sampled
invariance of the ball, then the periodic initial value.  Trajectories are
written as text columns (t, x1, ..., xn) into --out.
"""

import argparse
import warnings
from pathlib import Path

import numpy as np

from bpm.certify import check_ode_inward
from bpm.ode import OdeProblem, check_invariance, find_periodic
from bpm.problem import load_problem

HERE = Path(__file__).resolve().parent.parent
DEFAULT = ["forced_decay", "forced_decay_2d", "expanding"]


def run(path: Path, out: Path, tol: float) -> bool:
    prob = load_problem(path)
    o = prob.ode
    p = OdeProblem(prob.map, o["T"], o["R"], o["lipschitz"], prob.space)
    inward = check_ode_inward(p.field, p.T, p.R, p.space)
    print(f"{path.stem}: T = {p.T:.6g}, R = {p.R:g}")
    print(f"  inward: {inward.verdict.value}  margin {inward.min_margin:.6g}")
    if inward.refuted:
        print(f"  witness (t, x) = {inward.witness.tolist()}; skipping")
        return False
    inv = check_invariance(p)
    print(f"  invariance: {inv.verdict.value}  max radius {inv.details.get('max_radius', float('nan')):.6g}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = find_periodic(p, tol=tol, check_inward=False)
    print(f"  a = {np.round(res.a, 12).tolist()}  |x_a(T) - a| = {res.displacement:.3e}  steps {res.steps}")
    if res.trajectory is not None:
        target = out / f"{path.stem}.traj.txt"
        res.trajectory.save(target)
        print(f"  trajectory -> {target}")
    return res.converged


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problems", nargs="*", help="problem files (default: the shipped ODE problems)")
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--out", default=".", help="directory for trajectory files")
    args = ap.parse_args(argv)
    paths = [Path(p) for p in args.problems] or [HERE / "problems" / f"{n}.prob" for n in DEFAULT]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    found = [run(p, out, args.tol) for p in paths]
    print(f"{sum(found)}/{len(found)} periodic orbits found")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
