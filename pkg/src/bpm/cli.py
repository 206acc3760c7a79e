"""``bpm certify|solve|periodic <problem file>``.

Exit codes.  certify: 0 certified, 1 refuted, 2 inconclusive.  solve: 0
converged, 2 not converged, 3 solver precondition failure.  periodic: 0 found,
1 inward condition refuted (unless ``--force``), 2 not converged.  Any other
failure (bad flags, unreadable or invalid problem file, missing section)
exits with 4.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import geometry as geo
from .certify import (
    Condition,
    Lipschitz,
    MonteCarlo,
    Sampled,
    check_bolzano,
    check_hilbert_cube,
    check_linear_growth,
    check_miranda,
    check_normal_cone,
    check_ode_inward,
    check_pairing_sign,
    check_ray_condition,
)
from .exprlang import EvalError, lipschitz_estimate
from .geometry import BallDomain, BoxDomain, HilbertCubeDomain
from .ode import IntegrationError, OdeProblem, check_invariance, find_periodic
from .pairing import Norm, PairingKind
from .problem import ProblemError, ProblemFile, load_problem
from .solve import PreconditionError, RootResult, bisect, grid_oracle, newton_project, proof_homotopy

EXIT_ERROR = 4
CONDITIONS = [c.value for c in Condition if c is not Condition.ODE_INVARIANCE]
METHODS = ["bisect", "homotopy", "newton", "oracle"]


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# report serialization: sorted keys, 17 significant digits


def _fmt(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return '"nan"'
        if math.isinf(f):
            return '"inf"' if f > 0 else '"-inf"'
        return "%.17g" % f
    if isinstance(v, str):
        return _quote(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _quote(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ch == "\n":
            out.append("\\n")
        elif ord(ch) < 0x20:
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def dumps(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {dumps(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_fmt(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    return _fmt(obj)


def build_report(command: str, problem: ProblemFile, body: dict, settings: dict,
                 elapsed: Optional[float]) -> dict:
    report = {
        "tool": {"name": "bpm", "version": __version__},
        "command": command,
        "problem": {"path": problem.path, "digest": problem.digest, "dim": problem.dim,
                    "norm": problem.space.label},
        "settings": settings,
        "result": body,
    }
    report["report_digest"] = hashlib.sha256(dumps(report).encode("utf-8")).hexdigest()
    if elapsed is not None:
        report["timing"] = {"seconds": elapsed}
    return report


# --------------------------------------------------------------------------
# rigor and domain helpers


def auto_density(dim: int, points: int = 100_000, cap: int = 21) -> int:
    """Largest per-axis density (<= cap) keeping about ``points`` boundary samples."""
    if dim <= 1:
        return cap
    return int(max(2, min(cap, math.floor((points / (2 * dim)) ** (1.0 / (dim - 1))))))


def _grid(args, dim: int) -> int:
    return args.grid if args.grid is not None else auto_density(dim)


def _rigor(args, f, domain):
    if args.mode == "sampled":
        return Sampled(_grid(args, domain.dim))
    if args.mode == "montecarlo":
        return MonteCarlo(args.samples, args.seed)
    depth, budget = args.depth, args.budget
    if args.lipschitz is not None:
        return Lipschitz(args.lipschitz, depth, budget, source="user")
    box = geo.as_box(domain)
    if box.dim > 4:
        raise UsageError("--mode lipschitz needs --lipschitz above dimension 4")
    est = lipschitz_estimate(f, box, grid=min(_grid(args, box.dim), 41))
    return Lipschitz(est, depth, budget, source="estimate")


def _box(problem: ProblemFile, what: str) -> BoxDomain:
    d = problem.domain
    if isinstance(d, BoxDomain):
        return d
    if isinstance(d, BallDomain) and d.space.norm is Norm.LINF:
        return geo.as_box(d)
    if isinstance(d, HilbertCubeDomain):
        return geo.as_box(d)
    raise UsageError(f"{what} needs a box domain")


def _anchor(problem: ProblemFile) -> np.ndarray:
    return problem.anchor if problem.anchor is not None else np.asarray(problem.domain.center, dtype=float)


def _ode_problem(problem: ProblemFile) -> OdeProblem:
    if problem.ode is None:
        raise UsageError("this command needs an [ode] section")
    o = problem.ode
    return OdeProblem(problem.map, o["T"], o["R"], o["lipschitz"], problem.space)


# --------------------------------------------------------------------------
# commands


def cmd_certify(args, problem: ProblemFile) -> tuple[int, dict, dict]:
    cond = Condition(args.condition)
    F = problem.zero_map()
    settings = {"condition": cond.value}
    if cond is Condition.ODE_INWARD:
        p = _ode_problem(problem)
        grid = args.grid if args.grid is not None else 33
        cert = check_ode_inward(p.field, p.T, p.R, p.space, t_density=grid, x_density=grid)
        settings["grid"] = grid
    elif cond is Condition.LINEAR_GROWTH:
        if problem.linear is None or problem.growth is None:
            raise UsageError("growth needs [linear] and [growth] sections")
        grid = _grid(args, problem.dim)
        cert = check_linear_growth(problem.linear, problem.map, problem.space, problem.growth["alpha"],
                                   problem.growth["beta"], density=grid)
        settings["grid"] = grid
    elif cond is Condition.BOLZANO:
        if problem.dim != 1:
            raise UsageError("bolzano needs dim = 1")
        box = _box(problem, "bolzano")
        cert = check_bolzano(F, float(box.lo[0]), float(box.hi[0]))
    else:
        if cond is Condition.HILBERT_CUBE:
            if not isinstance(problem.domain, HilbertCubeDomain):
                raise UsageError("hilbert-cube needs a hilbert_cube domain")
            domain = problem.domain
        elif cond in (Condition.MIRANDA, Condition.NORMAL_CONE):
            domain = _box(problem, cond.value)
        else:
            domain = problem.domain
        rigor = _rigor(args, F, domain)
        settings["rigor"] = rigor.to_dict()
        if cond is Condition.MIRANDA:
            cert = check_miranda(F, domain, rigor)
        elif cond is Condition.NORMAL_CONE:
            cert = check_normal_cone(F, domain, rigor)
        elif cond is Condition.HILBERT_CUBE:
            cert = check_hilbert_cube(F, domain.truncation, rigor)
        elif cond is Condition.PAIRING_SIGN:
            settings["pairing"] = args.pairing
            cert = check_pairing_sign(F, domain, _anchor(problem), problem.space, args.pairing, rigor)
        else:
            cert = check_ray_condition(F, domain, _anchor(problem), rigor)
    code = 0 if cert.certified else (1 if cert.refuted else 2)
    lines = [f"{cond.value}: {cert.verdict.value}"]
    if cert.margins:
        lines.append(f"min margin: {cert.min_margin!r}")
    for key in ("ell", "R"):
        if key in cert.details:
            lines.append(f"{key} = {cert.details[key]!r}")
    if cert.witness is not None:
        lines.append(f"witness: {np.asarray(cert.witness).tolist()}")
    if cert.reason:
        lines.append(f"reason: {cert.reason}")
    if cert.conclusion:
        lines.append(f"conclusion: {cert.conclusion}")
    _echo(lines, args)
    return code, {"certificate": cert.to_dict()}, settings


def cmd_solve(args, problem: ProblemFile) -> tuple[int, dict, dict]:
    F = problem.zero_map()
    tol = args.tol
    settings = {"method": args.method, "tol": tol}
    domain = problem.domain
    if isinstance(domain, HilbertCubeDomain):
        domain = geo.as_box(domain)
    if args.method == "bisect":
        if problem.dim != 1:
            raise UsageError("bisect needs dim = 1")
        box = _box(problem, "bisect")
        res = bisect(F, float(box.lo[0]), float(box.hi[0]), tol=tol)
    elif args.method == "homotopy":
        res = proof_homotopy(F, domain, _anchor(problem), inner_tol=min(tol, 1e-10), tol=tol)
    elif args.method == "newton":
        x0 = args.x0 if args.x0 is not None else problem.x0
        x0 = np.asarray(domain.center if x0 is None else x0, dtype=float)
        if x0.size != problem.dim:
            raise UsageError(f"--x0 needs {problem.dim} values")
        settings["x0"] = x0
        res = newton_project(F, domain, x0, tol=tol)
    else:
        if problem.dim > 4:
            raise UsageError("oracle is limited to dimension <= 4")
        x, r = grid_oracle(F, domain, args.grid)
        settings["grid"] = args.grid
        res = RootResult(x, r, args.grid ** problem.dim, "oracle", True, "best lattice point")
    code = 0 if res.converged else 2
    _echo([f"{res.method}: {'converged' if res.converged else 'not converged'}",
           f"x = {[float(v) for v in res.x]!r}", f"residual = {res.residual!r}",
           f"iterations = {res.iterations}"] + ([res.message] if res.message else []), args)
    return code, {"root": res.to_dict()}, settings


def cmd_periodic(args, problem: ProblemFile) -> tuple[int, dict, dict]:
    p = _ode_problem(problem)
    settings = {"tol": args.tol, "force": bool(args.force)}
    inward = check_ode_inward(p.field, p.T, p.R, p.space, t_density=args.grid, x_density=args.grid)
    body = {"inward": inward.to_dict()}
    if inward.refuted and not args.force:
        _echo([f"inward condition refuted at t, x = {inward.witness.tolist()}", "not solving (use --force)"], args)
        return 1, body, settings
    body["invariance"] = check_invariance(p).to_dict()
    res = find_periodic(p, tol=args.tol, check_inward=False)
    body["periodic"] = res.to_dict()
    path = args.trajectory
    if path is None and args.report is not None:
        path = str(Path(args.report).with_suffix("")) + ".traj.txt"
    if path is not None and res.trajectory is not None:
        res.trajectory.save(path)
    body["trajectory_file"] = path
    code = 0 if res.converged else 2
    _echo([f"periodic: {'found' if res.converged else 'not converged'}",
           f"a = {[float(v) for v in res.a]!r}", f"displacement = {res.displacement!r}",
           f"max radius = {res.max_radius!r}", f"rk4 steps = {res.steps}"]
          + ([res.message] if res.message else []), args)
    return code, body, settings


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _vec_arg(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bpm", description="Zero-existence certificates and solvers for nonlinear maps.")
    ap.add_argument("--version", action="version", version=f"bpm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("problem", help="problem file")
        p.add_argument("--report", help="write the JSON report here")
        p.add_argument("--no-timing", action="store_true", help="omit wall-clock timing from the report")
        p.add_argument("--quiet", action="store_true")

    c = sub.add_parser("certify", help="check an existence condition")
    common(c)
    c.add_argument("--condition", required=True, choices=CONDITIONS)
    c.add_argument("--mode", choices=["sampled", "lipschitz", "montecarlo"], default="sampled")
    c.add_argument("--grid", type=int, help="points per axis (default: 21, fewer in high dimension)")
    c.add_argument("--lipschitz", type=float, help="Lipschitz constant of the map (lipschitz mode)")
    c.add_argument("--depth", type=int, default=12)
    c.add_argument("--budget", type=int, default=200_000)
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--pairing", choices=[k.value for k in PairingKind], default="plus")

    s = sub.add_parser("solve", help="compute a zero")
    common(s)
    s.add_argument("--method", choices=METHODS, default="homotopy")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--x0", type=_vec_arg, help="Newton start, e.g. 1,0")
    s.add_argument("--grid", type=int, default=61, help="oracle lattice resolution")

    p = sub.add_parser("periodic", help="find a T-periodic solution")
    common(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--grid", type=int, default=33, help="sphere/time sampling density of the inward check")
    p.add_argument("--trajectory", help="write trajectory columns (t, x1..xn) here")
    p.add_argument("--force", action="store_true", help="solve even if the inward check is refuted")
    return ap


def _echo(lines, args):
    if not args.quiet:
        print("\n".join(lines))


COMMANDS = {"certify": cmd_certify, "solve": cmd_solve, "periodic": cmd_periodic}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        problem = load_problem(args.problem)
        code, body, settings = COMMANDS[args.command](args, problem)
    except PreconditionError as exc:
        print(f"bpm: precondition failed: {exc}", file=sys.stderr)
        return 3 if args.command == "solve" else EXIT_ERROR
    except (ProblemError, UsageError, ValueError, EvalError, IntegrationError) as exc:
        print(f"bpm: {exc}", file=sys.stderr)
        return EXIT_ERROR
    elapsed = None if args.no_timing else time.perf_counter() - t0
    report = build_report(args.command, problem, body, settings, elapsed)
    if args.report:
        Path(args.report).write_text(dumps(report) + "\n", encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
