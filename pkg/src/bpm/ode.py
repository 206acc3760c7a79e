"""Periodic solutions of x' = f(t, x) through the Poincare displacement map.

``F(a) = x_a(T) - a`` vanishes exactly at initial values of T-periodic
solutions.  When the field points inward on the sphere ``|x| = R`` the ball
``B_R[0]`` is invariant under the flow and the boundary pairing of ``F`` has a
constant sign, so the generic homotopy solver applies to ``F`` unchanged.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from . import geometry as geo
from .certify import Certificate, Condition, Sampled, Verdict, check_ode_inward
from .exprlang import EvalError, MapSpec, call_map
from .geometry import BallDomain, BoxDomain
from .pairing import Norm, Space, norm
from .solve import newton_project, proof_homotopy

__all__ = [
    "OdeProblem",
    "Trajectory",
    "PeriodicResult",
    "IntegrationError",
    "integrate",
    "gronwall_budget",
    "poincare_displacement",
    "check_invariance",
    "find_periodic",
    "MIN_STEPS",
    "MAX_STEPS",
]

MIN_STEPS = 16
MAX_STEPS = 200_000


class IntegrationError(ArithmeticError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t!r}")
        self.t = t


@dataclass(frozen=True, eq=False)
class OdeProblem:
    field: Callable
    T: float
    R: float
    lipschitz_L: float
    space: Optional[Space] = None

    def __post_init__(self):
        if not (self.T > 0 and self.R > 0 and self.lipschitz_L > 0):
            raise ValueError("T, R and the Lipschitz constant must be positive")
        if isinstance(self.field, MapSpec) and not self.field.time_dependent:
            raise ValueError("the ODE field must be a time-dependent map")
        if self.space is None:
            dim = self.field.dim_in if isinstance(self.field, MapSpec) else None
            if dim is None:
                raise ValueError("give a space for plain-callable fields")
            object.__setattr__(self, "space", Space(dim))

    @property
    def dim(self) -> int:
        return self.space.dim


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (len(t), n)

    def __len__(self):
        return self.t.size

    def __iter__(self) -> Iterator[tuple[float, np.ndarray]]:
        return zip(self.t.tolist(), self.x)

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def to_text(self) -> str:
        lines = []
        for ti, xi in zip(self.t, self.x):
            lines.append(" ".join(f"{v:.17g}" for v in (ti, *xi)))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())


@dataclass
class PeriodicResult:
    a: np.ndarray
    displacement: float
    max_radius: float
    steps: int
    converged: bool
    message: str = ""
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "a": np.asarray(self.a, float).tolist(),
            "displacement": float(self.displacement),
            "max_radius": float(self.max_radius),
            "steps": int(self.steps),
            "converged": bool(self.converged),
            "message": self.message,
        }


def _list_field(f: Callable):
    """f(t, xl) -> list of floats, avoiding numpy overhead for compiled maps."""
    if isinstance(f, MapSpec):
        fns = f._fns
        return lambda t, xl: [fn(xl, t) for fn in fns]
    return lambda t, xl: call_map(f, np.asarray(xl, dtype=float), t).tolist()


def _rk4(f: Callable, T: float, a, steps: int, keep: bool):
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rhs = _list_field(f)
    h = T / steps
    x = [float(v) for v in np.asarray(a, dtype=float).reshape(-1)]
    n = len(x)
    rng = range(n)
    out = [list(x)] if keep else None
    t = 0.0
    try:
        for k in range(steps):
            t = k * h
            k1 = rhs(t, x)
            k2 = rhs(t + 0.5 * h, [x[i] + 0.5 * h * k1[i] for i in rng])
            k3 = rhs(t + 0.5 * h, [x[i] + 0.5 * h * k2[i] for i in rng])
            k4 = rhs(t + h, [x[i] + h * k3[i] for i in rng])
            x = [x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in rng]
            if not all(math.isfinite(v) for v in x):
                raise IntegrationError("non-finite state", (k + 1) * h)
            if keep:
                out.append(x)
    except (ValueError, ZeroDivisionError, OverflowError, EvalError) as exc:
        raise IntegrationError(str(exc), t) from None
    return (np.asarray(out) if keep else np.asarray(x)), h


def integrate(p: OdeProblem, a, steps: int) -> Trajectory:
    """Classical fixed-step RK4 on [0, T]; returns every node."""
    xs, h = _rk4(p.field, p.T, a, steps, keep=True)
    ts = np.arange(steps + 1) * h
    ts[-1] = p.T
    return Trajectory(ts, xs)


def _endpoint(p: OdeProblem, a, steps: int) -> np.ndarray:
    return _rk4(p.field, p.T, a, steps, keep=False)[0]


def gronwall_budget(p: OdeProblem, target_err: float, probe_steps: int = 32) -> int:
    """Step count keeping ``C h^4 e^(L T)`` below ``target_err``.

    ``C`` comes from comparing ``probe_steps`` and ``2 * probe_steps`` runs at
    a few initial values in ``B_R[0]`` (Richardson: the difference is about
    ``C h^4 (1 - 1/16)``).  Never fewer than MIN_STEPS.
    """
    if not target_err > 0:
        raise ValueError("target_err must be positive")
    n = p.dim
    probes = [np.zeros(n)]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        probes.append(p.R * e / norm(p.space, e))
    h0 = p.T / probe_steps
    diff = 0.0
    for a in probes:
        coarse = _endpoint(p, a, probe_steps)
        fine = _endpoint(p, a, 2 * probe_steps)
        diff = max(diff, norm(p.space, coarse - fine))
    C = diff / (h0**4 * (1.0 - 1.0 / 16.0))
    if C == 0.0:
        return MIN_STEPS
    amplify = math.exp(min(p.lipschitz_L * p.T, 700.0))
    h = (target_err / (C * amplify)) ** 0.25
    return int(min(max(MIN_STEPS, math.ceil(p.T / h)), MAX_STEPS))


def poincare_displacement(p: OdeProblem, a, steps: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if norm(p.space, a) > p.R * (1 + 1e-12):
        raise ValueError("initial value must lie in B_R[0]")
    return _endpoint(p, a, steps) - a


def _initial_values(p: OdeProblem, a_samples: int) -> list[np.ndarray]:
    sphere = [x for x, _ in geo.boundary_grid(BallDomain(np.zeros(p.dim), p.R, p.space), a_samples)]
    return sphere + [0.5 * x for x in sphere] + [np.zeros(p.dim)]


def check_invariance(p: OdeProblem, a_samples: int = 8, steps: Optional[int] = None) -> Certificate:
    """Numerical evidence that trajectories starting in ``B_R[0]`` stay there."""
    steps = steps or gronwall_budget(p, 1e-8)
    limit = p.R * (1 + 1e-6)
    worst = 0.0
    for a in _initial_values(p, a_samples):
        traj = integrate(p, a, steps)
        r = max(norm(p.space, x) for x in traj.x)
        worst = max(worst, r)
        if r > limit:
            return Certificate(Condition.ODE_INVARIANCE, Verdict.REFUTED, margins={"radius_slack": p.R - r},
                               witness=a, reason=f"trajectory reaches radius {r!r} > R", rigor=Sampled(a_samples),
                               details={"steps": steps})
    return Certificate(Condition.ODE_INVARIANCE, Verdict.CERTIFIED, sign=-1, margins={"radius_slack": p.R - worst},
                       rigor=Sampled(a_samples), details={"steps": steps, "max_radius": worst})


def _search_domain(p: OdeProblem):
    if p.space.norm is Norm.L2:
        return BallDomain(np.zeros(p.dim), p.R)
    # every l_p ball of radius R sits inside the cube [-R, R]^n
    return BoxDomain(-p.R * np.ones(p.dim), p.R * np.ones(p.dim))


def find_periodic(
    p: OdeProblem,
    tol: float = 1e-8,
    integration_target: float = 1e-10,
    n_schedule=tuple(float(2**k) for k in range(11)),
    check_inward: bool = True,
) -> PeriodicResult:
    """Initial value of a T-periodic solution inside ``B_R[0]``.

    The displacement map is integrated at the Gronwall-budget step count for
    ``integration_target``; its zero is tracked by the proof homotopy over
    ``n_schedule`` and then polished by projected Newton to ``tol``.
    """
    if check_inward:
        cert = check_ode_inward(p.field, p.T, p.R, p.space, t_density=17, x_density=17)
        if cert.refuted:
            warnings.warn(f"inward condition fails on the sampled sphere: {cert.reason}", stacklevel=2)
        elif cert.margins.get("inward", 1.0) <= 0:
            warnings.warn("inward condition holds only with zero margin", stacklevel=2)

    steps = gronwall_budget(p, integration_target)

    def F(a):
        return _endpoint(p, a, steps) - np.asarray(a, dtype=float)

    domain = _search_domain(p)
    hom = proof_homotopy(F, domain, np.zeros(p.dim), n_schedule=n_schedule, inner_tol=0.1 * tol,
                         tol=tol, polish=False, space=p.space)
    polished = newton_project(F, domain, hom.x, tol=tol, space=p.space)
    a = polished.x if polished.residual <= hom.residual else hom.x
    traj = integrate(p, a, steps)
    disp = norm(p.space, traj.final - a)
    max_r = max(norm(p.space, x) for x in traj.x)
    converged = disp <= tol
    msg = "" if converged else f"displacement {disp!r} above tolerance ({hom.message}; {polished.message})"
    return PeriodicResult(a, disp, max_r, steps, converged, msg, traj)
