"""Root finders for maps whose zero is certified.

``proof_homotopy`` follows the existence proof directly: for growing ``n``
it solves ``x + n * f(x) = z`` (whose solutions satisfy
``f(x_n) = (z - x_n) / n``) by damped Newton, warm-starting each stage from
the previous one, and then polishes on ``f`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import geometry as geo
from .certify import check_bolzano
from .exprlang import EvalError, call_map, jacobian_fd
from .geometry import BallDomain, BoxDomain
from .pairing import Norm, Space, norm

__all__ = [
    "RootResult",
    "PreconditionError",
    "DEFAULT_SCHEDULE",
    "bisect",
    "proof_homotopy",
    "newton_project",
    "grid_oracle",
    "lattice_cell_diameter",
    "fixed_point_via_zero",
]

DEFAULT_SCHEDULE = tuple(float(2**k) for k in range(21))
MIN_STEP = 2.0**-20
ARMIJO = 1e-4


class PreconditionError(ValueError):
    """A solver was called on a problem that does not meet its precondition."""


@dataclass
class RootResult:
    x: np.ndarray
    residual: float
    iterations: int
    method: str
    converged: bool
    message: str = ""
    stages: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "x": np.asarray(self.x, float).tolist(),
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "method": self.method,
            "converged": bool(self.converged),
            "message": self.message,
        }
        if self.stages:
            d["stages"] = [dict(s) for s in self.stages]
        return d


def _measure(space: Optional[Space]) -> Callable[[np.ndarray], float]:
    if space is None:
        return lambda v: float(np.max(np.abs(v))) if v.size else 0.0
    return lambda v: norm(space, v)


def _solver_domain(domain):
    """Domain with a usable metric projection (l_inf balls become their box)."""
    if isinstance(domain, BallDomain) and domain.space.norm is Norm.LINF:
        return geo.as_box(domain)
    return domain


# --------------------------------------------------------------------------


def bisect(f: Callable, a: float, b: float, tol: float = 1e-12, max_iter: int = 2000) -> RootResult:
    """Interval halving on a certified sign change; stops when the bracket width is <= tol.

    The tolerance applies to the bracket, so ``residual`` (``|f(x)|``) is
    reported but not compared against it.
    """
    cert = check_bolzano(f, a, b)
    fa = float(call_map(f, [a])[0])
    fb = float(call_map(f, [b])[0])
    if fa == 0.0:
        return RootResult(np.array([a]), 0.0, 0, "bisect", True, "endpoint is a zero")
    if fb == 0.0:
        return RootResult(np.array([b]), 0.0, 0, "bisect", True, "endpoint is a zero")
    if not cert.certified:
        raise PreconditionError(f"bisect needs a sign change on [a, b]: {cert.reason}")
    k = 0
    while b - a > tol and k < max_iter:
        m = 0.5 * (a + b)
        fm = float(call_map(f, [m])[0])
        k += 1
        if fm == 0.0:
            return RootResult(np.array([m]), 0.0, k, "bisect", True, "exact zero")
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    m = 0.5 * (a + b)
    return RootResult(np.array([m]), abs(float(call_map(f, [m])[0])), k, "bisect", b - a <= tol,
                      f"bracket width {b - a!r}")


# --------------------------------------------------------------------------
# damped, projected Newton


@dataclass
class _NewtonOut:
    x: np.ndarray
    value: np.ndarray
    iterations: int
    converged: bool
    message: str


def _safe(G, x):
    try:
        return call_map(G, x)
    except (EvalError, ValueError, OverflowError, ZeroDivisionError):
        return None


def _damped_newton(G, x0, domain, tol, max_iter, measure) -> _NewtonOut:
    x = geo.project(domain, x0) if domain is not None else np.array(x0, dtype=float)
    g = _safe(G, x)
    if g is None:
        return _NewtonOut(x, np.full(x.size, np.inf), 0, False, "map undefined at the start point")
    for it in range(max_iter + 1):
        if measure(g) <= tol:
            return _NewtonOut(x, g, it, True, "")
        if it == max_iter:
            break
        J = jacobian_fd(G, x)
        phi = float(np.dot(g, g))
        d = None
        try:
            if np.linalg.cond(J) < 1e13:
                d = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            d = None
        grad = J.T @ g  # gradient of phi / 2
        if d is None or not np.all(np.isfinite(d)) or float(np.dot(grad, d)) >= 0:
            d = -grad
        slope = 2.0 * float(np.dot(grad, d))
        alpha = 1.0
        while True:
            trial = x + alpha * d
            if domain is not None:
                trial = geo.project(domain, trial)
            gt = _safe(G, trial)
            if gt is not None and float(np.dot(gt, gt)) <= phi + ARMIJO * alpha * slope:
                break
            alpha *= 0.5
            if alpha < MIN_STEP:
                return _NewtonOut(x, g, it, False, "line search failed")
        x, g = trial, gt
    return _NewtonOut(x, g, max_iter, False, "iteration limit reached")


def newton_project(
    f: Callable,
    domain,
    x0,
    tol: float = 1e-12,
    max_iter: int = 50,
    space: Optional[Space] = None,
) -> RootResult:
    """Damped Newton with Armijo backtracking on ``|f|^2``; iterates are projected into the domain."""
    domain = _solver_domain(domain) if domain is not None else None
    x0 = np.asarray(x0, dtype=float)
    if domain is not None and not domain.contains(x0, tol=1e-12):
        raise PreconditionError("x0 must lie in the domain")
    measure = _measure(space)
    out = _damped_newton(f, x0, domain, tol, max_iter, measure)
    return RootResult(out.x, measure(out.value), out.iterations, "newton", out.converged, out.message)


# --------------------------------------------------------------------------


def _orientation(f, domain, z) -> int:
    if domain.dim <= geo.MAX_GRID_DIM:
        pts = [p for p, _ in geo.boundary_grid(domain, 3)]
    else:
        pts = [p for p, _ in geo.boundary_random(domain, 4 * domain.dim)]
    total = 0
    for p in pts:
        fp = _safe(f, p)
        if fp is not None:
            total += int(np.sign(np.dot(fp, p - z)))
    return 1 if total >= 0 else -1


class _Tracker:
    """Pseudo-arclength tracking of ``H(x, tau) = (1 - tau)(x - z) + tau * s * f(x) = 0``.

    ``tau = n / (1 + n)`` turns the regularized equation ``x + n s f(x) = z``
    into ``H = 0``; the solution curve starts at ``(z, 0)`` and may fold in
    ``n``, which plain stepping in ``n`` cannot follow.
    """

    def __init__(self, f, sgn, z, domain, ctol):
        self.f, self.sgn, self.z, self.domain, self.ctol = f, sgn, z, domain, ctol
        self.dim = z.size

    def residual(self, y, fx):
        x, tau = y[:-1], y[-1]
        return (1.0 - tau) * (x - self.z) + tau * self.sgn * fx

    def jac(self, y, fx):
        x, tau = y[:-1], y[-1]
        Df = jacobian_fd(self.f, x)
        A = (1.0 - tau) * np.eye(self.dim) + tau * self.sgn * Df
        return np.column_stack([A, self.sgn * fx - (x - self.z)])

    def tangent(self, y, fx, prev):
        A = self.jac(y, fx)
        M = np.vstack([A, prev])
        rhs = np.zeros(self.dim + 1)
        rhs[-1] = 1.0
        try:
            t = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            t = np.linalg.svd(A)[2][-1]
        t /= np.linalg.norm(t)
        return t if np.dot(t, prev) >= 0 else -t

    def correct(self, yp, t, max_iter=8):
        y = yp.copy()
        for it in range(max_iter):
            fx = _safe(self.f, y[:-1])
            if fx is None:
                return None, it
            h = self.residual(y, fx)
            J = np.vstack([self.jac(y, fx), t])
            try:
                dy = np.linalg.solve(J, -np.append(h, np.dot(t, y - yp)))
            except np.linalg.LinAlgError:
                return None, it
            y = y + dy
            if np.max(np.abs(dy)) <= 1e-12 * (1 + np.max(np.abs(y))) or (
                np.max(np.abs(h)) <= self.ctol and np.max(np.abs(dy)) <= 1e-8):
                fx = _safe(self.f, y[:-1])
                if fx is not None and np.max(np.abs(self.residual(y, fx))) <= self.ctol:
                    return y, it + 1
        return None, max_iter


def proof_homotopy(
    f: Callable,
    domain,
    z=None,
    n_schedule: Optional[Sequence[float]] = None,
    inner_tol: float = 1e-10,
    tol: Optional[float] = None,
    orientation: Optional[int] = None,
    polish: bool = True,
    space: Optional[Space] = None,
    max_iter: int = 50,
    max_steps: int = 5000,
) -> RootResult:
    """Solve ``x + n * s * f(x) = z`` for each ``n`` of the schedule, then polish on ``f``.

    ``s`` is the boundary sign of ``<f(x), x - z>`` (detected from a coarse
    boundary sample unless given).  Consecutive stages are joined by
    pseudo-arclength continuation, so folds of the solution path in ``n`` are
    followed rather than jumped.  Stage ``n`` is accepted when
    ``|x + n s f(x) - z|_inf <= inner_tol * (1 + n)``, hence every converged
    stage obeys ``|f(x_n)| <= |z - x_n| / n + 2 inner_tol``.  With ``polish``
    the last stage seeds a projected Newton solve of ``f`` itself, accepted at
    ``tol`` (default ``inner_tol``).
    """
    domain = _solver_domain(domain)
    z = domain.center.copy() if z is None else np.asarray(z, dtype=float)
    if not domain.contains(z) or geo.interior_distance(domain, z) <= 0:
        raise PreconditionError("anchor z must lie strictly inside the domain")
    schedule = DEFAULT_SCHEDULE if n_schedule is None else tuple(float(n) for n in n_schedule)
    if not schedule or any(not n > 0 for n in schedule):
        raise ValueError("schedule entries must be positive")
    schedule = tuple(sorted(schedule))
    tol = inner_tol if tol is None else tol
    sgn = orientation if orientation is not None else _orientation(f, domain, z)
    measure = _measure(space)
    sup = _measure(None)

    tr = _Tracker(f, sgn, z, domain, ctol=max(10.0 * inner_tol, 1e-9))
    scale = max(domain.diameter(), 1e-3)
    ds, ds_min, ds_max = 0.05 * scale, 1e-9 * scale, 0.5 * scale
    y = np.append(z, 0.0)
    fy = call_map(f, z)
    t = tr.tangent(y, fy, np.eye(z.size + 1)[-1])

    stages = []
    pending = list(schedule)
    x_last = z.copy()
    total_iter = 0
    steps = 0

    def fail(msg):
        res = measure(call_map(f, x_last))
        return RootResult(x_last, res, total_iter, "homotopy", False, msg, stages)

    while pending:
        steps += 1
        if steps > max_steps:
            return fail("continuation step limit reached")
        y_new, its = tr.correct(y + ds * t, t)
        total_iter += its
        ok = y_new is not None and domain.contains(y_new[:-1], tol=1e-9)
        if ok:
            f_new = call_map(f, y_new[:-1])
            t_new = tr.tangent(y_new, f_new, t)
            ok = float(np.dot(t_new, t)) >= 0.8
        if not ok:
            ds *= 0.5
            if ds < ds_min:
                return fail(f"continuation stalled near n={pending[0]:g}")
            continue
        # stages whose tau = n / (1 + n) was passed on this step
        while pending and pending[0] / (1.0 + pending[0]) <= y_new[-1]:
            n = pending.pop(0)
            tau = n / (1.0 + n)
            w = (tau - y[-1]) / (y_new[-1] - y[-1]) if y_new[-1] > y[-1] else 1.0
            guess = y[:-1] + min(max(w, 0.0), 1.0) * (y_new[:-1] - y[:-1])
            G = lambda v, n=n: v + n * sgn * call_map(f, v) - z
            out = _damped_newton(G, guess, domain, inner_tol * (1.0 + n), max_iter, sup)
            if not out.converged:
                out = _damped_newton(G, y_new[:-1], domain, inner_tol * (1.0 + n), max_iter, sup)
            total_iter += out.iterations
            fx = _safe(f, out.x)
            res = measure(fx) if fx is not None else math.inf
            stages.append({"n": n, "residual": res, "distance_to_anchor": measure(out.x - z),
                           "converged": out.converged, "iterations": out.iterations})
            if not out.converged:
                return fail(f"inner solve failed at n={n:g} ({out.message})")
            x_last = out.x
        y, t = y_new, t_new
        if its <= 3:
            ds = min(ds * 1.5, ds_max)

    x = x_last
    message = f"orientation {sgn:+d}; {steps} continuation steps"
    if polish:
        out = _damped_newton(f, x, domain, tol, max_iter, measure)
        total_iter += out.iterations
        if measure(out.value) <= measure(call_map(f, x)):
            x = out.x
        message += "; polished" if out.converged else f"; polish: {out.message}"
    res = measure(call_map(f, x))
    return RootResult(x, res, total_iter, "homotopy", res <= tol, message, stages)


# --------------------------------------------------------------------------


def grid_oracle(f: Callable, domain, resolution: int) -> tuple[np.ndarray, float]:
    """Exhaustive lattice scan returning the first point of minimal ``|f|_inf``."""
    if domain.dim > 4:
        raise ValueError("grid_oracle is limited to dimension <= 4")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    best_x, best = None, math.inf
    for p in geo.lattice(domain, resolution):
        fp = _safe(f, p)
        if fp is None:
            continue
        r = float(np.max(np.abs(fp)))
        if r < best:
            best_x, best = p, r
    if best_x is None:
        raise ValueError("map undefined on the whole lattice")
    return best_x, best


def lattice_cell_diameter(domain, resolution: int) -> float:
    box = geo.as_box(domain)
    return float(np.linalg.norm((box.hi - box.lo) / max(resolution - 1, 1)))


# --------------------------------------------------------------------------


def fixed_point_via_zero(
    f: Callable,
    C: BoxDomain,
    R: Optional[float] = None,
    tol: float = 1e-10,
    check_density: int = 5,
) -> RootResult:
    """Fixed point of a self-map of the box ``C`` through the zero of ``x - f(P_C(x))`` on ``B_R[0]``."""
    corners = np.array(np.meshgrid(*[[lo, hi] for lo, hi in zip(C.lo, C.hi)], indexing="ij"))
    corners = corners.reshape(C.dim, -1).T
    far = float(np.max(np.linalg.norm(corners, axis=1)))
    R = far if R is None else float(R)
    if R <= 0 or far > R * (1 + 1e-12):
        raise PreconditionError("C must lie inside the Euclidean ball B_R[0]")
    for p in geo.lattice(C, check_density):
        if not C.contains(call_map(f, p), tol=1e-12):
            raise PreconditionError(f"f does not map C into itself (sample {p.tolist()})")

    def F(x):
        return x - call_map(f, geo.project(C, x))

    ball = BallDomain(np.zeros(C.dim), R)
    l2 = Space(C.dim)
    out = proof_homotopy(F, ball, np.zeros(C.dim), inner_tol=min(tol, 1e-10), tol=tol, orientation=1, space=l2)
    x = geo.project(C, out.x)
    res = float(np.linalg.norm(x - call_map(f, x)))
    return RootResult(x, res, out.iterations, "fixed-point", res <= tol, out.message, out.stages)
