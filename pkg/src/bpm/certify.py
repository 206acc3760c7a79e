"""Existence-condition engines.

Each ``check_*`` function turns one boundary hypothesis of the zero-existence
theorems into a predicate evaluated over a discretized boundary and returns a
:class:`Certificate`.

Two rigor tiers are offered.  ``Sampled`` (and its seeded ``MonteCarlo``
variant for high dimension) is evidence on a finite set of points.
``Lipschitz`` subdivides facets adaptively and only accepts a cell when the
value at its center beats the Lipschitz constant times the cell radius, so
it is rigorous relative to the supplied constant.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import geometry as geo
from .exprlang import call_map
from .geometry import BallDomain, BoxDomain, FaceId, HilbertCubeDomain
from .pairing import Norm, PairingKind, Space, duality_select, is_collinear, norm, pair

__all__ = [
    "Condition",
    "Verdict",
    "Sampled",
    "MonteCarlo",
    "Lipschitz",
    "RigorMode",
    "Certificate",
    "ZERO_TOL",
    "check_bolzano",
    "check_miranda",
    "check_pairing_sign",
    "check_ray_condition",
    "check_normal_cone",
    "check_normal_cone_points",
    "compute_ell",
    "ell_by_subdivision",
    "smallest_singular_value",
    "check_linear_growth",
    "check_hilbert_cube",
    "check_ode_inward",
]

ZERO_TOL = 1e-14
PAIR_RTOL = 1e-12


class Condition(str, enum.Enum):
    BOLZANO = "bolzano"
    MIRANDA = "miranda"
    PAIRING_SIGN = "pairing"
    RAY_CONDITION = "ray"
    NORMAL_CONE = "normal-cone"
    LINEAR_GROWTH = "growth"
    HILBERT_CUBE = "hilbert-cube"
    ODE_INWARD = "ode-inward"
    ODE_INVARIANCE = "ode-invariance"


class Verdict(str, enum.Enum):
    CERTIFIED = "certified"
    REFUTED = "refuted"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Sampled:
    density: int = 21

    def __post_init__(self):
        if self.density < 1:
            raise ValueError("density must be >= 1")

    def to_dict(self):
        return {"mode": "sampled", "density": self.density}


@dataclass(frozen=True)
class MonteCarlo:
    """Seeded random boundary sampling; non-rigorous, for dimensions past grid reach."""

    samples: int = 10_000
    seed: int = 0

    def to_dict(self):
        return {"mode": "montecarlo", "samples": self.samples, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class Lipschitz:
    """Adaptive facet subdivision relative to a Lipschitz constant.

    ``constant`` is either a scalar ``L_f`` with ``|f(x) - f(y)|_inf <= L_f |x - y|_inf``
    (Euclidean norms for the pairing check), or an ``n x n`` array ``M`` of
    entrywise bounds ``|df_i/dx_j| <= M[i, j]`` which gives much tighter
    cell bounds on faces of long boxes.
    """

    constant: Union[float, np.ndarray]
    max_depth: int = 12
    cell_budget: int = 200_000
    source: str = "user"

    def __post_init__(self):
        c = np.asarray(self.constant, dtype=float)
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("Lipschitz constants must be finite and non-negative")
        if c.ndim not in (0, 2):
            raise ValueError("constant must be a scalar or a square matrix")
        if self.max_depth < 0 or self.cell_budget < 1:
            raise ValueError("max_depth >= 0 and cell_budget >= 1 required")

    def deviation(self, component: int, half_widths: np.ndarray) -> float:
        """Bound on ``|f_i(x) - f_i(center)|`` over a box cell."""
        c = np.asarray(self.constant, dtype=float)
        if c.ndim == 0:
            return float(c) * (float(np.max(half_widths)) if half_widths.size else 0.0)
        return float(np.dot(c[component], half_widths))

    def to_dict(self):
        c = np.asarray(self.constant, dtype=float)
        out = {"mode": "lipschitz", "max_depth": self.max_depth, "cell_budget": self.cell_budget,
               "constant_source": self.source}
        out["constant"] = float(c) if c.ndim == 0 else c.tolist()
        return out


RigorMode = Union[Sampled, MonteCarlo, Lipschitz]


@dataclass
class Certificate:
    condition: Condition
    verdict: Verdict
    sign: Optional[int] = None
    margins: dict = field(default_factory=dict)
    witness: Optional[np.ndarray] = None
    reason: str = ""
    anchor: Optional[np.ndarray] = None
    rigor: Optional[RigorMode] = None
    details: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED

    @property
    def refuted(self) -> bool:
        return self.verdict is Verdict.REFUTED

    @property
    def min_margin(self) -> float:
        vals = [v for v in self.margins.values() if isinstance(v, (int, float))]
        return min(vals) if vals else math.nan

    @property
    def conclusion(self) -> str:
        """What a Certified verdict licenses, and on what evidence; empty otherwise.

        Every domain here is finite dimensional, so the approximate zeros the
        boundary conditions produce accumulate at an exact zero.
        """
        if not self.certified:
            return ""
        if self.condition in (Condition.ODE_INWARD, Condition.ODE_INVARIANCE):
            # a Lipschitz field makes the displacement map continuous, which in
            # finite dimension already gives the compactness the argument needs
            claim = "T-periodic solution starting in B_R[0] (Lipschitz field, finite dimension)"
        elif self.condition is Condition.HILBERT_CUBE:
            claim = "zero of the truncated map in the truncated cube"
        elif self.condition is Condition.LINEAR_GROWTH:
            claim = "zero in the closed ball of radius R"
        else:
            claim = "zero in the domain"
        if self.condition is Condition.BOLZANO:
            return f"{claim}: guaranteed"
        if isinstance(self.rigor, Lipschitz):
            if self.rigor.source == "user":
                return f"{claim}: guaranteed given the Lipschitz constant"
            return f"{claim}: guaranteed if the estimated Lipschitz constant is an upper bound"
        return f"{claim}: sampled evidence only"

    def to_dict(self) -> dict:
        d = {
            "condition": self.condition.value,
            "verdict": self.verdict.value,
            "conclusion": self.conclusion,
            "sign": self.sign,
            "margins": dict(self.margins),
            "witness": None if self.witness is None else np.asarray(self.witness, float).tolist(),
            "reason": self.reason,
            "anchor": None if self.anchor is None else np.asarray(self.anchor, float).tolist(),
            "rigor": None if self.rigor is None else self.rigor.to_dict(),
        }
        if self.details:
            d["details"] = _plain(self.details)
        return d


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def _sign(v: float) -> int:
    return 1 if v > 0 else (-1 if v < 0 else 0)


# --------------------------------------------------------------------------
# Bolzano


def check_bolzano(f: Callable, a: float, b: float) -> Certificate:
    if not a < b:
        raise ValueError("need a < b")
    fa = float(call_map(f, [a])[0])
    fb = float(call_map(f, [b])[0])
    margins = {"a": abs(fa), "b": abs(fb)}
    if abs(fa) <= ZERO_TOL or abs(fb) <= ZERO_TOL:
        return Certificate(Condition.BOLZANO, Verdict.INCONCLUSIVE, margins=margins,
                           reason="endpoint value is zero", details={"interval": [a, b], "fa": fa, "fb": fb})
    if fa * fb < 0:
        return Certificate(Condition.BOLZANO, Verdict.CERTIFIED, sign=_sign(fa), margins=margins,
                           details={"interval": [a, b], "fa": fa, "fb": fb})
    return Certificate(Condition.BOLZANO, Verdict.INCONCLUSIVE, margins=margins,
                       reason="no sign change: f(a) f(b) > 0", details={"interval": [a, b], "fa": fa, "fb": fb})


# --------------------------------------------------------------------------
# facet engine shared by the Miranda, normal-cone and Hilbert-cube checks
#
# On face (i, s) the "face value" is  orient * s * f_i(x); the requirement is
# face value > 0 (strict) or >= 0 (non-strict).


def _incident_faces(box: BoxDomain, x: np.ndarray) -> list[FaceId]:
    out = []
    for i in range(box.dim):
        if x[i] == box.lo[i]:
            out.append(FaceId(i + 1, -1))
        if x[i] == box.hi[i]:
            out.append(FaceId(i + 1, 1))
    return out


def _boundary_samples(domain, rigor):
    if isinstance(rigor, MonteCarlo):
        return geo.boundary_random(domain, rigor.samples, rigor.seed)
    return geo.boundary_grid(domain, rigor.density)


@dataclass
class _FaceOutcome:
    ok: bool
    margins: dict
    witness: Optional[np.ndarray] = None
    witness_face: Optional[FaceId] = None
    reason: str = ""
    cells: int = 0
    slack: Optional[dict] = None


def _sampled_faces(f, box, rigor, orients, strict) -> dict[int, _FaceOutcome]:
    samples = _boundary_samples(box, rigor)
    cache: dict[bytes, np.ndarray] = {}
    evaluated = []
    for x, face in samples:
        key = x.tobytes()
        if key not in cache:
            cache[key] = call_map(f, x)
        evaluated.append((x, face, cache[key]))

    results = {}
    for orient in orients:
        margins = {str(fc): math.inf for fc in geo.faces(box)}
        ok = True
        witness = witness_face = None
        for x, face, fx in evaluated:
            inc = _incident_faces(box, x) if isinstance(rigor, Sampled) else [face]
            if face not in inc:
                inc.append(face)
            v = max(orient * fc.side * fx[fc.axis - 1] for fc in inc)
            margins[str(face)] = min(margins[str(face)], float(v))
            passed = v > 0 if strict else v >= 0
            if not passed:
                ok = False
                if v < 0 and witness is None:
                    witness, witness_face = x.copy(), face
        results[orient] = _FaceOutcome(ok, margins, witness, witness_face, cells=len(evaluated))
    return results


def _lipschitz_faces(f, box, rigor: Lipschitz, orients, strict) -> dict[int, _FaceOutcome]:
    results = {}
    for orient in orients:
        budget = rigor.cell_budget
        margins = {}
        slack = {}
        ok = True
        witness = witness_face = None
        reason = ""
        used = 0
        for face in geo.faces(box):
            i = face.axis - 1
            stack = [(*geo.facet_cell(box, face), 0)]
            fmin = math.inf
            smin = math.inf
            while stack:
                c, h, depth = stack.pop()
                used += 1
                if used > budget:
                    ok = False
                    reason = "cell budget exhausted"
                    break
                v = orient * face.side * float(call_map(f, c)[i])
                dev = rigor.deviation(i, h)
                if (v > dev) if strict else (v >= dev):
                    fmin = min(fmin, v)
                    smin = min(smin, v - dev)
                    continue
                if v < 0:
                    ok = False
                    witness, witness_face = c.copy(), face
                    reason = "sign violation at a facet point"
                    break
                children = int(2 ** np.count_nonzero(h > 0))
                if used + children > budget:
                    ok = False
                    reason = "cell budget exhausted"
                    break
                if depth >= rigor.max_depth or children == 1:
                    # unresolved cell; keep searching the rest of the face for a witness
                    ok = False
                    reason = "maximum subdivision depth reached"
                    continue
                stack.extend((cc, hh, depth + 1) for cc, hh in reversed(geo.split_cell(c, h, 2)))
            margins[str(face)] = fmin
            slack[str(face)] = smin
            if witness is not None or reason == "cell budget exhausted":
                break
        results[orient] = _FaceOutcome(ok, margins, witness, witness_face, reason, cells=used, slack=slack)
    return results


def _face_check(f, box, rigor, orients, strict):
    if isinstance(rigor, Lipschitz):
        return _lipschitz_faces(f, box, rigor, orients, strict)
    return _sampled_faces(f, box, rigor, orients, strict)


def _face_details(out: _FaceOutcome) -> dict:
    d = {"cells_evaluated": out.cells}
    if out.slack is not None:
        d["lipschitz_slack"] = out.slack
    return d


def check_miranda(f: Callable, box: BoxDomain, rigor: RigorMode = Sampled()) -> Certificate:
    """Opposite-sign condition on opposite facets, in either global orientation.

    ``sign`` is the sign of ``s * f_i`` on facet ``(i, s)``: -1 for the classical
    orientation ``f_i > 0`` at ``x_i = lo_i`` and ``f_i < 0`` at ``x_i = hi_i``.
    """
    outcomes = _face_check(f, box, rigor, (-1, 1), strict=True)
    for orient in (-1, 1):
        out = outcomes[orient]
        if out.ok:
            return Certificate(Condition.MIRANDA, Verdict.CERTIFIED, sign=orient, margins=out.margins,
                               rigor=rigor, details=_face_details(out))
    first = outcomes[-1]
    if all(o.witness is not None for o in outcomes.values()):
        return Certificate(Condition.MIRANDA, Verdict.REFUTED, margins=first.margins, witness=first.witness,
                           reason=f"both orientations violated; witness on face {first.witness_face}",
                           rigor=rigor, details=_face_details(first))
    reasons = sorted({o.reason for o in outcomes.values() if o.reason}) or ["zero face value"]
    return Certificate(Condition.MIRANDA, Verdict.INCONCLUSIVE, margins=first.margins,
                       reason="; ".join(reasons), rigor=rigor, details=_face_details(first))


def check_normal_cone(f: Callable, box: BoxDomain, rigor: RigorMode = Sampled()) -> Certificate:
    """``<f(x), s e_i> >= 0`` on every facet ``(i, s)`` (strictly in Lipschitz mode)."""
    out = _face_check(f, box, rigor, (1,), strict=isinstance(rigor, Lipschitz))[1]
    if out.ok:
        return Certificate(Condition.NORMAL_CONE, Verdict.CERTIFIED, sign=1, margins=out.margins,
                           rigor=rigor, details=_face_details(out))
    if out.witness is not None:
        return Certificate(Condition.NORMAL_CONE, Verdict.REFUTED, margins=out.margins, witness=out.witness,
                           reason=f"<f(x), normal> < 0 on face {out.witness_face}", rigor=rigor,
                           details=_face_details(out))
    return Certificate(Condition.NORMAL_CONE, Verdict.INCONCLUSIVE, margins=out.margins,
                       reason=out.reason or "zero margin", rigor=rigor, details=_face_details(out))


def check_normal_cone_points(
    f: Callable, boundary: Sequence, normal: Callable[[np.ndarray], np.ndarray]
) -> Certificate:
    """Normal-cone condition on a user-described convex body.

    ``boundary`` is an iterable of boundary points and ``normal(x)`` must
    return a vector of the normal cone at ``x``.  Sampled evidence only.
    """
    worst = math.inf
    for x in boundary:
        x = np.asarray(x, dtype=float)
        v = float(np.dot(call_map(f, x), normal(x)))
        worst = min(worst, v)
        if v < 0:
            return Certificate(Condition.NORMAL_CONE, Verdict.REFUTED, margins={"boundary": v}, witness=x,
                               reason="<f(x), a(x)> < 0")
    return Certificate(Condition.NORMAL_CONE, Verdict.CERTIFIED, sign=1, margins={"boundary": worst})


def check_hilbert_cube(f: Callable, N: int, rigor: RigorMode = Sampled()) -> Certificate:
    """``f_k >= 0`` on ``x_k = -1/k`` and ``f_k <= 0`` on ``x_k = 1/k`` for k <= N (non-strict)."""
    box = geo.as_box(HilbertCubeDomain(N))
    out = _face_check(f, box, rigor, (-1,), strict=False)[-1]
    details = _face_details(out)
    details["truncation"] = N
    if out.ok:
        return Certificate(Condition.HILBERT_CUBE, Verdict.CERTIFIED, sign=-1, margins=out.margins,
                           rigor=rigor, details=details)
    if out.witness is not None:
        return Certificate(Condition.HILBERT_CUBE, Verdict.REFUTED, margins=out.margins, witness=out.witness,
                           reason=f"sign violated on face {out.witness_face}", rigor=rigor, details=details)
    return Certificate(Condition.HILBERT_CUBE, Verdict.INCONCLUSIVE, margins=out.margins,
                       reason=out.reason, rigor=rigor, details=details)


# --------------------------------------------------------------------------
# pairing-sign and ray conditions


def _require_interior(domain, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (domain.dim,):
        raise ValueError("anchor dimension does not match the domain")
    if not domain.contains(z) or geo.interior_distance(domain, z) <= 0:
        raise ValueError("anchor z must lie strictly inside the domain")
    return z


def _margin_key(tag) -> str:
    return str(tag)


def check_pairing_sign(
    f: Callable,
    domain,
    z,
    space: Space,
    kind: PairingKind | str = PairingKind.PLUS,
    rigor: RigorMode = Sampled(),
) -> Certificate:
    """Strict constant sign of ``pair(kind, f(x), x - z)`` over the boundary."""
    kind = PairingKind(kind)
    z = _require_interior(domain, z)
    if isinstance(rigor, Lipschitz):
        return _pairing_lipschitz(f, domain, z, space, kind, rigor)

    samples = _boundary_samples(domain, rigor)
    vals = []
    for x, tag in samples:
        fx = call_map(f, x)
        v = pair(space, kind, fx, x - z)
        # rounding noise of an identically vanishing pairing counts as zero
        if abs(v) <= PAIR_RTOL * norm(space, fx) * norm(space, x - z):
            v = 0.0
        vals.append((x, tag, v))
    ref = next((_sign(v) for _, _, v in vals if v != 0), 0)
    details = {"kind": kind.value, "norm": space.label, "samples": len(vals)}
    if ref == 0:
        return Certificate(Condition.PAIRING_SIGN, Verdict.INCONCLUSIVE, margins={"boundary": 0.0}, anchor=z,
                           rigor=rigor, reason="pairing vanishes at every sample", details=details)
    margins: dict[str, float] = {}
    for x, tag, v in vals:
        k = _margin_key(tag)
        margins[k] = min(margins.get(k, math.inf), ref * v)
    opposite = next((x for x, _, v in vals if _sign(v) == -ref), None)
    if opposite is not None:
        return Certificate(Condition.PAIRING_SIGN, Verdict.REFUTED, margins=margins, witness=opposite, anchor=z,
                           rigor=rigor, reason="pairing takes both signs on the boundary", details=details)
    if any(v == 0 for _, _, v in vals):
        return Certificate(Condition.PAIRING_SIGN, Verdict.INCONCLUSIVE, sign=ref, margins=margins, anchor=z,
                           rigor=rigor, reason="pairing vanishes at some sample (strict sign required)",
                           details=details)
    return Certificate(Condition.PAIRING_SIGN, Verdict.CERTIFIED, sign=ref, margins=margins, anchor=z,
                       rigor=rigor, details=details)


def _pairing_cells(domain):
    """Initial cells and a map from a cell to (boundary point, radius bound, tag)."""
    if isinstance(domain, BallDomain):
        n = domain.dim
        cube = BoxDomain(-np.ones(n), np.ones(n))
        r = domain.radius

        def place(c, h):
            nc = float(np.linalg.norm(c))
            # |u/|u| - v/|v|| <= 2 |u - v| / |v|
            return domain.center + r * c / nc, 2.0 * r * float(np.linalg.norm(h)) / nc

        cells = [(*geo.facet_cell(cube, fc), fc) for fc in geo.faces(cube)]
        return cells, place, lambda fc: geo.SPHERE
    box = geo.as_box(domain)
    cells = [(*geo.facet_cell(box, fc), fc) for fc in geo.faces(box)]
    return cells, (lambda c, h: (c, float(np.linalg.norm(h)))), (lambda fc: fc)


def _pairing_lipschitz(f, domain, z, space, kind, rigor: Lipschitz) -> Certificate:
    if space.norm is not Norm.L2 or kind is PairingKind.RAY:
        raise ValueError("Lipschitz-mode pairing certification needs the l2 norm and the plus/minus pairing")
    if isinstance(domain, BallDomain) and domain.space.norm is not Norm.L2:
        raise ValueError("Lipschitz-mode pairing certification needs an l2 ball")
    lf = np.asarray(rigor.constant, dtype=float)
    lf = float(lf) if lf.ndim == 0 else float(np.linalg.norm(lf, 2))
    cells, place, tagof = _pairing_cells(domain)
    stack = [(c, h, fc, 0) for c, h, fc in reversed(cells)]
    ref = 0
    used = 0
    margins: dict[str, float] = {}
    details = {"kind": kind.value, "norm": space.label}
    while stack:
        c, h, fc, depth = stack.pop()
        used += 1
        details["cells_evaluated"] = used
        if used > rigor.cell_budget:
            return Certificate(Condition.PAIRING_SIGN, Verdict.INCONCLUSIVE, sign=ref or None, margins=margins,
                               anchor=z, rigor=rigor, reason="cell budget exhausted", details=details)
        x, rho = place(c, h)
        fx = call_map(f, x)
        v = pair(space, kind, fx, x - z)
        if ref == 0 and v != 0:
            ref = _sign(v)
        if ref != 0 and _sign(v) == -ref:
            return Certificate(Condition.PAIRING_SIGN, Verdict.REFUTED, margins=margins, witness=x, anchor=z,
                               rigor=rigor, reason="pairing takes both signs on the boundary", details=details)
        bound = lf * rho * (float(np.linalg.norm(x - z)) + rho) + float(np.linalg.norm(fx)) * rho
        if ref != 0 and ref * v > bound:
            k = _margin_key(tagof(fc))
            margins[k] = min(margins.get(k, math.inf), ref * v)
            continue
        children = int(2 ** np.count_nonzero(h > 0))
        if depth >= rigor.max_depth or children == 1:
            return Certificate(Condition.PAIRING_SIGN, Verdict.INCONCLUSIVE, sign=ref or None, margins=margins,
                               anchor=z, rigor=rigor, reason="maximum subdivision depth reached",
                               details=details)
        stack.extend((cc, hh, fc, depth + 1) for cc, hh in reversed(geo.split_cell(c, h, 2)))
    return Certificate(Condition.PAIRING_SIGN, Verdict.CERTIFIED, sign=ref, margins=margins, anchor=z,
                       rigor=rigor, details=details)


def check_ray_condition(f: Callable, domain, z, rigor: RigorMode = Sampled()) -> Certificate:
    """``f(x)`` is never a negative multiple of ``x - z`` (or never a positive one).

    Both clauses are evaluated; ``sign`` is +1 when the "no negative multiple"
    clause holds and -1 when only the "no positive multiple" clause holds.
    """
    if isinstance(rigor, Lipschitz):
        raise ValueError("the ray condition is only available in sampled mode")
    z = _require_interior(domain, z)
    clauses = {"negative": {"holds": True, "witness": None, "min_defect": math.inf},
               "positive": {"holds": True, "witness": None, "min_defect": math.inf}}
    samples = _boundary_samples(domain, rigor)
    for x, _ in samples:
        fx = call_map(f, x)
        d = x - z
        lam = float(np.dot(fx, d)) / float(np.dot(d, d))
        name = "negative" if lam < 0 else ("positive" if lam > 0 else None)
        if name is None:
            continue
        nf = float(np.linalg.norm(fx))
        defect = float(np.linalg.norm(fx - lam * d)) / nf
        cl = clauses[name]
        cl["min_defect"] = min(cl["min_defect"], defect)
        if cl["holds"] and is_collinear(fx, d):
            cl["holds"] = False
            cl["witness"] = x.copy()
    details = {"clauses": clauses, "samples": len(samples)}
    margins = {k: v["min_defect"] for k, v in clauses.items()}
    for name, sign in (("negative", 1), ("positive", -1)):
        if clauses[name]["holds"]:
            return Certificate(Condition.RAY_CONDITION, Verdict.CERTIFIED, sign=sign, margins=margins, anchor=z,
                               rigor=rigor, reason=f"no {name} multiple of x - z on the boundary",
                               details=details)
    return Certificate(Condition.RAY_CONDITION, Verdict.REFUTED, margins=margins,
                       witness=clauses["negative"]["witness"], anchor=z, rigor=rigor,
                       reason="f(x) is a negative multiple of x - z at one point and a positive one at another",
                       details=details)


# --------------------------------------------------------------------------
# linear growth


def smallest_singular_value(a: np.ndarray, sweeps: int = 100) -> float:
    """sqrt of the smallest eigenvalue of ``A^T A`` by cyclic Jacobi rotations."""
    s = np.asarray(a, dtype=float)
    m = s.T @ s
    n = m.shape[0]
    for _ in range(sweeps):
        off = float(np.sqrt(np.sum(np.tril(m, -1) ** 2)))
        if off <= 1e-300 or off <= 1e-17 * float(np.sqrt(np.sum(np.diag(m) ** 2))):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(m[p, q]) <= 1e-18 * math.sqrt(abs(m[p, p] * m[q, q])) or m[p, q] == 0.0:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * m[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = sn
                rot[q, p] = -sn
                m = rot.T @ m @ rot
    lam = float(np.min(np.diag(m)))
    return math.sqrt(max(lam, 0.0))


def _row_norms(space: Space, y: np.ndarray) -> np.ndarray:
    if space.norm is Norm.LINF:
        return np.max(np.abs(y), axis=-1)
    if space.norm is Norm.L1:
        return np.sum(np.abs(y), axis=-1)
    if space.norm is Norm.L2:
        return np.sqrt(np.sum(y * y, axis=-1))
    return np.sum(np.abs(y) ** space.p, axis=-1) ** (1.0 / space.p)


def _unit_dual_rows(space: Space, y: np.ndarray, ny: np.ndarray) -> np.ndarray:
    """Row-wise j with dual norm 1 and <y, j> = |y| (rows with y = 0 give 0)."""
    safe = np.where(ny > 0, ny, 1.0)[:, None]
    if space.norm is Norm.LINF:
        j = np.zeros_like(y)
        k = np.argmax(np.abs(y), axis=1)
        j[np.arange(y.shape[0]), k] = np.sign(y[np.arange(y.shape[0]), k])
        return j
    if space.norm is Norm.L1:
        return np.sign(y)
    if space.norm is Norm.L2:
        return y / safe
    return np.sign(y) * (np.abs(y) / safe) ** (space.p - 1.0)


def ell_by_subdivision(a, space: Space, tol: float = 1e-9, budget: int = 1_000_000) -> float:
    """min |A d| / |d| over the boundary of [-1,1]^n by face subdivision.

    By the symmetry d -> -d only the faces d_i = +1 are searched.  A cell is
    discarded once ``|A d| - m |d| > 0`` is proved on it for ``m = best - tol``.
    The proof bounds ``|A d|`` below by its supporting functional at the
    cell center, ``<d, A^T j>``, and ``|d|`` above by interpolating its corner
    values (it is convex), so both bounds are affine in the multilinear corner
    weights and the check reduces to the cell corners.  The slack is second
    order in the cell width, so cells near the minimizer stop at about
    ``sqrt(tol)``.  A plain Lipschitz bound is kept for cells where ``A c = 0``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    sub = Space(n, space.norm, space.p)
    lip = norm(sub, np.sum(np.abs(a), axis=1))
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))  # (2^n, n)

    # one row per cell: center C, half-widths H, facet axis ax (where H = 0)
    ax = np.arange(n)
    C = np.eye(n)
    H = 1.0 - np.eye(n)
    best = math.inf
    used = 0
    chunk = max(1, 200_000 // len(signs))  # bounds the corner arrays to a few tens of MB
    while C.shape[0]:
        used += C.shape[0]
        if used > budget:
            raise RuntimeError("compute_ell: cell budget exhausted; lower the refinement")
        open_ = np.zeros(C.shape[0], dtype=bool)
        for s0 in range(0, C.shape[0], chunk):
            Cc, Hc = C[s0:s0 + chunk], H[s0:s0 + chunk]
            P = Cc[:, None, :] + signs[None, :, :] * Hc[:, None, :]  # corners, each listed twice
            pn = _row_norms(sub, P)
            AC = Cc @ a.T
            nac = _row_norms(sub, AC)
            best = min(best, float(np.min(_row_norms(sub, P @ a.T) / pn)),
                       float(np.min(nac / _row_norms(sub, Cc))))
            # pruning against the running best is sound: best only decreases
            m = best - tol
            G = _unit_dual_rows(sub, AC, nac) @ a  # rows are A^T j
            support = np.min(np.einsum("kcn,kn->kc", P, G) - m * pn, axis=1)
            lipschitz = nac - lip * np.max(Hc, axis=1) - m * np.max(pn, axis=1)
            open_[s0:s0 + chunk] = ~(((support > 0) & (nac > 0)) | (lipschitz > 0))
        C, H, ax = C[open_], H[open_] / 2, ax[open_]
        # 2^(n-1) children per cell: sign patterns that are +1 on the facet axis
        kids = [(C + pattern * H)[pattern[ax] > 0] for pattern in signs]
        rows = [np.flatnonzero(pattern[ax] > 0) for pattern in signs]
        C = np.concatenate(kids)
        H = np.concatenate([H[r] for r in rows])
        ax = np.concatenate([ax[r] for r in rows])
    return best


def _ell_by_inverse(a: np.ndarray, space: Space) -> tuple[float, float]:
    """Bracket (lower, upper) for ell = 1 / |A^-1| from column/row sums of A^-1.

    For l1 and l_inf the bracket is closed: the extreme column (l1) or the
    sign pattern of the extreme row (l_inf) of A^-1 attains the operator norm.
    """
    b = np.linalg.inv(a)
    sub = Space(a.shape[0], space.norm, space.p)
    cols = np.sum(np.abs(b), axis=0)
    rows = np.sum(np.abs(b), axis=1)
    if space.norm is Norm.L1:
        upper_norm = float(np.max(cols))
    elif space.norm is Norm.LINF:
        upper_norm = float(np.max(rows))
    else:
        upper_norm = float(np.max(cols)) ** (1.0 / space.p) * float(np.max(rows)) ** (1.0 - 1.0 / space.p)
    # candidates x with |A x| / |x| computed directly
    cands = [b[:, int(np.argmax(cols))], b @ np.sign(b[int(np.argmax(rows))])]
    cands += list(np.eye(a.shape[0]))
    upper = min(norm(sub, a @ x) / norm(sub, x) for x in cands if np.any(x))
    return 1.0 / upper_norm, upper


def compute_ell(L, space: Space, refinement: int = 9) -> float:
    """``min |L x|`` over the unit sphere of the space.

    l2 uses the smallest singular value.  For l1 and l_inf the value is
    ``1 / |L^-1|`` with the closed-form column/row-sum operator norms; for
    other l_p that identity gives a bracket, and face subdivision closes it to
    absolute accuracy ``10^-refinement``.  Values below 1e-12 are reported as
    0 (singular map).
    """
    a = np.atleast_2d(np.asarray(L, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("L must be square")
    if a.shape[0] != space.dim:
        raise ValueError("L does not match the space dimension")
    if space.norm is Norm.L2:
        ell = smallest_singular_value(a)
    else:
        try:
            lo, hi = _ell_by_inverse(a, space)
        except np.linalg.LinAlgError:
            return 0.0
        tol = 10.0 ** (-refinement)
        ell = hi if hi - lo <= tol or space.norm is not Norm.LP else ell_by_subdivision(a, space, tol)
    return 0.0 if ell <= 1e-12 else ell


def _ball_sample(space: Space, R: float, density: int) -> np.ndarray:
    n = space.dim
    if R == 0:
        return np.zeros((1, n))
    pts = geo.lattice(BoxDomain(-R * np.ones(n), R * np.ones(n)), density)
    keep = [norm(space, p) <= R * (1 + 1e-12) for p in pts]
    pts = pts[np.asarray(keep, dtype=bool)]
    if n <= geo.MAX_GRID_DIM:
        shell = [p for p, _ in geo.boundary_grid(BallDomain(np.zeros(n), R, space), density)]
        pts = np.vstack([pts, np.asarray(shell)])
    return pts


def check_linear_growth(
    L, g: Callable, space: Space, alpha: float, beta: float, density: int = 21, refinement: int = 9
) -> Certificate:
    """Zero of ``L x + g(x)`` in ``B_R[0]``, ``R = beta / (ell - alpha)``.

    The growth bound ``|g(x)| <= alpha |x| + beta`` is the user's claim; it is
    spot-checked on a lattice of the ball and the certificate is Refuted if a
    sample breaks it.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    ell = compute_ell(L, space, refinement)
    details = {"ell": ell, "alpha": alpha, "beta": beta}
    # ell carries rounding error, so alpha within 1e-9 (relative) of ell counts as alpha = ell
    if alpha >= ell - 1e-9 * max(1.0, ell):
        return Certificate(Condition.LINEAR_GROWTH, Verdict.INCONCLUSIVE, reason="alpha >= ell: no radius",
                           details=details)
    R = beta / (ell - alpha)
    details["R"] = R
    if space.norm is Norm.LINF:
        details["box"] = {"lo": [-R] * space.dim, "hi": [R] * space.dim}
    worst = math.inf
    for x in _ball_sample(space, R, density):
        gx = call_map(g, x)
        slack = alpha * norm(space, x) + beta - norm(space, gx)
        worst = min(worst, slack)
        if slack < -1e-12 * (1 + beta):
            return Certificate(Condition.LINEAR_GROWTH, Verdict.REFUTED, margins={"growth_slack": slack},
                               witness=x, reason="growth bound |g(x)| <= alpha |x| + beta fails", details=details)
    details["samples_checked"] = "lattice of B_R[0]"
    return Certificate(Condition.LINEAR_GROWTH, Verdict.CERTIFIED, sign=1, margins={"growth_slack": worst},
                       rigor=Sampled(density), details=details,
                       reason=f"zero of L x + g(x) in the closed ball of radius {R!r}")


# --------------------------------------------------------------------------
# ODE inward condition


def check_ode_inward(
    field: Callable, T: float, R: float, space: Space, t_density: int = 33, x_density: int = 33
) -> Certificate:
    """``<f(t, x), j(x)> <= 0`` on the sphere ``|x| = R`` for t on a grid of [0, T].

    ``j`` is the deterministic duality selection.  The stronger clause
    ``pair(plus, f, x) <= 0`` is evaluated too and reported in ``details``.
    """
    if not (T > 0 and R > 0):
        raise ValueError("T and R must be positive")
    ts = np.linspace(0.0, T, max(t_density, 1)) if t_density > 1 else np.array([0.0])
    sphere = [p for p, _ in geo.boundary_grid(BallDomain(np.zeros(space.dim), R, space), x_density)]
    worst = math.inf
    worst_plus = math.inf
    witness = None
    for t in ts:
        for x in sphere:
            fx = call_map(field, x, float(t))
            v = float(np.dot(fx, duality_select(space, x)))
            if abs(v) <= PAIR_RTOL * norm(space, fx) * R:
                v = 0.0  # rounding noise of an orthogonal field
            worst = min(worst, -v)
            vp = pair(space, PairingKind.PLUS, fx, x)
            worst_plus = min(worst_plus, 0.0 if abs(vp) <= PAIR_RTOL * norm(space, fx) * R else -vp)
            if v > 0 and witness is None:
                witness = np.concatenate([[t], x])
    details = {"plus_clause_holds": worst_plus >= 0, "plus_margin": worst_plus, "T": T, "R": R,
               "t_samples": int(ts.size), "x_samples": len(sphere), "witness_layout": "t, x1..xn"}
    margins = {"inward": worst}
    rigor = Sampled(x_density)
    if witness is not None:
        return Certificate(Condition.ODE_INWARD, Verdict.REFUTED, margins=margins, witness=witness,
                           reason="<f(t,x), j(x)> > 0 at a sample", rigor=rigor, details=details)
    return Certificate(Condition.ODE_INWARD, Verdict.CERTIFIED, sign=-1, margins=margins, rigor=rigor,
                       details=details, reason="zero margin (non-strict)" if worst == 0 else "")
