"""Line-oriented problem files.

A file is a sequence of ``[section]`` headers, each followed by ``key = value``
lines.  ``#`` starts a comment.  Sections::

    [space]   dim, norm (l1 | l2 | linf | l<p>)
    [domain]  type = box (lo, hi) | ball (center, radius) | hilbert_cube (truncation);
              optional anchor, x0
    [linear]  row1 .. rowN          (the map section then holds g in L x + g(x))
    [map]     f1 .. fN              (may use t when an [ode] section is present)
    [ode]     T, R, lipschitz
    [growth]  alpha, beta

Scalar values may be constant expressions such as ``2*pi``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .exprlang import EvalError, ExprSyntaxError, MapSpec, evaluate, parse
from .geometry import BallDomain, BoxDomain, HilbertCubeDomain
from .pairing import Space

__all__ = ["ProblemError", "ProblemFile", "load_problem", "parse_problem", "SECTIONS"]

SECTIONS = {
    "space": {"dim", "norm"},
    "domain": {"type", "lo", "hi", "center", "radius", "truncation", "anchor", "x0"},
    "linear": None,  # row<k>
    "map": None,  # f<k>
    "ode": {"t", "r", "lipschitz"},
    "growth": {"alpha", "beta"},
}
_HEADER = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


class ProblemError(ValueError):
    """Parse or validation failure; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True, eq=False)
class ProblemFile:
    space: Space
    domain: object
    map: MapSpec
    digest: str
    linear: Optional[np.ndarray] = None
    ode: Optional[dict] = None
    growth: Optional[dict] = None
    anchor: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None
    path: str = ""

    @property
    def dim(self) -> int:
        return self.space.dim

    def zero_map(self):
        """The map whose zero is sought: ``x + L^-1 g(x)`` with a linear part, else the map itself."""
        if self.linear is None:
            return self.map
        return _Preconditioned(self.linear, self.map)


class _Preconditioned:
    """``F(x) = x + L^-1 g(x)``; zeros coincide with those of ``L x + g(x)``."""

    def __init__(self, L: np.ndarray, g: MapSpec):
        self.L_inv = np.linalg.inv(L)
        self.g = g

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x + self.L_inv @ self.g(x)


def _scalar(text: str, line: int) -> float:
    try:
        return float(evaluate(parse(text, 1)))
    except (ExprSyntaxError, EvalError, IndexError) as exc:
        raise ProblemError(f"expected a constant, got {text!r} ({exc})", line) from None


def _vector(text: str, line: int) -> np.ndarray:
    parts = [p for p in text.split(",")]
    if any(not p.strip() for p in parts):
        raise ProblemError(f"malformed vector {text!r}", line)
    return np.array([_scalar(p, line) for p in parts])


def _int(text: str, line: int) -> int:
    try:
        v = _scalar(text, line)
    except ProblemError:
        raise ProblemError(f"expected an integer, got {text!r}", line) from None
    if v != int(v):
        raise ProblemError(f"expected an integer, got {text!r}", line)
    return int(v)


def _sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    out: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for k, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        m = _HEADER.match(s)
        if m:
            current = m.group(1).lower()
            if current not in SECTIONS:
                raise ProblemError(f"unknown section [{current}]", k)
            if current in out:
                raise ProblemError(f"duplicate section [{current}]", k)
            out[current] = {}
            continue
        m = _ENTRY.match(s)
        if not m:
            raise ProblemError(f"expected 'key = value', got {s!r}", k)
        if current is None:
            raise ProblemError("entry before any section header", k)
        key, value = m.group(1).lower(), m.group(2).strip()
        allowed = SECTIONS[current]
        if allowed is not None and key not in allowed:
            raise ProblemError(f"unknown key {key!r} in [{current}]", k)
        if key in out[current]:
            raise ProblemError(f"duplicate key {key!r}", k)
        if not value:
            raise ProblemError(f"empty value for {key!r}", k)
        out[current][key] = (value, k)
    if not out:
        raise ProblemError("no sections found", 1)
    return out


def _indexed(sec: dict, prefix: str, dim: int, name: str, header_line: int) -> list[tuple[str, int]]:
    found = {}
    for key, (value, line) in sec.items():
        m = re.fullmatch(prefix + r"([1-9][0-9]*)", key)
        if not m:
            raise ProblemError(f"unknown key {key!r} in [{name}]", line)
        found[int(m.group(1))] = (value, line)
    if sorted(found) != list(range(1, len(found) + 1)):
        raise ProblemError(f"[{name}] entries must be {prefix}1..{prefix}N without gaps", header_line)
    if len(found) != dim:
        raise ProblemError(f"[{name}] has {len(found)} entries but dim = {dim}", header_line)
    return [found[i] for i in range(1, dim + 1)]


def _require(sec: dict, key: str, name: str) -> tuple[str, int]:
    if key not in sec:
        raise ProblemError(f"[{name}] needs '{key}'")
    return sec[key]


def _first_line(sec: dict) -> Optional[int]:
    return min((line for _, line in sec.values()), default=None)


def parse_problem(text: str, path: str = "") -> ProblemFile:
    secs = _sections(text)
    for need in ("space", "domain", "map"):
        if need not in secs:
            raise ProblemError(f"missing [{need}] section")

    sp = secs["space"]
    dim_text, dim_line = _require(sp, "dim", "space")
    dim = _int(dim_text, dim_line)
    if dim < 1:
        raise ProblemError("dim must be positive", dim_line)
    norm_text, norm_line = sp.get("norm", ("l2", dim_line))
    try:
        space = Space.parse(dim, norm_text)
    except ValueError as exc:
        raise ProblemError(str(exc), norm_line) from None

    dom = secs["domain"]
    kind, kind_line = _require(dom, "type", "domain")
    kind = kind.lower()

    def vec(key):
        value, line = _require(dom, key, "domain")
        v = _vector(value, line)
        if v.size != dim:
            raise ProblemError(f"'{key}' has {v.size} entries, dim = {dim}", line)
        return v

    try:
        if kind == "box":
            domain = BoxDomain(vec("lo"), vec("hi"))
        elif kind == "ball":
            r_text, r_line = _require(dom, "radius", "domain")
            center = vec("center") if "center" in dom else np.zeros(dim)
            domain = BallDomain(center, _scalar(r_text, r_line), space)
        elif kind == "hilbert_cube":
            n_text, n_line = _require(dom, "truncation", "domain")
            domain = HilbertCubeDomain(_int(n_text, n_line))
            if domain.dim != dim:
                raise ProblemError(f"truncation {domain.dim} does not match dim = {dim}", n_line)
        else:
            raise ProblemError(f"unknown domain type {kind!r}", kind_line)
    except ProblemError:
        raise
    except ValueError as exc:
        raise ProblemError(str(exc), kind_line) from None
    anchor = vec("anchor") if "anchor" in dom else None
    x0 = vec("x0") if "x0" in dom else None

    ode = None
    if "ode" in secs:
        o = secs["ode"]
        ode = {}
        for key, name in (("t", "T"), ("r", "R"), ("lipschitz", "lipschitz")):
            value, line = _require(o, key, "ode")
            ode[name] = _scalar(value, line)
            if not ode[name] > 0:
                raise ProblemError(f"{name} must be positive", line)

    m = secs["map"]
    comps = _indexed(m, "f", dim, "map", _first_line(m) or 1)
    exprs = []
    for k, (value, line) in enumerate(comps, start=1):
        try:
            e = parse(value, dim, time_dependent=ode is not None)
        except ExprSyntaxError as exc:
            raise ProblemError(f"f{k}: {exc}", line) from None
        exprs.append(e)
    fmap = MapSpec(exprs, dim, time_dependent=ode is not None)

    linear = None
    if "linear" in secs:
        rows = _indexed(secs["linear"], "row", dim, "linear", _first_line(secs["linear"]) or 1)
        mat = []
        for value, line in rows:
            r = _vector(value, line)
            if r.size != dim:
                raise ProblemError(f"row has {r.size} entries, dim = {dim}", line)
            mat.append(r)
        linear = np.array(mat)
        if ode is not None:
            raise ProblemError("[linear] and [ode] cannot be combined")
        if abs(np.linalg.det(linear)) < 1e-300 or np.linalg.cond(linear) > 1e14:
            raise ProblemError("[linear] matrix is singular", rows[0][1])

    growth = None
    if "growth" in secs:
        gsec = secs["growth"]
        growth = {}
        for key in ("alpha", "beta"):
            value, line = _require(gsec, key, "growth")
            growth[key] = _scalar(value, line)

    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ProblemFile(space, domain, fmap, digest, linear, ode, growth, anchor, x0, path)


def load_problem(path) -> ProblemFile:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc.strerror}") from None
    return parse_problem(text, str(path))
