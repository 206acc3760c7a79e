"""Domains: boxes, norm balls and the truncated Hilbert cube.

Every domain knows its dimension, membership, metric projection and a
deterministic boundary sampling.  Boundary samples are ``(point, tag)``
pairs where the tag is a :class:`FaceId` for box facets or ``SPHERE`` for
ball boundaries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .pairing import Norm, Space, norm

__all__ = [
    "FaceId",
    "SPHERE",
    "BoxDomain",
    "BallDomain",
    "HilbertCubeDomain",
    "Domain",
    "MAX_GRID_DIM",
    "faces",
    "outward_normal",
    "project",
    "boundary_grid",
    "boundary_random",
    "subdivide",
    "facet_cell",
    "split_cell",
    "cell_radius",
    "lattice",
    "as_box",
    "interior_distance",
]

MAX_GRID_DIM = 8
SPHERE = "sphere"


class FaceId(NamedTuple):
    """Facet ``{x_axis = lo}`` (side -1) or ``{x_axis = hi}`` (side +1); axis is 1-based."""

    axis: int
    side: int

    def __str__(self):
        return f"{self.axis}{'-' if self.side < 0 else '+'}"


@dataclass(frozen=True, eq=False)
class BoxDomain:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("box bounds must be non-empty vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("box needs lo < hi in every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, half_width: float, dim: int) -> "BoxDomain":
        return cls(-half_width * np.ones(dim), half_width * np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def diameter(self, space: Space | None = None) -> float:
        d = self.hi - self.lo
        return norm(space, d) if space is not None else float(np.linalg.norm(d))


@dataclass(frozen=True, eq=False)
class BallDomain:
    center: np.ndarray
    radius: float
    space: Space = field(default=None)

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))
        space = self.space if self.space is not None else Space(c.size, Norm.L2)
        if space.dim != c.size:
            raise ValueError("ball space dimension does not match its center")
        object.__setattr__(self, "space", space)

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, x, tol: float = 0.0) -> bool:
        return norm(self.space, np.asarray(x, float) - self.center) <= self.radius * (1 + tol) + tol

    def diameter(self, space: Space | None = None) -> float:
        if space is None or space == self.space:
            return 2.0 * self.radius
        # diameter of the ball measured in another norm: bound through the unit vectors
        return 2.0 * self.radius * _norm_ratio(self.space, space)


@dataclass(frozen=True, eq=False)
class HilbertCubeDomain:
    """``{x : |x_k| <= 1/k, k = 1..N}``: the N-truncation of the Hilbert cube."""

    truncation: int

    def __post_init__(self):
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise ValueError("truncation must be a positive integer")
        object.__setattr__(self, "truncation", int(self.truncation))

    @property
    def dim(self) -> int:
        return self.truncation

    @property
    def bounds(self) -> np.ndarray:
        return 1.0 / np.arange(1, self.truncation + 1)

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.truncation)

    def contains(self, x, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(np.asarray(x, float)) <= self.bounds + tol))

    def diameter(self, space: Space | None = None) -> float:
        return as_box(self).diameter(space)


Domain = Union[BoxDomain, BallDomain, HilbertCubeDomain]


def _norm_ratio(src: Space, dst: Space) -> float:
    """Smallest c with |x|_dst <= c |x|_src on R^n."""
    n = src.dim
    p, q = src.exponent, dst.exponent
    if q >= p:
        return 1.0
    # q < p: |x|_q <= n^(1/q - 1/p) |x|_p
    inv = lambda e: 0.0 if e == np.inf else 1.0 / e
    return float(n ** (inv(q) - inv(p)))


def as_box(domain: Domain) -> BoxDomain:
    """The box itself, or the smallest box containing the domain."""
    if isinstance(domain, BoxDomain):
        return domain
    if isinstance(domain, HilbertCubeDomain):
        b = domain.bounds
        return BoxDomain(-b, b)
    # every l_p unit ball lies in the l_inf unit ball
    r = domain.radius
    return BoxDomain(domain.center - r, domain.center + r)


def faces(box: BoxDomain) -> list[FaceId]:
    return [FaceId(i + 1, s) for i in range(box.dim) for s in (-1, 1)]


def outward_normal(box: BoxDomain, face: FaceId) -> np.ndarray:
    v = np.zeros(box.dim)
    v[face.axis - 1] = float(face.side)
    return v


def _face_value(box: BoxDomain, face: FaceId) -> float:
    i = face.axis - 1
    return float(box.lo[i] if face.side < 0 else box.hi[i])


def project(domain: Domain, x) -> np.ndarray:
    """Metric projection onto the domain (Euclidean for balls)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (domain.dim,):
        raise ValueError(f"expected a vector of length {domain.dim}, got shape {x.shape}")
    if isinstance(domain, BoxDomain):
        return np.minimum(np.maximum(x, domain.lo), domain.hi)
    if isinstance(domain, HilbertCubeDomain):
        b = domain.bounds
        return np.where(np.abs(x) < b, x, np.where(x >= b, b, -b))
    if domain.space.norm is not Norm.L2:
        raise ValueError(f"ball projection is only supported for the l2 norm, not {domain.space.label}")
    d = x - domain.center
    r = float(np.linalg.norm(d))
    # a few ulps of slack so that projected points are fixed points (exact idempotence)
    if r <= domain.radius * (1.0 + 8 * np.finfo(float).eps):
        return x.copy()
    return domain.center + d * (domain.radius / r)


def interior_distance(domain: Domain, z) -> float:
    """Distance from ``z`` to the boundary (l_inf for boxes, the ball norm for balls);
    negative when ``z`` is outside."""
    z = np.asarray(z, dtype=float)
    if isinstance(domain, BallDomain):
        return domain.radius - norm(domain.space, z - domain.center)
    box = as_box(domain)
    return float(min(np.min(z - box.lo), np.min(box.hi - z)))


def _axis_points(lo: float, hi: float, density: int) -> np.ndarray:
    if density == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, density)


def _face_grid(box: BoxDomain, face: FaceId, density: int) -> np.ndarray:
    i = face.axis - 1
    axes = [
        np.array([_face_value(box, face)]) if k == i else _axis_points(box.lo[k], box.hi[k], density)
        for k in range(box.dim)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _sphere_directions(n: int, density: int) -> np.ndarray:
    """Unit-sup-norm directions: the boundary of [-1,1]^n on a lattice, no repeats."""
    if n == 1:
        return np.array([[-1.0], [1.0]])
    if n == 2:
        # the cube-surface lattice is replaced by equal angles; same count, better spread
        th = 2.0 * np.pi * np.arange(density) / density
        d = np.stack([np.cos(th), np.sin(th)], axis=1)
        return d / np.max(np.abs(d), axis=1, keepdims=True)
    m = max(density, 2)
    pts = []
    seen = set()
    g = np.linspace(-1.0, 1.0, m)
    for i in range(n):
        for s in (-1.0, 1.0):
            for rest in itertools.product(g, repeat=n - 1):
                p = list(rest)
                p.insert(i, s)
                key = tuple(np.round(p, 12))
                if key not in seen:
                    seen.add(key)
                    pts.append(p)
    return np.array(pts)


def boundary_grid(domain: Domain, density: int) -> list[tuple[np.ndarray, object]]:
    """Deterministic boundary sample.

    Boxes (and the Hilbert cube) get a ``density^(n-1)`` lattice on each of
    the ``2n`` facets, corners included.  Balls get lattice directions pushed
    radially onto the sphere of the ball's own norm.
    """
    if density < 1:
        raise ValueError("density must be >= 1")
    if domain.dim > MAX_GRID_DIM:
        raise ValueError(
            f"grid sampling is limited to dimension <= {MAX_GRID_DIM}; "
            "use Lipschitz subdivision or Monte-Carlo sampling"
        )
    out: list[tuple[np.ndarray, object]] = []
    if isinstance(domain, BallDomain):
        for d in _sphere_directions(domain.dim, density):
            u = d / norm(domain.space, d)
            out.append((domain.center + domain.radius * u, SPHERE))
        return out
    box = as_box(domain)
    for face in faces(box):
        for p in _face_grid(box, face, density):
            out.append((p, face))
    return out


def boundary_random(domain: Domain, samples: int, seed: int = 0) -> list[tuple[np.ndarray, object]]:
    """Seeded uniform-ish boundary sample for dimensions beyond grid reach."""
    rng = np.random.default_rng(seed)
    out: list[tuple[np.ndarray, object]] = []
    if isinstance(domain, BallDomain):
        for _ in range(samples):
            d = rng.standard_normal(domain.dim)
            out.append((domain.center + domain.radius * d / norm(domain.space, d), SPHERE))
        return out
    box = as_box(domain)
    fs = faces(box)
    for k in range(samples):
        face = fs[k % len(fs)]
        p = rng.uniform(box.lo, box.hi)
        p[face.axis - 1] = _face_value(box, face)
        out.append((p, face))
    return out


def cell_radius(half_widths, space: Space | None = None) -> float:
    """Circumscribed radius of a box cell in the certification norm (default l_inf)."""
    h = np.asarray(half_widths, dtype=float)
    if space is None or space.norm is Norm.LINF:
        return float(np.max(h)) if h.size else 0.0
    return norm(Space(h.size, space.norm, space.p), h)


def facet_cell(box: BoxDomain, face: FaceId) -> tuple[np.ndarray, np.ndarray]:
    """The whole facet as a (center, half_widths) cell; the fixed axis has half-width 0."""
    c = box.center.copy()
    h = 0.5 * (box.hi - box.lo)
    i = face.axis - 1
    c[i] = _face_value(box, face)
    h[i] = 0.0
    return c, h


def split_cell(center: np.ndarray, half: np.ndarray, k: int = 2) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split along every axis with positive half-width into ``k`` equal parts."""
    free = np.flatnonzero(half > 0)
    h = half.copy()
    h[free] = half[free] / k
    offsets = [(-(k - 1) + 2 * m) for m in range(k)]
    cells = []
    for combo in itertools.product(offsets, repeat=free.size):
        c = center.copy()
        c[free] = center[free] + np.asarray(combo, dtype=float) * h[free]
        cells.append((c, h.copy()))
    return cells


def subdivide(box: BoxDomain, face: FaceId, k: int, space: Space | None = None) -> list[tuple[np.ndarray, float]]:
    """Partition a facet into ``k^(n-1)`` congruent cells: (center, radius) pairs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    c, h = facet_cell(box, face)
    return [(cc, cell_radius(hh, space)) for cc, hh in split_cell(c, h, k)]


def lattice(domain: Domain, resolution: int) -> np.ndarray:
    """``resolution^n`` lattice over the domain's bounding box, restricted to the domain."""
    box = as_box(domain)
    axes = [_axis_points(box.lo[k], box.hi[k], resolution) for k in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    if isinstance(domain, BallDomain):
        keep = [domain.contains(p, tol=1e-12) for p in pts]
        pts = pts[np.asarray(keep, dtype=bool)]
    return pts
