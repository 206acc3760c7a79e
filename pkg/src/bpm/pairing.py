"""Norms, duality-map selections and semi-inner products on (R^n, l_p).

The normalized duality map of a space sends ``y`` to the set
``J(y) = {j : <y, j> = |y|^2, |j|_* = |y|}``.  Functionals are represented
as coordinate vectors acting through the Euclidean dot product, so the dual
norm of ``l_p`` is ``l_q`` with ``1/p + 1/q = 1``.

``pair`` evaluates the three shipped functionals:

* ``PLUS``  -- max of ``<x, j>`` over ``j`` in ``J(y)``
* ``MINUS`` -- min of ``<x, j>`` over ``j`` in ``J(y)``
* ``RAY``   -- ``PLUS`` when ``x`` is a real multiple of ``y``, else 0

All of them are positive on the diagonal and homogeneous in the first
argument along the diagonal, which is all the zero-existence theorem asks of
a pairing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "Norm",
    "Space",
    "PairingKind",
    "RAY_EPS",
    "norm",
    "dual_norm",
    "duality_select",
    "pair",
    "is_collinear",
]

RAY_EPS = 1e-9


class Norm(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LP = "lp"
    LINF = "linf"


class PairingKind(str, enum.Enum):
    PLUS = "plus"
    MINUS = "minus"
    RAY = "ray"


@dataclass(frozen=True)
class Space:
    """Finite-dimensional l_p space.

    ``Space(2, "linf")``, ``Space(3, "lp", p=3.0)``.
    """

    dim: int
    norm: Norm = Norm.L2
    p: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm(self.norm))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.norm is Norm.LP:
            if self.p is None or not (1.0 < float(self.p) < np.inf):
                raise ValueError("lp norm needs 1 < p < inf")
            object.__setattr__(self, "p", float(self.p))
        elif self.p is not None:
            raise ValueError(f"p is only meaningful for the lp norm, not {self.norm.value}")

    @classmethod
    def parse(cls, dim: int, name: str) -> "Space":
        """Build from a textual norm name: ``l1``, ``l2``, ``linf`` or ``l<p>``."""
        key = name.strip().lower()
        if key in ("l1", "l2", "linf"):
            return cls(dim, Norm(key))
        if key.startswith("l"):
            try:
                p = float(key[1:])
            except ValueError:
                raise ValueError(f"unknown norm {name!r}") from None
            if p == 1.0:
                return cls(dim, Norm.L1)
            if p == 2.0:
                return cls(dim, Norm.L2)
            return cls(dim, Norm.LP, p=p)
        raise ValueError(f"unknown norm {name!r}")

    @property
    def exponent(self) -> float:
        return {Norm.L1: 1.0, Norm.L2: 2.0, Norm.LINF: np.inf}.get(self.norm, self.p)

    @property
    def dual_exponent(self) -> float:
        p = self.exponent
        if p == 1.0:
            return np.inf
        if p == np.inf:
            return 1.0
        return p / (p - 1.0)

    @property
    def smooth(self) -> bool:
        return self.norm in (Norm.L2, Norm.LP)

    @property
    def label(self) -> str:
        if self.norm is Norm.LP:
            return f"l{self.p:g}"
        return self.norm.value


def _vec(space: Space, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (space.dim,):
        raise ValueError(f"expected a vector of length {space.dim}, got shape {x.shape}")
    return x


def _pnorm(x: np.ndarray, p: float) -> float:
    if p == np.inf:
        return float(np.max(np.abs(x))) if x.size else 0.0
    if p == 1.0:
        return float(np.sum(np.abs(x)))
    if p == 2.0:
        return float(np.sqrt(np.dot(x, x)))
    m = float(np.max(np.abs(x)))
    if m == 0.0:
        return 0.0
    # scale first so |x_i|^p cannot overflow
    return m * float(np.sum((np.abs(x) / m) ** p)) ** (1.0 / p)


def norm(space: Space, x) -> float:
    return _pnorm(_vec(space, x), space.exponent)


def dual_norm(space: Space, j) -> float:
    return _pnorm(_vec(space, j), space.dual_exponent)


def duality_select(space: Space, y) -> np.ndarray:
    """Return one deterministic element of ``J(y)``.

    Where ``J(y)`` is a set, the choice is: for ``l1``, zero dual coordinates
    on the zero coordinates of ``y``; for ``linf``, the signed unit vector of
    the smallest index attaining ``|y|_inf``.
    """
    y = _vec(space, y)
    if not np.any(y):
        return np.zeros_like(y)
    if space.norm is Norm.L2:
        return y.copy()
    if space.norm is Norm.L1:
        return _pnorm(y, 1.0) * np.sign(y)
    if space.norm is Norm.LINF:
        a = np.abs(y)
        k = int(np.argmax(a))  # argmax returns the first maximal index
        j = np.zeros_like(y)
        j[k] = a[k] * np.sign(y[k])
        return j
    p = space.p
    ny = _pnorm(y, p)
    # ny^(2-p) |y|^(p-1) sign(y), written so tiny or huge y do not under/overflow
    return ny * (np.abs(y) / ny) ** (p - 1.0) * np.sign(y)


def _extreme_pairings(space: Space, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(max, min) of <x, j> over the extreme points of J(y)."""
    if not np.any(y):
        return 0.0, 0.0
    if space.smooth:
        v = float(np.dot(x, duality_select(space, y)))
        return v, v
    if space.norm is Norm.L1:
        r = _pnorm(y, 1.0)
        nz = y != 0
        fixed = float(np.dot(np.sign(y[nz]), x[nz]))
        free = float(np.sum(np.abs(x[~nz])))
        return r * (fixed + free), r * (fixed - free)
    a = np.abs(y)
    m = float(np.max(a))
    ties = np.flatnonzero(a == m)
    vals = m * np.sign(y[ties]) * x[ties]
    return float(np.max(vals)), float(np.min(vals))


def is_collinear(x, y, eps: float = RAY_EPS) -> bool:
    """Whether ``x`` is numerically a real multiple of ``y`` (Euclidean test)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    yy = float(np.dot(y, y))
    if yy == 0.0:
        return not np.any(x)
    lam = float(np.dot(x, y)) / yy
    return float(np.linalg.norm(x - lam * y)) <= eps * float(np.linalg.norm(x))


def pair(space: Space, kind: PairingKind | str, x, y) -> float:
    kind = PairingKind(kind)
    x = _vec(space, x)
    y = _vec(space, y)
    if kind is PairingKind.RAY:
        if not is_collinear(x, y):
            return 0.0
        return _extreme_pairings(space, x, y)[0]
    hi, lo = _extreme_pairings(space, x, y)
    return hi if kind is PairingKind.PLUS else lo
