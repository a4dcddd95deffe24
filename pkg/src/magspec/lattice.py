"""Lattice points, phase folding and finite boxes in Z^d.

Lattice points are integer numpy arrays whose last axis has length d, so
every phase function in the package can be evaluated on whole batches of
points at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

TWO_PI = 2.0 * np.pi


def as_points(x, d=None):
    """Return ``x`` as an integer array of shape (..., d)."""
    arr = np.asarray(x)
    if arr.dtype.kind not in "iu":
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise ValueError("lattice points must have integer coordinates")
        arr = rounded
    arr = arr.astype(np.int64, copy=False)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if d is not None and arr.shape[-1] != d:
        raise ValueError(f"dimension mismatch: expected d={d}, got points of shape {arr.shape}")
    return arr


def fold_phase(phase):
    """Fold real phases into (-pi, pi]; the branch cut at pi belongs to +pi."""
    p = np.asarray(phase, dtype=float)
    return np.pi - np.mod(np.pi - p, TWO_PI)


def phase_defect(a, b):
    """Absolute folded difference |a - b| mod 2pi, in [0, pi]."""
    return np.abs(fold_phase(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def lex_less(x, y):
    """Strict lexicographic order on batches of lattice points."""
    x = np.asarray(x)
    y = np.asarray(y)
    x, y = np.broadcast_arrays(x, y)
    diff = y - x
    nonzero = diff != 0
    first = np.argmax(nonzero, axis=-1)
    lead = np.take_along_axis(diff, first[..., None], axis=-1)[..., 0]
    return nonzero.any(axis=-1) & (lead > 0)


def triangle_area(a, b, c):
    """Euclidean area of the triangle spanned by points in R^d (any d)."""
    a = np.asarray(a, dtype=float)
    u = np.asarray(b, dtype=float) - a
    v = np.asarray(c, dtype=float) - a
    uu = np.sum(u * u, axis=-1)
    vv = np.sum(v * v, axis=-1)
    uv = np.sum(u * v, axis=-1)
    gram = np.maximum(uu * vv - uv * uv, 0.0)
    return 0.5 * np.sqrt(gram)


def window_points(d, radius, center=None):
    """All points with max-norm distance <= radius from ``center``, lex order."""
    if radius < 0:
        raise ValueError("empty window: radius must be >= 0")
    axis = np.arange(-radius, radius + 1)
    pts = np.array(list(product(axis, repeat=d)), dtype=np.int64).reshape(-1, d)
    if center is not None:
        pts = pts + as_points(center, d)
    return pts


@dataclass(frozen=True)
class Box:
    """Finite truncation of Z^d.

    Dirichlet boxes hold the sites with max-norm <= L, or the sites
    0..side-1 when ``sides`` is given.  Periodic boxes are tori with side
    lengths ``sides`` (default 2L+1 on every axis) and sites 0..side-1; ``period`` is the translation lattice under which symbol and
    cochain must be invariant, and each period component must divide the
    matching side.
    """

    d: int
    L: int
    boundary: str = "dirichlet"
    sides: tuple | None = None
    period: tuple | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.L < 0:
            raise ValueError("radius must be >= 0")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "dirichlet":
            if self.period is not None:
                raise ValueError("period only applies to periodic boxes")
            if self.sides is not None:
                sides = tuple(int(s) for s in self.sides)
                if len(sides) != self.d or any(s < 1 for s in sides):
                    raise ValueError("sides need one positive entry per dimension")
                object.__setattr__(self, "sides", sides)
            return
        sides = tuple(int(s) for s in (self.sides or (2 * self.L + 1,) * self.d))
        period = tuple(int(p) for p in (self.period or sides))
        if len(sides) != self.d or len(period) != self.d:
            raise ValueError("sides and period need one entry per dimension")
        if any(s < 1 for s in sides) or any(p < 1 for p in period):
            raise ValueError("sides and period must be positive")
        for s, p in zip(sides, period):
            if s % p:
                raise ValueError(f"period component {p} does not divide box side {s}")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "period", period)

    @classmethod
    def periodic(cls, sides, period=None):
        sides = tuple(int(s) for s in sides)
        return cls(d=len(sides), L=(max(sides) - 1) // 2, boundary="periodic",
                   sides=sides, period=period)

    @classmethod
    def dirichlet(cls, sides):
        """Rectangular Dirichlet box with sites 0..side-1 on each axis."""
        sides = tuple(int(s) for s in sides)
        return cls(d=len(sides), L=(max(sides) - 1) // 2, sides=sides)

    @property
    def shape(self):
        if self.sides is None:
            return (2 * self.L + 1,) * self.d
        return self.sides

    @property
    def lower(self):
        if self.sides is None:
            return np.full(self.d, -self.L, dtype=np.int64)
        return np.zeros(self.d, dtype=np.int64)

    @property
    def n_sites(self):
        return int(np.prod(self.shape))

    def sites(self):
        """Sites in row-major lexicographic order, shape (n_sites, d)."""
        grids = np.meshgrid(*[np.arange(n) for n in self.shape], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1).astype(np.int64)
        return pts + self.lower

    def contains(self, points):
        rel = as_points(points, self.d) - self.lower
        return np.all((rel >= 0) & (rel < np.array(self.shape)), axis=-1)

    def interior(self, margin):
        """Mask of sites at lattice distance >= margin from every face of the box."""
        rel = self.sites() - self.lower
        return np.all((rel >= margin) & (rel <= np.array(self.shape) - 1 - margin), axis=-1)

    def wrap(self, points):
        """Reduce points onto the torus (periodic boxes only)."""
        if self.boundary != "periodic":
            raise ValueError("wrap is only defined for periodic boxes")
        return np.mod(as_points(points, self.d), np.array(self.sides))

    def index(self, points):
        """Row-major index of points that lie in the box."""
        rel = as_points(points, self.d) - self.lower
        return np.ravel_multi_index(tuple(np.moveaxis(rel, -1, 0)), self.shape)

    def describe(self):
        out = {"d": self.d, "L": self.L, "boundary": self.boundary}
        if self.sides is not None:
            out["sides"] = list(self.sides)
        if self.boundary == "periodic":
            out["period"] = list(self.period)
        return out

    @classmethod
    def from_dict(cls, spec):
        boundary = spec.get("boundary", "dirichlet")
        if "sides" in spec:
            if boundary == "periodic":
                box = cls.periodic(spec["sides"], spec.get("period"))
            else:
                box = cls.dirichlet(spec["sides"])
            if int(spec.get("d", box.d)) != box.d:
                raise ValueError("box.d does not match the length of box.sides")
            return box
        return cls(d=int(spec["d"]), L=int(spec["L"]), boundary=boundary,
                   period=tuple(spec["period"]) if spec.get("period") else None)
