"""Magnetic potentials, their 2-cocycles and 1-cochains.

Everything is stored and compared as real phases (radians).  Identities
that hold "mod 2pi" are tested with :func:`magspec.lattice.phase_defect`,
never on complex exponentials.

All phase functions are vectorized: arguments are integer arrays of shape
(..., d) and the result has shape (...).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import as_points, fold_phase, lex_less, phase_defect, window_points

TIE_TOL = 1e-9


class NonMagneticCocycleError(ValueError):
    """Raised when a cocycle fails the invariants required for reconstruction."""


class AntisymmetryError(ValueError):
    pass


def _splitmix(z):
    z = (z + np.uint64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_uniform(seed, *arrays):
    """Deterministic uniform numbers in [-1, 1) keyed by integer arrays.

    Used to build "random" potentials and gauges that can be evaluated at any
    lattice point, not just on a precomputed window.
    """
    with np.errstate(over="ignore"):
        h = _splitmix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + np.zeros((), np.uint64))
        for a in arrays:
            a = np.asarray(a, dtype=np.int64)
            for k in range(a.shape[-1]):
                h = _splitmix(h ^ a[..., k].astype(np.uint64))
            h = _splitmix(h + np.uint64(0x632BE59BD9B4E019))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 52) - 1.0


@dataclass(frozen=True)
class MagneticPotential:
    """Antisymmetric phase function on pairs of lattice sites.

    ``func`` receives integer arrays of shape (..., d).  Constructors make
    antisymmetry hold exactly in floating point; for an arbitrary callable,
    :meth:`from_callable` evaluates it on lexicographically ordered pairs
    only and mirrors the result.
    """

    func: Callable
    d: int
    kind: str = "callable"
    params: dict = field(default_factory=dict)
    # K such that |phase around x,y,z| <= K * area(x,y,z) is known to hold
    triangle_constant: float | None = None

    def phase(self, x, y):
        x = as_points(x, self.d)
        y = as_points(y, self.d)
        x, y = np.broadcast_arrays(x, y)
        return np.asarray(self.func(x, y), dtype=float)

    __call__ = phase

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, d):
        return cls(lambda x, y: np.zeros(x.shape[:-1]), d, "zero", {}, 0.0)

    @classmethod
    def symmetric_gauge(cls, B, d=2):
        """Constant field B per unit plaquette, phase (B/2)(x1 y2 - x2 y1)."""
        if d != 2:
            raise ValueError("symmetric gauge is defined for d=2")
        B = float(B)

        def func(x, y):
            return 0.5 * B * (x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0])

        return cls(func, 2, "symmetric_gauge", {"B": B}, abs(B))

    @classmethod
    def landau_gauge(cls, B, d=2):
        """Constant field B, line integral of A = (0, B x1): B (x1+y1)/2 (y2-x2)."""
        if d != 2:
            raise ValueError("Landau gauge is defined for d=2")
        B = float(B)

        def func(x, y):
            return 0.5 * B * ((x[..., 0] + y[..., 0]) * (y[..., 1] - x[..., 1]))

        return cls(func, 2, "landau_gauge", {"B": B}, abs(B))

    @classmethod
    def random(cls, d, scale=1.0, seed=0):
        """Pseudo-random potential with values in [-scale, scale], defined on all of Z^d."""
        scale = float(scale)

        def func(x, y):
            return 0.5 * scale * (hash_uniform(seed, x, y) - hash_uniform(seed, y, x))

        return cls(func, d, "random", {"scale": scale, "seed": int(seed)})

    @classmethod
    def from_callable(cls, f, d, kind="callable", params=None):
        def func(x, y):
            ordered = lex_less(x, y)
            first = np.where(ordered[..., None], x, y)
            second = np.where(ordered[..., None], y, x)
            val = np.asarray(f(first, second), dtype=float)
            val = np.broadcast_to(val, ordered.shape)
            out = np.where(ordered, val, -val)
            return np.where(np.all(x == y, axis=-1), 0.0, out)

        return cls(func, d, kind, dict(params or {}))

    @classmethod
    def from_table(cls, entries, d, strict=True):
        """Potential given by a finite table of ((x), (y), phase) entries.

        Pairs absent from the table have phase 0; a pair listed in one order
        only is mirrored.  With ``strict`` a table that lists both orders
        with non-opposite phases raises :class:`AntisymmetryError`.
        """
        table = {}
        raw = []
        for x, y, ph in entries:
            x = tuple(int(c) for c in x)
            y = tuple(int(c) for c in y)
            if len(x) != d or len(y) != d:
                raise ValueError(f"table entry {x}, {y} does not have dimension {d}")
            raw.append((x, y, float(ph)))
        if strict:
            report = check_table_antisymmetry(raw)
            if not report.passed:
                raise AntisymmetryError(
                    f"table is not antisymmetric at {report.worst_pair}: defect {report.max_defect}")
        for x, y, ph in raw:
            if x == y:
                continue
            if lex_less(np.array(x), np.array(y)):
                table[(x, y)] = ph
            else:
                table[(y, x)] = -ph

        def lookup(first, second):
            flat_a = first.reshape(-1, d)
            flat_b = second.reshape(-1, d)
            out = np.fromiter((table.get((tuple(a), tuple(b)), 0.0)
                               for a, b in zip(flat_a.tolist(), flat_b.tolist())),
                              dtype=float, count=flat_a.shape[0])
            return out.reshape(first.shape[:-1])

        pot = cls.from_callable(lookup, d, "table", {"entries": raw})
        return pot

    # serialization ------------------------------------------------------

    def to_dict(self):
        out = {"kind": self.kind, "d": self.d}
        if self.kind in ("symmetric_gauge", "landau_gauge"):
            out["B"] = self.params["B"]
        elif self.kind == "random":
            out.update(scale=self.params["scale"], seed=self.params["seed"])
        elif self.kind == "table":
            out["table"] = [[list(x), list(y), ph] for x, y, ph in self.params["entries"]]
        elif self.kind != "zero":
            raise ValueError(f"potential of kind {self.kind!r} is not serializable")
        return out

    @classmethod
    def from_dict(cls, spec, strict=True):
        kind = spec.get("kind")
        d = int(spec.get("d", 2))
        if kind == "zero":
            return cls.zero(d)
        if kind == "symmetric_gauge":
            return cls.symmetric_gauge(spec["B"], d)
        if kind == "landau_gauge":
            return cls.landau_gauge(spec["B"], d)
        if kind == "random":
            return cls.random(d, spec.get("scale", 1.0), spec.get("seed", 0))
        if kind == "table":
            return cls.from_table(spec.get("table", []), d, strict=strict)
        raise ValueError(f"unknown potential kind {kind!r}")


@dataclass(frozen=True)
class AntisymmetryReport:
    max_defect: float
    worst_pair: tuple | None
    passed: bool


def check_table_antisymmetry(entries, tol=0.0):
    """Compare every pair listed in both orders; entries are ((x), (y), phase)."""
    seen = {}
    worst, worst_pair = 0.0, None
    for x, y, ph in entries:
        x, y = tuple(x), tuple(y)
        if x == y and ph != 0.0:
            if abs(ph) > worst:
                worst, worst_pair = abs(float(ph)), (x, y)
        if (y, x) in seen:
            defect = abs(seen[(y, x)] + float(ph))
            if defect > worst:
                worst, worst_pair = defect, (x, y)
        seen[(x, y)] = float(ph)
    return AntisymmetryReport(worst, worst_pair, worst <= tol)


@dataclass(frozen=True)
class GaugeFunction:
    """Arbitrary real function on Z^d."""

    func: Callable
    d: int
    kind: str = "callable"
    params: dict = field(default_factory=dict)

    def value(self, x):
        x = as_points(x, self.d)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape[:-1])

    __call__ = value

    @classmethod
    def zero(cls, d):
        return cls(lambda x: np.zeros(x.shape[:-1]), d, "zero")

    @classmethod
    def random(cls, d, scale=1.0, seed=0):
        scale = float(scale)
        return cls(lambda x: scale * hash_uniform(seed, x), d, "random",
                   {"scale": scale, "seed": int(seed)})

    @classmethod
    def origin_gauge(cls, pot):
        """g(x) = pot(x, 0): relates the direct and transversal cochains."""
        zero = np.zeros(pot.d, dtype=np.int64)
        return cls(lambda x: pot.phase(x, zero), pot.d, "origin_gauge")

    def to_dict(self):
        if self.kind == "zero":
            return {"kind": "zero", "d": self.d}
        if self.kind == "random":
            return {"kind": "random", "d": self.d, **self.params}
        raise ValueError(f"gauge of kind {self.kind!r} is not serializable")

    @classmethod
    def from_dict(cls, spec):
        if spec["kind"] == "zero":
            return cls.zero(int(spec["d"]))
        if spec["kind"] == "random":
            return cls.random(int(spec["d"]), spec.get("scale", 1.0), spec.get("seed", 0))
        raise ValueError(f"unknown gauge kind {spec['kind']!r}")


@dataclass(frozen=True)
class TwoCocycle:
    """Phase of a normalized Z^d-cocycle with values in unit phases."""

    func: Callable
    d: int
    label: str = "cocycle"
    potential: MagneticPotential | None = None

    def phase(self, q, x, y):
        q = as_points(q, self.d)
        x = as_points(x, self.d)
        y = as_points(y, self.d)
        q, x, y = np.broadcast_arrays(q, x, y)
        return np.asarray(self.func(q, x, y), dtype=float)

    __call__ = phase

    def value(self, q, x, y):
        return np.exp(1j * self.phase(q, x, y))

    def scaled(self, eps):
        eps = float(eps)
        pot = None
        if self.potential is not None:
            base = self.potential
            pot = MagneticPotential(lambda a, b: eps * base.func(a, b), base.d,
                                    "scaled", {"eps": eps, "base": base.kind},
                                    None if base.triangle_constant is None
                                    else abs(eps) * base.triangle_constant)
        return TwoCocycle(lambda q, x, y: eps * self.func(q, x, y), self.d,
                          f"{eps!r}*{self.label}", pot)

    @classmethod
    def trivial(cls, d):
        return cls(lambda q, x, y: np.zeros(q.shape[:-1]), d, "trivial",
                   MagneticPotential.zero(d))


@dataclass(frozen=True)
class OneCochain:
    """Phase of a 1-cochain lambda(q; x)."""

    func: Callable
    d: int
    label: str = "cochain"

    def phase(self, q, x):
        q = as_points(q, self.d)
        x = as_points(x, self.d)
        q, x = np.broadcast_arrays(q, x)
        return np.asarray(self.func(q, x), dtype=float)

    __call__ = phase

    def value(self, q, x):
        return np.exp(1j * self.phase(q, x))

    def scaled(self, eps):
        eps = float(eps)
        return OneCochain(lambda q, x: eps * self.func(q, x), self.d, f"{eps!r}*{self.label}")

    def perturbed(self, site, offset, delta):
        """Copy with the phase at a single (q; x) shifted by ``delta`` (for negative controls)."""
        site = as_points(site, self.d)
        offset = as_points(offset, self.d)
        base = self.func

        def func(q, x):
            hit = np.all(q == site, axis=-1) & np.all(x == offset, axis=-1)
            return base(q, x) + np.where(hit, delta, 0.0)

        return OneCochain(func, self.d, f"perturbed({self.label})")


# operations ---------------------------------------------------------------

def cocycle_from_potential(pot: MagneticPotential) -> TwoCocycle:
    """omega(q; x, y) = phi(q, q+x) + phi(q+x, q+x+y) + phi(q+x+y, q), as a real phase."""
    f = pot.func

    def func(q, x, y):
        a = q + x
        b = a + y
        return f(q, a) + f(a, b) + f(b, q)

    return TwoCocycle(func, pot.d, f"omega[{pot.kind}]", pot)


def cochain_transversal(coc: TwoCocycle) -> OneCochain:
    """lambda_t(q; x) = omega(0; q, x)."""
    f = coc.func

    def func(q, x):
        return f(np.zeros_like(q), q, x)

    return OneCochain(func, coc.d, f"transversal[{coc.label}]")


def cochain_direct(pot: MagneticPotential) -> OneCochain:
    """lambda_phi(q; x) = phi(q, q+x)."""
    f = pot.func
    return OneCochain(lambda q, x: f(q, q + x), pot.d, f"direct[{pot.kind}]")


def gauge_transform_potential(pot: MagneticPotential, g: GaugeFunction) -> MagneticPotential:
    """phi'(x, y) = phi(x, y) + g(y) - g(x)."""
    if g.d != pot.d:
        raise ValueError("dimension mismatch between potential and gauge")
    f, gf = pot.func, g.func

    def func(x, y):
        # grouping keeps phi'(x,y) == -phi'(y,x) bit for bit
        return f(x, y) + (gf(y) - gf(x))

    return MagneticPotential(func, pot.d, "gauge_transformed", {"base": pot.kind}, pot.triangle_constant)


@dataclass(frozen=True)
class CocycleReport:
    cocycle_defect: float
    normalization_defect: float
    inverse_defect: float
    n_samples: int
    tol: float

    @property
    def max_defect(self):
        return max(self.cocycle_defect, self.normalization_defect, self.inverse_defect)

    @property
    def passed(self):
        return self.max_defect <= self.tol


def cocycle_defects(coc: TwoCocycle, q, x, y, z):
    """Folded defects of the cocycle identity, normalization and omega(x,-x) = 1."""
    q = as_points(q, coc.d)
    x = as_points(x, coc.d)
    y = as_points(y, coc.d)
    z = as_points(z, coc.d)
    lhs = coc.phase(q, x + y, z) + coc.phase(q, x, y)
    rhs = coc.phase(q + x, y, z) + coc.phase(q, x, y + z)
    zero = np.zeros_like(x)
    norm = np.maximum(phase_defect(coc.phase(q, x, zero), 0.0),
                      phase_defect(coc.phase(q, zero, x), 0.0))
    inv = phase_defect(coc.phase(q, x, -x), 0.0)
    return phase_defect(lhs, rhs), norm, inv


def check_cocycle(coc: TwoCocycle, n=1000, radius=6, rng=None, tol=1e-12, samples=None):
    """Check the three cocycle invariants on random points of a window.

    ``samples`` may supply explicit (q, x, y, z) arrays instead.
    """
    if samples is None:
        rng = np.random.default_rng(rng)
        samples = rng.integers(-radius, radius + 1, size=(4, n, coc.d))
    q, x, y, z = samples
    c, nm, inv = cocycle_defects(coc, q, x, y, z)
    return CocycleReport(float(np.max(c)), float(np.max(nm)), float(np.max(inv)),
                         int(np.shape(q)[0]), tol)


def potential_from_cocycle(coc: TwoCocycle, check_radius=2, tol=1e-9) -> MagneticPotential:
    """Magnetic potential whose cocycle is ``coc``: e^{i phi(x,y)} = omega(0; x, y-x).

    The branch is (-pi, pi); when omega(0; x, y-x) = -1 (within TIE_TOL of
    phase pi) phi(x, y) is -pi if x precedes y lexicographically, +pi
    otherwise.  The cocycle is first checked on 500 sampled points of a
    window of the given radius and rejected if an invariant fails by more
    than ``tol``.
    """
    if check_radius is not None:
        report = check_cocycle(coc, n=500, radius=check_radius, rng=0, tol=tol)
        if not report.passed:
            raise NonMagneticCocycleError(
                f"cocycle violates its invariants (max defect {report.max_defect:.3g})")
    f = coc.func

    def ordered(first, second):
        # first < second lexicographically
        p = fold_phase(f(np.zeros_like(first), first, second - first))
        tie = np.abs(np.abs(p) - np.pi) <= TIE_TOL
        return np.where(tie, -np.pi, p)

    pot = MagneticPotential.from_callable(ordered, coc.d, "reconstructed", {"from": coc.label})
    return pot


@dataclass(frozen=True)
class CochainReport:
    max_defect: float
    worst: tuple | None
    n_triples: int
    tol: float

    @property
    def passed(self):
        return self.max_defect <= self.tol


def cochain_defects(lam: OneCochain, coc: TwoCocycle, q, x, y):
    """Folded defect of lambda(q;x) + lambda(q+x;y) - lambda(q;x+y) vs omega(q;x,y)."""
    lhs = lam.phase(q, x) + lam.phase(q + x, y) - lam.phase(q, x + y)
    return phase_defect(lhs, coc.phase(q, x, y))


def verify_cochain(lam: OneCochain, coc: TwoCocycle, window, tol=1e-12) -> CochainReport:
    """Check the 1-cochain equation on every (q, x, y) triple of the window.

    ``window`` is a :class:`~magspec.lattice.Box` or an integer radius.
    """
    if lam.d != coc.d:
        raise ValueError("dimension mismatch between cochain and cocycle")
    if hasattr(window, "sites"):
        pts = window.sites()
    else:
        pts = window_points(coc.d, int(window))
    m = pts.shape[0]
    if m == 0:
        raise ValueError("empty window")
    i, j, k = np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij")
    q, x, y = pts[i.ravel()], pts[j.ravel()], pts[k.ravel()]
    defects = cochain_defects(lam, coc, q, x, y)
    w = int(np.argmax(defects))
    worst = (tuple(q[w].tolist()), tuple(x[w].tolist()), tuple(y[w].tolist()))
    return CochainReport(float(defects[w]), worst, int(m ** 3), tol)
