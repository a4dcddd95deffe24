"""Finitely supported symbols and the twisted convolution algebra.

A symbol h is a finite map offset x -> coefficient field q -> h(q; x).  The
twisted product and involution are evaluated lazily: a product symbol keeps
references to its factors and computes coefficients only when asked.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Callable, Mapping

import numpy as np

from .lattice import as_points, window_points
from .magnetic import TwoCocycle, hash_uniform

DEFAULT_WINDOW_RADIUS = 6


@dataclass(frozen=True)
class CoefficientField:
    """Bounded complex function on Z^d.

    ``bound`` is a certified sup over all of Z^d when known (constant, table
    and periodic fields); otherwise it is None and :meth:`sup` falls back to
    a window estimate.
    """

    func: Callable
    d: int
    bound: float | None = None
    kind: str = "callable"
    params: dict = field(default_factory=dict)

    def value(self, q):
        q = as_points(q, self.d)
        out = np.asarray(self.func(q), dtype=complex)
        return np.broadcast_to(out, q.shape[:-1])

    __call__ = value

    @property
    def certified(self):
        return self.bound is not None

    def sup(self, window=None):
        """(sup |value|, certified).  Uses ``window`` only when no bound is certified."""
        if self.bound is not None:
            return float(self.bound), True
        pts = _window_sites(self.d, window)
        return float(np.max(np.abs(self.value(pts)))), False

    @classmethod
    def constant(cls, c, d):
        c = complex(c)
        return cls(lambda q: np.full(q.shape[:-1], c, dtype=complex), d, abs(c),
                   "const", {"value": c})

    @classmethod
    def table(cls, values, d):
        """Finitely many prescribed values {point: c}; zero elsewhere."""
        vals = {tuple(int(v) for v in k): complex(c) for k, c in dict(values).items()}
        for k in vals:
            if len(k) != d:
                raise ValueError(f"table point {k} does not have dimension {d}")

        def func(q):
            flat = q.reshape(-1, d).tolist()
            out = np.fromiter((vals.get(tuple(p), 0j) for p in flat), dtype=complex,
                              count=len(flat))
            return out.reshape(q.shape[:-1])

        bound = max((abs(c) for c in vals.values()), default=0.0)
        return cls(func, d, bound, "table", {"values": vals})

    @classmethod
    def periodic(cls, cell):
        """Periodic field with one period given by the array ``cell`` (shape = period)."""
        cell = np.asarray(cell, dtype=complex)
        d = cell.ndim
        period = np.array(cell.shape)

        def func(q):
            idx = np.mod(q, period)
            return cell[tuple(np.moveaxis(idx, -1, 0))]

        return cls(func, d, float(np.max(np.abs(cell))), "periodic", {"cell": cell})

    @classmethod
    def random(cls, d, seed=0, amplitude=1.0):
        """Position-dependent pseudo-random field with |value| <= amplitude everywhere."""
        amp = float(amplitude)

        def func(q):
            re = hash_uniform(seed, q)
            im = hash_uniform(seed + 1, q)
            return amp * (re + 1j * im) / np.sqrt(2.0)

        return cls(func, d, amp, "random", {"seed": int(seed), "amplitude": amp})

    @classmethod
    def indicator(cls, point, d, c=1.0):
        return cls.table({tuple(point): c}, d)

    def scaled(self, c):
        c = complex(c)
        f = self.func
        return CoefficientField(lambda q: c * f(q), self.d,
                                None if self.bound is None else abs(c) * self.bound,
                                "scaled", {"c": c, "base": self.kind})

    def to_dict(self):
        if self.kind == "const":
            c = self.params["value"]
            return {"kind": "const", "value": [c.real, c.imag]}
        if self.kind == "table":
            return {"kind": "table",
                    "entries": [[list(k), c.real, c.imag] for k, c in self.params["values"].items()]}
        if self.kind == "periodic":
            cell = self.params["cell"]
            return {"kind": "periodic", "shape": list(cell.shape),
                    "re": cell.real.ravel().tolist(), "im": cell.imag.ravel().tolist()}
        if self.kind == "random":
            return {"kind": "random", **self.params}
        raise ValueError(f"coefficient of kind {self.kind!r} is not serializable")

    @classmethod
    def from_dict(cls, spec, d):
        kind = spec["kind"]
        if kind == "const":
            v = spec["value"]
            return cls.constant(complex(v[0], v[1]) if isinstance(v, list) else v, d)
        if kind == "table":
            return cls.table({tuple(e[0]): complex(e[1], e[2]) for e in spec["entries"]}, d)
        if kind == "periodic":
            cell = (np.asarray(spec["re"]) + 1j * np.asarray(spec["im"])).reshape(spec["shape"])
            if cell.ndim != d:
                raise ValueError("periodic cell dimension does not match d")
            return cls.periodic(cell)
        if kind == "random":
            return cls.random(d, int(spec.get("seed", 0)), spec.get("amplitude", 1.0))
        raise ValueError(f"unknown coefficient kind {kind!r}")


def _window_sites(d, window):
    if window is None:
        return window_points(d, DEFAULT_WINDOW_RADIUS)
    if hasattr(window, "sites"):
        return window.sites()
    if np.isscalar(window):
        return window_points(d, int(window))
    return as_points(window, d)


def _key(x):
    return tuple(int(v) for v in np.asarray(x).ravel())


@dataclass(frozen=True)
class Symbol:
    """Finitely supported element of l^1(Z^d; l^inf(Z^d))."""

    d: int
    terms: Mapping[tuple, CoefficientField]
    label: str = "symbol"

    def __post_init__(self):
        clean = {}
        for off, cf in self.terms.items():
            key = _key(off)
            if len(key) != self.d:
                raise ValueError(f"offset {key} does not have dimension {self.d}")
            if cf.d != self.d:
                raise ValueError(f"coefficient at {key} has dimension {cf.d}, expected {self.d}")
            clean[key] = cf
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @property
    def support(self):
        return list(self.terms)

    @property
    def radius(self):
        """Max-norm radius of the support."""
        return max((max(abs(c) for c in off) for off in self.terms), default=0)

    def coeff(self, offset):
        key = _key(offset)
        if key in self.terms:
            return self.terms[key]
        return CoefficientField.constant(0.0, self.d)

    def evaluate(self, q, offset):
        return self.coeff(offset).value(q)

    def scaled(self, c):
        return Symbol(self.d, {k: v.scaled(c) for k, v in self.terms.items()},
                      f"{c}*{self.label}")

    def __add__(self, other):
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        terms = dict(self.terms)
        for k, cf in other.terms.items():
            if k in terms:
                a, b = terms[k], cf
                bound = None if a.bound is None or b.bound is None else a.bound + b.bound
                terms[k] = CoefficientField(lambda q, a=a, b=b: a.func(q) + b.func(q),
                                            self.d, bound, "sum")
            else:
                terms[k] = cf
        return Symbol(self.d, terms, f"{self.label}+{other.label}")

    # builders -----------------------------------------------------------

    @classmethod
    def delta(cls, offset, d=None, c=1.0):
        offset = _key(offset)
        d = len(offset) if d is None else d
        cf = c if isinstance(c, CoefficientField) else CoefficientField.constant(c, d)
        return cls(d, {offset: cf}, f"delta{offset}")

    @classmethod
    def identity(cls, d):
        return cls.delta((0,) * d, d)

    @classmethod
    def harper(cls, d=2, t=1.0):
        """Unit hopping t on the 2d nearest-neighbour offsets."""
        terms = {}
        for axis in range(d):
            for sign in (1, -1):
                off = [0] * d
                off[axis] = sign
                terms[tuple(off)] = CoefficientField.constant(t, d)
        return cls(d, terms, "harper")

    @classmethod
    def diagonal_potential(cls, V, d):
        """Offset 0 carrying a real on-site potential (table dict or coefficient field)."""
        cf = V if isinstance(V, CoefficientField) else CoefficientField.table(V, d)
        return cls(d, {(0,) * d: cf}, "diagonal_potential")

    @classmethod
    def from_function(cls, h, d, radius):
        """Symbol with coefficients q -> h(q, x) for all offsets of max-norm <= radius."""
        terms = {}
        for off in window_points(d, radius):
            key = _key(off)
            terms[key] = CoefficientField(lambda q, key=key: h(q, np.array(key)), d)
        return cls(d, terms, "from_function")

    # serialization ------------------------------------------------------

    def to_dict(self):
        return {"d": self.d,
                "terms": [{"offset": list(k), "coeff": cf.to_dict()} for k, cf in self.terms.items()]}

    @classmethod
    def from_dict(cls, spec):
        builder = spec.get("builder")
        d = int(spec.get("d", 2))
        if builder == "harper":
            return cls.harper(d, spec.get("t", 1.0))
        if builder == "diagonal_potential":
            V = {tuple(e[0]): e[1] for e in spec["table"]}
            return cls.diagonal_potential(V, d)
        if builder is not None:
            raise ValueError(f"unknown symbol builder {builder!r}")
        terms = {tuple(t["offset"]): CoefficientField.from_dict(t["coeff"], d) for t in spec["terms"]}
        return cls(d, terms, spec.get("label", "symbol"))


def truncate(h, d, radius, tail_radius=None, window=None):
    """Restrict a callable symbol h(q, x) to offsets of max-norm <= radius.

    Returns ``(symbol, discarded)`` where ``discarded`` estimates the
    ||.||_{1,inf} mass of offsets with radius < |x| <= tail_radius, with the
    sup over q taken on ``window``.
    """
    tail_radius = 2 * radius + 2 if tail_radius is None else tail_radius
    sym = Symbol.from_function(h, d, radius)
    pts = _window_sites(d, window)
    mass = 0.0
    for off in window_points(d, tail_radius):
        if np.max(np.abs(off)) <= radius:
            continue
        vals = np.asarray(h(pts, off), dtype=complex)
        mass += float(np.max(np.abs(vals)))
    return sym, mass


def translate(cf: CoefficientField, x) -> CoefficientField:
    """(theta_x f)(q) = f(q + x)."""
    x = as_points(x, cf.d)
    f = cf.func
    return CoefficientField(lambda q: f(q + x), cf.d, cf.bound, "translated",
                            {"by": _key(x), "base": cf.kind})


@dataclass(frozen=True)
class Norm:
    value: float
    certified: bool

    def __float__(self):
        return self.value


def norm_1_inf(s: Symbol, window=None) -> Norm:
    """Sum over the support of sup_q |s(q; x)|; certified iff every per-offset sup is."""
    total = 0.0
    certified = True
    for cf in s.terms.values():
        v, c = cf.sup(window)
        total += v
        certified &= c
    return Norm(total, certified)


def twisted_product(f: Symbol, g: Symbol, coc: TwoCocycle) -> Symbol:
    """[f . g](q; x) = sum_y f(q; y) g(q + y; x - y) exp(i omega(q; y, x - y))."""
    if not (f.d == g.d == coc.d):
        raise ValueError("dimension mismatch between factors and cocycle")
    d = f.d
    contributions = {}
    for a, b in cartesian(f.terms, g.terms):
        x = tuple(i + j for i, j in zip(a, b))
        contributions.setdefault(x, []).append((a, b))
    terms = {}
    for x, pairs in contributions.items():
        def func(q, pairs=pairs):
            acc = np.zeros(q.shape[:-1], dtype=complex)
            for a, b in pairs:
                y = np.array(a, dtype=np.int64)
                z = np.array(b, dtype=np.int64)
                acc += (f.terms[a].value(q) * g.terms[b].value(q + y)
                        * np.exp(1j * coc.phase(q, y, z)))
            return acc
        terms[x] = CoefficientField(func, d, None, "product", {"pairs": pairs})
    return Symbol(d, terms, f"({f.label})*({g.label})")


def involution(f: Symbol) -> Symbol:
    """f*(q; x) = conj f(q + x; -x)."""
    terms = {}
    for off, cf in f.terms.items():
        x = tuple(-c for c in off)
        shift = np.array(x, dtype=np.int64)
        terms[x] = CoefficientField(lambda q, cf=cf, shift=shift: np.conj(cf.value(q + shift)),
                                    f.d, cf.bound, "involuted", {"base": cf.kind})
    return Symbol(f.d, terms, f"({f.label})^*")


def symbol_defect(f: Symbol, g: Symbol, window=None) -> float:
    """Max |f(q; x) - g(q; x)| over window sites q and the union of supports."""
    if f.d != g.d:
        raise ValueError("dimension mismatch")
    pts = _window_sites(f.d, window)
    worst = 0.0
    for off in set(f.terms) | set(g.terms):
        diff = f.evaluate(pts, off) - g.evaluate(pts, off)
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def is_selfadjoint(f: Symbol, window=None, tol=1e-12) -> bool:
    """True iff the involution of f agrees with f on window x support within tol."""
    return symbol_defect(involution(f), f, window) <= tol


def random_symbol(d, rng, n_terms=3, radius=2, amplitude=1.0, selfadjoint=False) -> Symbol:
    """Symbol with ``n_terms`` random offsets of max-norm <= radius and random bounded fields."""
    rng = np.random.default_rng(rng)
    offsets = window_points(d, radius)
    pick = rng.choice(offsets.shape[0], size=min(n_terms, offsets.shape[0]), replace=False)
    terms = {}
    for i in pick:
        seed = int(rng.integers(0, 2**62))
        terms[_key(offsets[i])] = CoefficientField.random(d, seed, amplitude)
    s = Symbol(d, terms, "random")
    if selfadjoint:
        s = s + involution(s)
    return s
