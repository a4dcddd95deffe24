"""Parameter-dependent families: cocycle fields, symbol families and spectrum scans.

The parameter space is [0, 1], sampled by a finite :class:`ParameterGrid`.
Continuity statements are tested in their finite form: a quantity that
should vanish as the spacing goes to zero must shrink by a factor of at
most ``REFINEMENT_RATIO`` when the grid is refined twofold.  Verdicts are
"consistent at spacing delta", never proofs.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .algebra import CoefficientField, Symbol, _window_sites, involution, symbol_defect
from .lattice import Box, as_points, triangle_area, window_points
from .magnetic import (MagneticPotential, TwoCocycle, cochain_direct, cochain_transversal,
                       cocycle_from_potential, potential_from_cocycle)
from .representation import assemble
from .spectral import Spectrum, eigenvalues, gaps, hausdorff, read_spectra_csv, write_spectra_csv

REFINEMENT_RATIO = 0.75
# below this a maximal defect counts as zero (no refinement ratio is formed)
ZERO_DEFECT = 1e-13
GRID_TOL = 1e-12


# grids ---------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterGrid:
    points: np.ndarray
    level: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size == 0:
            raise ValueError("empty parameter grid")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] < 0 or pts[-1] > 1:
            raise ValueError("grid points must lie in [0, 1]")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, n=129, level=0):
        return cls(np.linspace(0.0, 1.0, int(n)), level)

    def refine(self):
        """Insert every midpoint: twofold density, n -> 2n - 1 points."""
        p = self.points
        out = np.empty(2 * p.size - 1)
        out[0::2] = p
        out[1::2] = 0.5 * (p[:-1] + p[1:])
        return ParameterGrid(out, self.level + 1)

    @property
    def spacing(self):
        return float(np.max(np.diff(self.points))) if self.points.size > 1 else 0.0

    def index(self, eps):
        i = int(np.argmin(np.abs(self.points - eps)))
        if abs(self.points[i] - eps) > GRID_TOL:
            raise ValueError(f"epsilon={eps} is not a grid point")
        return i

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points.tolist())

    def to_dict(self):
        return {"points": [repr(float(v)) for v in self.points], "level": self.level}

    @classmethod
    def from_dict(cls, spec):
        if "points" in spec:
            return cls(np.array([float(v) for v in spec["points"]]), int(spec.get("level", 0)))
        return cls.uniform(int(spec.get("n", 129)), int(spec.get("level", 0)))


# cocycle fields ----------------------------------------------------------------

@dataclass(frozen=True)
class CocycleField:
    """epsilon -> 2-cocycle, with an optional continuity modulus.

    ``modulus(eps, eps2, x, y)`` bounds sup_q |omega_eps2(q;x,y) - omega_eps(q;x,y)|.
    ``potential_at`` gives a magnetic potential of each cocycle when one is
    known, which the direct cochain policy uses.
    """

    at_func: Callable
    d: int
    modulus: Callable | None = None
    potential_at: Callable | None = None
    kind: str = "callable"
    params: dict = field(default_factory=dict)

    def at(self, eps) -> TwoCocycle:
        return self.at_func(float(eps))

    def to_dict(self):
        if self.kind in ("scaled", "constant"):
            return {"kind": self.kind, "potential": self.params["potential"].to_dict()}
        if self.kind == "table":
            return {"kind": "table",
                    "points": [{"eps": e, "potential": p.to_dict()} for e, p in self.params["points"]]}
        raise ValueError(f"field of kind {self.kind!r} is not serializable")

    @classmethod
    def from_dict(cls, spec, potential=None):
        kind = spec.get("kind", "scaled")
        if kind in ("scaled", "constant"):
            pot = potential if "potential" not in spec else MagneticPotential.from_dict(spec["potential"])
            if pot is None:
                raise ValueError("scaled field needs a potential")
            return scaled_cocycle_field(pot) if kind == "scaled" else constant_field(pot)
        if kind == "table":
            pts = [(float(e["eps"]), MagneticPotential.from_dict(e["potential"])) for e in spec["points"]]
            return interpolated_field(pts)
        raise ValueError(f"unknown field kind {kind!r}")


def _scaled_potential(pot, eps):
    f = pot.func
    tc = None if pot.triangle_constant is None else abs(eps) * pot.triangle_constant
    return MagneticPotential(lambda x, y: eps * f(x, y), pot.d, "scaled",
                             {"eps": eps, "base": pot.kind}, tc)


def scaled_cocycle_field(pot: MagneticPotential) -> CocycleField:
    """omega_eps = exp(i eps [phi(q,q+x) + phi(q+x,q+x+y) + phi(q+x+y,q)]).

    When the potential is known to satisfy the triangle bound (constant
    <= 1) the modulus exp(|eps - eps2| A) - 1, A = area(0, x, x+y), is attached.
    """
    base = cocycle_from_potential(pot)

    def at(eps):
        return TwoCocycle(lambda q, x, y: eps * base.func(q, x, y), pot.d,
                          f"{eps!r}*{base.label}", _scaled_potential(pot, eps))

    modulus = None
    if pot.triangle_constant is not None and pot.triangle_constant <= 1.0:
        def modulus(eps, eps2, x, y):
            x = as_points(x, pot.d)
            y = as_points(y, pot.d)
            area = triangle_area(np.zeros_like(x), x, x + y)
            return np.expm1(abs(eps2 - eps) * area)

    return CocycleField(at, pot.d, modulus, lambda eps: _scaled_potential(pot, eps),
                        "scaled", {"potential": pot})


def constant_field(pot: MagneticPotential) -> CocycleField:
    coc = cocycle_from_potential(pot)
    return CocycleField(lambda eps: coc, pot.d, lambda e, e2, x, y: 0.0, lambda eps: pot,
                        "constant", {"potential": pot})


def trivial_field(d) -> CocycleField:
    return constant_field(MagneticPotential.zero(d))


def interpolated_field(points) -> CocycleField:
    """Piecewise-linear interpolation of potentials tabulated at sorted epsilons."""
    points = sorted(points, key=lambda t: t[0])
    eps_tab = np.array([e for e, _ in points])
    pots = [p for _, p in points]
    d = pots[0].d

    def potential_at(eps):
        if eps <= eps_tab[0]:
            return pots[0]
        if eps >= eps_tab[-1]:
            return pots[-1]
        i = int(np.searchsorted(eps_tab, eps, side="right")) - 1
        t = (eps - eps_tab[i]) / (eps_tab[i + 1] - eps_tab[i])
        a, b = pots[i].func, pots[i + 1].func
        return MagneticPotential(lambda x, y: (1 - t) * a(x, y) + t * b(x, y), d, "interpolated")

    return CocycleField(lambda eps: cocycle_from_potential(potential_at(eps)), d, None,
                        potential_at, "table", {"points": points})


def jump_field(pot: MagneticPotential, at=0.5, jump=1.0) -> CocycleField:
    """Scaled field whose scale jumps by ``jump`` at epsilon = ``at`` (a discontinuous field)."""
    base = scaled_cocycle_field(pot)

    def shift(eps):
        return eps + (jump if eps >= at else 0.0)

    return CocycleField(lambda eps: base.at(shift(eps)), pot.d, None,
                        lambda eps: base.potential_at(shift(eps)), "jump", {"at": at, "jump": jump})


# symbol families ----------------------------------------------------------------

@dataclass(frozen=True)
class FamilyCoefficient:
    """(q, eps) -> complex, with an optional bound uniform in q and eps."""

    func: Callable
    d: int
    bound: float | None = None

    def at(self, eps):
        f = self.func
        return CoefficientField(lambda q: f(q, eps), self.d, self.bound, "family_slice")


@dataclass(frozen=True)
class SymbolFamily:
    d: int
    terms: dict
    label: str = "family"

    @property
    def support(self):
        return sorted(self.terms)

    def at(self, eps) -> Symbol:
        eps = float(eps)
        return Symbol(self.d, {k: c.at(eps) for k, c in self.terms.items()}, f"{self.label}@{eps!r}")

    @classmethod
    def constant(cls, symbol: Symbol):
        terms = {k: FamilyCoefficient(lambda q, eps, cf=cf: cf.func(q), symbol.d, cf.bound)
                 for k, cf in symbol.terms.items()}
        return cls(symbol.d, terms, symbol.label)

    @classmethod
    def from_symbols(cls, at, support, d, label="family"):
        """Family from a callable eps -> Symbol sharing the finite ``support``."""
        terms = {}
        for off in support:
            key = tuple(int(c) for c in off)
            terms[key] = FamilyCoefficient(lambda q, eps, key=key: at(eps).coeff(key).func(q), d)
        return cls(d, terms, label)

    @classmethod
    def dimerized_chain(cls, amplitude=1.0, hopping=1.0):
        """d=1 hopping plus on-site (1 - eps) * amplitude * (-1)^q; the gap closes at eps = 1."""
        t = complex(hopping)
        m = float(amplitude)
        terms = {
            (1,): FamilyCoefficient(lambda q, eps: np.full(q.shape[:-1], t), 1, abs(t)),
            (-1,): FamilyCoefficient(lambda q, eps: np.full(q.shape[:-1], np.conj(t)), 1, abs(t)),
            (0,): FamilyCoefficient(
                lambda q, eps: (1 - eps) * m * (1.0 - 2.0 * np.mod(q[..., 0], 2)) + 0j, 1, abs(m)),
        }
        return cls(1, terms, "dimerized_chain")

    def to_dict(self):
        if self.label == "dimerized_chain":
            return {"builder": "dimerized_chain"}
        raise ValueError(f"family {self.label!r} is not serializable")


def family_product(f: SymbolFamily, g: SymbolFamily, field: CocycleField) -> SymbolFamily:
    """Product at the family level, [f . g](q, eps; x) with omega(q, eps; y, x - y)."""
    if f.d != g.d:
        raise ValueError("dimension mismatch")
    contributions = {}
    for a in f.terms:
        for b in g.terms:
            x = tuple(i + j for i, j in zip(a, b))
            contributions.setdefault(x, []).append((a, b))
    terms = {}
    for x, pairs in contributions.items():
        def func(q, eps, pairs=pairs):
            coc = field.at(eps)
            acc = np.zeros(q.shape[:-1], dtype=complex)
            for a, b in pairs:
                y = np.array(a, dtype=np.int64)
                acc += (f.terms[a].func(q, eps) * g.terms[b].func(q + y, eps)
                        * np.exp(1j * coc.phase(q, y, np.array(b, dtype=np.int64))))
            return acc
        terms[x] = FamilyCoefficient(func, f.d)
    return SymbolFamily(f.d, terms, f"({f.label})*({g.label})")


def family_involution(f: SymbolFamily) -> SymbolFamily:
    terms = {}
    for off, c in f.terms.items():
        x = tuple(-v for v in off)
        shift = np.array(x, dtype=np.int64)
        terms[x] = FamilyCoefficient(lambda q, eps, c=c, shift=shift: np.conj(c.func(q + shift, eps)),
                                     f.d, c.bound)
    return SymbolFamily(f.d, terms, f"({f.label})^*")


def evaluate_at(family: SymbolFamily, field: CocycleField, eps):
    """Evaluation map at eps: returns (symbol, cocycle)."""
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"epsilon={eps} outside [0, 1]")
    return family.at(eps), field.at(eps)


def cochain_for(field: CocycleField, eps, policy="direct"):
    """The 1-cochain lambda^eps selected by ``policy`` (direct or transversal)."""
    if policy == "direct":
        if field.potential_at is not None:
            return cochain_direct(field.potential_at(float(eps)))
        return cochain_direct(potential_from_cocycle(field.at(eps)))
    if policy == "transversal":
        return cochain_transversal(field.at(eps))
    raise ValueError(f"unknown cochain policy {policy!r}")


# checks --------------------------------------------------------------------------

@dataclass(frozen=True)
class TriangleReport:
    max_ratio: float
    worst: tuple | None
    degenerate_max: float
    n_samples: int

    @property
    def passed(self):
        return self.max_ratio <= 1.0 + 1e-12 and self.degenerate_max <= 1e-12


def check_triangle_bound(pot: MagneticPotential, samples=None, n=1000, radius=6, rng=0):
    """|phi(x,y) + phi(y,z) + phi(z,x)| <= area(x, y, z) on sampled triangles.

    ``samples`` is an array of shape (n, 3, d); random triples are drawn when
    it is None.
    """
    if samples is None:
        samples = np.random.default_rng(rng).integers(-radius, radius + 1, size=(n, 3, pot.d))
    samples = as_points(samples, pot.d)
    if samples.size == 0:
        return TriangleReport(0.0, None, 0.0, 0)
    x, y, z = samples[:, 0], samples[:, 1], samples[:, 2]
    flux = np.abs(pot.phase(x, y) + pot.phase(y, z) + pot.phase(z, x))
    area = triangle_area(x, y, z)
    degenerate = area < 1e-12
    ratio = np.where(degenerate, 0.0, flux / np.where(degenerate, 1.0, area))
    k = int(np.argmax(ratio))
    worst = tuple(tuple(v.tolist()) for v in samples[k])
    deg_max = float(np.max(flux[degenerate])) if degenerate.any() else 0.0
    return TriangleReport(float(ratio[k]), worst, deg_max, int(samples.shape[0]))


@dataclass(frozen=True)
class RefinementReport:
    """Maximal adjacent defect on a grid and on its twofold refinement."""

    coarse_max: float
    fine_max: float
    coarse_spacing: float
    fine_spacing: float
    coarse_where: float | None = None
    fine_where: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self):
        if self.coarse_max <= ZERO_DEFECT:
            return 0.0 if self.fine_max <= ZERO_DEFECT else float("inf")
        return self.fine_max / self.coarse_max

    @property
    def passed(self):
        return self.ratio <= REFINEMENT_RATIO and self.extra.get("modulus_ok", True)


def refinement_report(grid: ParameterGrid, coarse_values, fine_values, distance=None, **extra):
    """Compare adjacent-point jumps of a grid quantity with those on ``grid.refine()``.

    ``distance(a, b)`` measures a jump (default |a - b|).
    """
    fine_grid = grid.refine()
    distance = distance or (lambda a, b: abs(a - b))

    def jumps(values):
        return np.array([distance(values[i], values[i + 1]) for i in range(len(values) - 1)])

    jc = jumps(coarse_values)
    jf = jumps(fine_values)
    ic, i_f = int(np.argmax(jc)), int(np.argmax(jf))
    return RefinementReport(float(jc[ic]), float(jf[i_f]), grid.spacing, fine_grid.spacing,
                            float(grid.points[ic]), float(fine_grid.points[i_f]), dict(extra))


def check_field_continuity(field: CocycleField, x, y, grid: ParameterGrid, window=None):
    """sup_q |omega_eps'(q;x,y) - omega_eps(q;x,y)| on adjacent grid pairs, grid vs refinement.

    Passes iff the maximal defect shrinks by the refinement ratio and, when
    the field carries a modulus, no pair exceeds it.
    """
    if len(grid) < 3:
        raise ValueError("continuity check needs at least 3 grid points")
    qs = _window_sites(field.d, window)
    x = as_points(x, field.d)
    y = as_points(y, field.d)
    xb = np.broadcast_to(x, qs.shape)
    yb = np.broadcast_to(y, qs.shape)
    modulus_ok = True
    worst_excess = 0.0

    def phases(g):
        return [field.at(e).phase(qs, xb, yb) for e in g]

    def sup_defect(g, ph):
        nonlocal modulus_ok, worst_excess
        out = []
        for i in range(len(ph) - 1):
            dft = float(np.max(np.abs(np.exp(1j * ph[i + 1]) - np.exp(1j * ph[i]))))
            if field.modulus is not None:
                bound = float(field.modulus(g.points[i], g.points[i + 1], x, y))
                if dft > bound + 1e-12:
                    modulus_ok = False
                    worst_excess = max(worst_excess, dft - bound)
            out.append(dft)
        return out

    fine = grid.refine()
    dc = sup_defect(grid, phases(grid))
    df = sup_defect(fine, phases(fine))
    ic, i_f = int(np.argmax(dc)), int(np.argmax(df))
    return RefinementReport(dc[ic], df[i_f], grid.spacing, fine.spacing,
                            float(grid.points[ic]), float(fine.points[i_f]),
                            {"modulus_ok": modulus_ok, "modulus_excess": worst_excess,
                             "x": tuple(x.tolist()), "y": tuple(y.tolist())})


@dataclass(frozen=True)
class FamilyReport:
    continuity: RefinementReport
    uniform_l1_bound: float
    selfadjoint: bool
    worst_selfadjoint_defect: float

    @property
    def passed(self):
        return self.continuity.passed and np.isfinite(self.uniform_l1_bound) and self.selfadjoint


def check_family(family: SymbolFamily, grid: ParameterGrid, window=None, tol=1e-12):
    """Hypotheses on a symbol family: continuity in eps, uniform l1 bound, self-adjointness."""
    qs = _window_sites(family.d, window)

    def sup_diffs(g):
        vals = {k: [c.func(qs, e) for e in g] for k, c in family.terms.items()}
        out = []
        for i in range(len(g) - 1):
            out.append(max((float(np.max(np.abs(v[i + 1] - v[i]))) for v in vals.values()), default=0.0))
        return out, vals

    fine = grid.refine()
    dc, vals = sup_diffs(grid)
    df, _ = sup_diffs(fine)
    ic, i_f = int(np.argmax(dc)), int(np.argmax(df))
    cont = RefinementReport(dc[ic], df[i_f], grid.spacing, fine.spacing,
                            float(grid.points[ic]), float(fine.points[i_f]))
    l1 = 0.0
    for k, c in family.terms.items():
        l1 += c.bound if c.bound is not None else max(float(np.max(np.abs(v))) for v in vals[k])
    worst = 0.0
    for e in grid:
        s = family.at(e)
        worst = max(worst, symbol_defect(involution(s), s, qs))
    return FamilyReport(cont, l1, worst <= tol, worst)


# scans ----------------------------------------------------------------------------

class ScanError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectrumScan:
    grid: ParameterGrid
    spectra: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.spectra) != len(self.grid):
            raise ValueError("one spectrum per grid point is required")
        object.__setattr__(self, "spectra", tuple(self.spectra))

    def spectrum(self, eps) -> Spectrum:
        return self.spectra[self.grid.index(eps)]

    def items(self):
        return list(zip(self.grid.points.tolist(), self.spectra))

    def adjacent_hausdorff(self):
        return np.array([hausdorff(a, b) for a, b in zip(self.spectra[:-1], self.spectra[1:])])

    def norms(self):
        return np.array([s.norm for s in self.spectra])


def default_workers():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def spectrum_scan(family: SymbolFamily, field: CocycleField, box: Box, grid: ParameterGrid,
                  cochain_policy="direct", workers=None, selfadjoint_window=2,
                  residual_samples=0) -> SpectrumScan:
    """One spectrum of Rep^{lambda^eps}(h^eps) on ``box`` per grid point.

    Grid points are independent and run on a thread pool; results are
    merged in grid order, so the output does not depend on scheduling.
    """
    if cochain_policy not in ("direct", "transversal"):
        raise ValueError(f"unknown cochain policy {cochain_policy!r}")

    def one(eps):
        try:
            h, _ = evaluate_at(family, field, eps)
            defect = symbol_defect(involution(h), h, selfadjoint_window)
            if defect > 1e-12:
                raise ValueError(f"symbol is not self-adjoint (defect {defect:.3g})")
            lam = cochain_for(field, eps, cochain_policy)
            return eigenvalues(assemble(h, lam, box), residual_samples=residual_samples,
                               meta={"epsilon": eps})
        except Exception as exc:
            raise ScanError(f"scan failed at epsilon={eps!r}: {exc}") from exc

    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1:
        spectra = [one(e) for e in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(one, list(grid)))
    provenance = {"family": family.label, "field": field.kind, "cochain_policy": cochain_policy,
                  "box": box.describe()}
    return SpectrumScan(grid, spectra, provenance)


# probes ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    kind: str
    eps0: float
    interval: tuple
    vacuous: bool
    left_steps: int = 0
    right_steps: int = 0
    neighborhood: tuple | None = None
    min_margin: float | None = None
    spacing: float = 0.0
    covers_grid: bool = False
    # steps on the shorter side; a side with no grid points is ignored
    radius: int = 0

    @property
    def statement(self):
        if self.vacuous:
            return f"{self.kind} probe vacuous at eps0={self.eps0!r}"
        return (f"{self.kind} continuity consistent at spacing {self.spacing:.3g}: "
                f"neighbourhood {self.neighborhood} ({self.left_steps} left, {self.right_steps} right steps)")


def _probe(scan, eps0, test, kind, interval, margin=None):
    i0 = scan.grid.index(eps0)
    n = len(scan.grid)
    spacing = scan.grid.spacing
    if not test(scan.spectra[i0]):
        return Verdict(kind, float(eps0), tuple(interval), True, spacing=spacing)
    left = 0
    while i0 - left - 1 >= 0 and test(scan.spectra[i0 - left - 1]):
        left += 1
    right = 0
    while i0 + right + 1 < n and test(scan.spectra[i0 + right + 1]):
        right += 1
    lo, hi = i0 - left, i0 + right
    mm = None
    if margin is not None:
        mm = min(margin(scan.spectra[i]) for i in range(lo, hi + 1))
    sides = []
    if i0 > 0:
        sides.append(left)
    if i0 < n - 1:
        sides.append(right)
    return Verdict(kind, float(eps0), tuple(interval), False, left, right,
                   (float(scan.grid.points[lo]), float(scan.grid.points[hi])), mm, spacing,
                   lo == 0 and hi == n - 1, min(sides) if sides else 0)


def _interval_margin(K):
    a, b = K

    def margin(spec):
        v = spec.values
        below = v[v < a]
        above = v[v > b]
        cand = []
        if below.size:
            cand.append(a - below[-1])
        if above.size:
            cand.append(above[0] - b)
        inside = v[(v >= a) & (v <= b)]
        if inside.size:
            return 0.0
        return float(min(cand)) if cand else float("inf")

    return margin


def outer_continuity_probe(scan: SpectrumScan, eps0, K) -> Verdict:
    """Largest grid neighbourhood of eps0 on which the closed interval K misses the spectrum."""
    a, b = float(K[0]), float(K[1])
    if a > b:
        raise ValueError("K must satisfy K[0] <= K[1]")

    def disjoint(spec):
        v = spec.values
        return not np.any((v >= a) & (v <= b))

    return _probe(scan, eps0, disjoint, "outer", (a, b), _interval_margin((a, b)))


def inner_continuity_probe(scan: SpectrumScan, eps0, O) -> Verdict:
    """Largest grid neighbourhood of eps0 on which the open interval O meets the spectrum."""
    a, b = float(O[0]), float(O[1])

    def meets(spec):
        v = spec.values
        return bool(np.any((v > a) & (v < b)))

    return _probe(scan, eps0, meets, "inner", (a, b))


@dataclass(frozen=True)
class GapRow:
    epsilon: float
    gap_lo: float
    gap_hi: float
    left_steps: int
    right_steps: int
    persistence_radius: int
    edges: tuple


def gap_persistence_report(scan: SpectrumScan, resolution) -> list:
    """For every gap of width >= resolution at every grid point, how far it persists.

    A gap (lo, hi) persists at a neighbouring epsilon while its central half
    [lo + w/4, hi - w/4] stays outside the spectrum; the tracked edges are
    the spectrum points bracketing the gap midpoint at the ends of the run.
    """
    rows = []
    for i, (eps, spec) in enumerate(scan.items()):
        for lo, hi in gaps(spec, resolution):
            w = hi - lo
            v = outer_continuity_probe(scan, eps, (lo + 0.25 * w, hi - 0.25 * w))
            mid = 0.5 * (lo + hi)
            edges = []
            # spectrum points bracketing the midpoint at either end of the run
            for j in (i - v.left_steps, i + v.right_steps):
                vals = scan.spectra[j].values
                k = int(np.searchsorted(vals, mid))
                edges.append((float(vals[k - 1]) if k > 0 else None,
                              float(vals[k]) if k < vals.size else None))
            rows.append(GapRow(float(eps), lo, hi, v.left_steps, v.right_steps, v.radius, tuple(edges)))
    return rows


def write_persistence_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epsilon,gap_lo,gap_hi,left_steps,right_steps,persistence_radius\n")
        for r in rows:
            fh.write(f"{r.epsilon!r},{r.gap_lo!r},{r.gap_hi!r},{r.left_steps},{r.right_steps},"
                     f"{r.persistence_radius}\n")


@dataclass(frozen=True)
class NormReport:
    grid: ParameterGrid
    norms: np.ndarray
    fine_norms: np.ndarray
    refinement: RefinementReport

    @property
    def sup(self):
        return float(max(np.max(self.norms), np.max(self.fine_norms)))

    @property
    def passed(self):
        return self.refinement.passed


def field_norm_estimate(family: SymbolFamily, field: CocycleField, box: Box, grid: ParameterGrid,
                        cochain_policy="direct", workers=None, scans=None) -> NormReport:
    """eps -> ||Rep(h^eps)|| on the box, sup over the grid and refinement check of its jumps.

    ``scans`` may pass precomputed (coarse, fine) scans on grid and grid.refine().
    """
    if scans is None:
        coarse = spectrum_scan(family, field, box, grid, cochain_policy, workers)
        fine = spectrum_scan(family, field, box, grid.refine(), cochain_policy, workers)
    else:
        coarse, fine = scans
    nc, nf = coarse.norms(), fine.norms()
    return NormReport(grid, nc, nf, refinement_report(grid, nc, nf))


def hausdorff_refinement(coarse: SpectrumScan, fine: SpectrumScan) -> RefinementReport:
    """Max adjacent-epsilon Hausdorff distance on a scan and on its twofold refinement."""
    return refinement_report(coarse.grid, list(coarse.spectra), list(fine.spectra), hausdorff)


# persistence ----------------------------------------------------------------------

def save_scan(scan: SpectrumScan, directory, manifest=None):
    """Write manifest.json and one spectrum CSV per grid point."""
    directory = Path(directory)
    (directory / "spectra").mkdir(parents=True, exist_ok=True)
    files = []
    for i, (eps, spec) in enumerate(scan.items()):
        name = f"spectra/eps_{i:05d}.csv"
        write_spectra_csv(directory / name, [(eps, spec)])
        files.append(name)
    body = {"code_version": __version__, "grid": scan.grid.to_dict(),
            "provenance": scan.provenance, "files": files}
    body.update(manifest or {})
    (directory / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
    return directory


def load_scan(directory) -> SpectrumScan:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    grid = ParameterGrid.from_dict(manifest["grid"])
    spectra = []
    for name, eps in zip(manifest["files"], grid):
        table = read_spectra_csv(directory / name)
        spectra.append(Spectrum(table[eps].values, {"epsilon": eps}))
    return SpectrumScan(grid, spectra, manifest.get("provenance", {}))
