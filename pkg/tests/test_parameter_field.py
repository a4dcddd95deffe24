import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from magspec.algebra import Symbol, involution, random_symbol, symbol_defect, twisted_product
from magspec.lattice import Box, phase_defect, triangle_area
from magspec.magnetic import MagneticPotential, check_cocycle, cocycle_from_potential
from magspec.parameter_field import (FamilyCoefficient, ParameterGrid, ScanError, SpectrumScan,
                                     SymbolFamily, check_family, check_field_continuity,
                                     check_triangle_bound, cochain_for, constant_field,
                                     evaluate_at, family_involution, family_product,
                                     field_norm_estimate, gap_persistence_report,
                                     hausdorff_refinement, inner_continuity_probe,
                                     interpolated_field, jump_field, load_scan,
                                     outer_continuity_probe, save_scan, scaled_cocycle_field,
                                     spectrum_scan, trivial_field)
from magspec.representation import assemble
from magspec.spectral import Spectrum, eigenvalues

lattice_vec = st.tuples(st.integers(-5, 5), st.integers(-5, 5))
unit = st.floats(0.0, 1.0)
HARPER = SymbolFamily.constant(Symbol.harper())


def harper_field():
    return scaled_cocycle_field(MagneticPotential.symmetric_gauge(2 * np.pi))


def constant_scan(n=9):
    grid = ParameterGrid.uniform(n)
    return spectrum_scan(HARPER, trivial_field(2), Box(2, 3), grid, workers=1)


# grids and fields

def test_grid_uniform_and_refine():
    g = ParameterGrid.uniform(5)
    r = g.refine()
    assert len(r) == 9 and r.level == 1
    assert np.allclose(r.points, np.linspace(0, 1, 9))
    assert r.spacing == pytest.approx(g.spacing / 2)
    assert len(ParameterGrid.uniform()) == 129
    with pytest.raises(ValueError):
        ParameterGrid(np.array([0.0, 0.5, 0.5]))
    with pytest.raises(ValueError):
        ParameterGrid(np.array([0.0, 1.5]))
    with pytest.raises(ValueError):
        g.index(0.3)


def test_scaled_field_endpoints(rng):
    pot = MagneticPotential.random(2, 2.0, 4)
    field = scaled_cocycle_field(pot)
    q, x, y = rng.integers(-6, 7, size=(3, 200, 2))
    assert np.all(field.at(0.0).phase(q, x, y) == 0.0)
    assert np.array_equal(field.at(1.0).phase(q, x, y), cocycle_from_potential(pot).phase(q, x, y))


@given(unit, lattice_vec)
def test_scaled_field_is_normalized_at_every_eps(eps, x):
    field = harper_field()
    x = np.array(x)
    q = np.random.default_rng(0).integers(-9, 10, size=(50, 2))
    assert np.max(phase_defect(field.at(eps).phase(q, x, -x), 0.0)) <= 1e-12
    assert check_cocycle(field.at(eps), n=200, rng=1).passed


@given(unit, unit, lattice_vec, lattice_vec, st.floats(-1.0, 1.0))
def test_scaled_field_respects_modulus(e1, e2, x, y, B):
    field = scaled_cocycle_field(MagneticPotential.symmetric_gauge(B))
    x, y = np.array(x), np.array(y)
    q = np.random.default_rng(7).integers(-20, 21, size=(500, 2))
    defect = np.max(np.abs(np.exp(1j * field.at(e2).phase(q, x, y)) - np.exp(1j * field.at(e1).phase(q, x, y))))
    area = triangle_area(np.zeros(2), x, x + y)
    assert defect <= np.expm1(abs(e2 - e1) * area) + 1e-12
    assert field.modulus(e1, e2, x, y) == pytest.approx(np.expm1(abs(e2 - e1) * area))


def test_modulus_absent_without_triangle_bound():
    assert scaled_cocycle_field(MagneticPotential.symmetric_gauge(3.0)).modulus is None
    assert scaled_cocycle_field(MagneticPotential.random(2, 1.0, 0)).modulus is None


def test_triangle_bound():
    zero = check_triangle_bound(MagneticPotential.zero(2))
    assert zero.passed and zero.max_ratio == 0.0
    # the flux through any triangle is B times its area, so the ratio is |B|
    assert check_triangle_bound(MagneticPotential.symmetric_gauge(0.8)).passed
    r = check_triangle_bound(MagneticPotential.symmetric_gauge(3.0))
    assert not r.passed and r.max_ratio == pytest.approx(3.0)
    collinear = np.array([[[0, 0], [1, 1], [2, 2]]])
    assert check_triangle_bound(MagneticPotential.random(2, 1.0, 1), collinear).degenerate_max > 0


def test_field_continuity_constant_scaled_and_jump():
    grid = ParameterGrid.uniform(17)
    pot = MagneticPotential.symmetric_gauge(1.0)
    x, y = [1, 2], [2, -1]
    const = check_field_continuity(constant_field(pot), x, y, grid, 3)
    assert const.coarse_max == 0.0 and const.fine_max == 0.0 and const.passed
    scaled = check_field_continuity(scaled_cocycle_field(pot), x, y, grid, 3)
    assert scaled.passed and scaled.extra["modulus_ok"]
    jump = check_field_continuity(jump_field(pot), x, y, grid, 3)
    assert not jump.passed and jump.ratio > 0.9
    assert jump.fine_where == pytest.approx(0.5 - grid.spacing / 2)
    with pytest.raises(ValueError):
        check_field_continuity(constant_field(pot), x, y, ParameterGrid.uniform(2), 3)


def test_interpolated_field_hits_table_points(rng):
    a, b = MagneticPotential.random(2, 1.0, 1), MagneticPotential.random(2, 1.0, 2)
    field = interpolated_field([(0.0, a), (1.0, b)])
    x, y = rng.integers(-4, 5, size=(2, 50, 2))
    assert np.array_equal(field.potential_at(0.0).phase(x, y), a.phase(x, y))
    mid = field.potential_at(0.5).phase(x, y)
    assert np.allclose(mid, 0.5 * (a.phase(x, y) + b.phase(x, y)))


# families

def test_evaluate_at():
    h, coc = evaluate_at(HARPER, harper_field(), 0.25)
    assert symbol_defect(h, Symbol.harper(), 2) == 0.0
    with pytest.raises(ValueError):
        evaluate_at(HARPER, harper_field(), 1.5)


def test_theorem_operator_reproduced():
    # [H u](x) = sum_y h(x; y - x) exp(i eps phi(x, y)) u(y)
    pot = MagneticPotential.symmetric_gauge(2 * np.pi)
    eps = 0.3
    box = Box(2, 2)
    h, _ = evaluate_at(HARPER, scaled_cocycle_field(pot), eps)
    M = assemble(h, cochain_for(scaled_cocycle_field(pot), eps), box).toarray()
    sites = box.sites()
    ref = np.zeros_like(M)
    for i, x in enumerate(sites):
        for j, y in enumerate(sites):
            if np.abs(x - y).sum() == 1:
                ref[i, j] = np.exp(1j * eps * pot.phase(x, y))
    assert np.abs(M - ref).max() < 1e-14


def _random_family(seed):
    rng = np.random.default_rng(seed)
    s0 = random_symbol(2, rng, 3, 1)
    s1 = random_symbol(2, rng, 3, 1)
    terms = {}
    for k in set(s0.terms) | set(s1.terms):
        a, b = s0.coeff(k), s1.coeff(k)
        terms[k] = FamilyCoefficient(lambda q, e, a=a, b=b: (1 - e) * a.func(q) + e * b.func(q), 2)
    return SymbolFamily(2, terms, "random")


@given(st.integers(0, 10**6), unit)
def test_evaluation_is_a_star_homomorphism(seed, eps):
    f, g = _random_family(seed), _random_family(seed + 1)
    field = scaled_cocycle_field(MagneticPotential.random(2, 2.0, seed))
    coc = field.at(eps)
    lhs = family_product(f, g, field).at(eps)
    rhs = twisted_product(f.at(eps), g.at(eps), coc)
    assert symbol_defect(lhs, rhs, 2) <= 1e-12
    assert symbol_defect(family_involution(f).at(eps), involution(f.at(eps)), 2) == 0.0


def test_check_family():
    grid = ParameterGrid.uniform(9)
    assert check_family(HARPER, grid, 2).passed
    chain = SymbolFamily.dimerized_chain(1.0)
    rep = check_family(chain, grid, 4)
    assert rep.passed and rep.uniform_l1_bound == 3.0
    step = SymbolFamily(1, {(0,): FamilyCoefficient(lambda q, e: np.full(q.shape[:-1], float(e >= 0.5)), 1)})
    assert not check_family(step, grid, 2).passed


# scans and probes

def test_constant_scan_is_flat():
    scan = constant_scan()
    assert np.all(scan.adjacent_hausdorff() == 0.0)
    K = (4.5, 5.0)
    v = outer_continuity_probe(scan, 0.5, K)
    assert v.covers_grid and not v.vacuous
    assert inner_continuity_probe(scan, 0.5, (-0.5, 0.5)).covers_grid
    rows = gap_persistence_report(scan, 0.2)
    assert rows and all(r.left_steps + r.right_steps == len(scan.grid) - 1 for r in rows)


def test_cochain_policies_agree():
    grid = ParameterGrid.uniform(5)
    box = Box(2, 4)
    a = spectrum_scan(HARPER, harper_field(), box, grid, "direct", workers=1)
    b = spectrum_scan(HARPER, harper_field(), box, grid, "transversal", workers=1)
    assert max(np.max(np.abs(x.values - y.values)) for x, y in zip(a.spectra, b.spectra)) <= 1e-10


def test_scan_is_deterministic_across_worker_counts():
    grid = ParameterGrid.uniform(7)
    box = Box(2, 3)
    a = spectrum_scan(HARPER, harper_field(), box, grid, workers=1)
    b = spectrum_scan(HARPER, harper_field(), box, grid, workers=3)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a.spectra, b.spectra))


def test_scan_errors_are_annotated_with_eps():
    bad = SymbolFamily(2, {(1, 0): FamilyCoefficient(lambda q, e: np.ones(q.shape[:-1]) + 0j, 2, 1.0)})
    with pytest.raises(ScanError, match="epsilon=0.0"):
        spectrum_scan(bad, trivial_field(2), Box(2, 2), ParameterGrid.uniform(3), workers=1)


def test_flux_symmetry_eps_one_minus_eps():
    grid = ParameterGrid.uniform(9)
    scan = spectrum_scan(HARPER, harper_field(), Box(2, 5), grid, workers=1)
    for i in range(len(grid)):
        a, b = scan.spectra[i].values, scan.spectra[-1 - i].values
        assert np.max(np.abs(a - b)) <= 1e-8


def test_harper_probes():
    grid = ParameterGrid.uniform(9)
    scan = spectrum_scan(HARPER, harper_field(), Box(2, 5), grid, workers=1)
    assert outer_continuity_probe(scan, 0.0, (4.5, 5.0)).covers_grid
    v = inner_continuity_probe(scan, 0.0, (-0.5, 0.5))
    assert v.right_steps >= 1 and v.radius >= 1
    assert "consistent at spacing" in v.statement
    vac = inner_continuity_probe(scan, 0.0, (10.0, 11.0))
    assert vac.vacuous and "vacuous" in vac.statement
    with pytest.raises(ValueError):
        outer_continuity_probe(scan, 0.3, (4.5, 5.0))


@given(st.floats(0.0, 0.49), st.floats(0.0, 0.49))
def test_probe_monotone_in_K(s1, s2):
    # shrinking K never shrinks the neighbourhood
    scan = _chain_scan()
    big = (-0.6, 0.6)
    small = (big[0] + s1, big[1] - s2)
    vb = outer_continuity_probe(scan, 0.25, big)
    vs = outer_continuity_probe(scan, 0.25, small)
    assert vs.left_steps >= vb.left_steps and vs.right_steps >= vb.right_steps


_CHAIN = {}


def _chain_scan():
    if "scan" not in _CHAIN:
        _CHAIN["scan"] = spectrum_scan(SymbolFamily.dimerized_chain(2.0), trivial_field(1),
                                       Box.periodic((40,), period=(2,)), ParameterGrid.uniform(33),
                                       workers=1)
    return _CHAIN["scan"]


def test_closing_gap_persistence_shrinks_monotonically():
    # gap (-2(1-eps), 2(1-eps)) roughly, closing at eps = 1
    scan = _chain_scan()
    rows = gap_persistence_report(scan, 0.2)
    central = {}
    for r in rows:
        if r.gap_lo < 0 < r.gap_hi:
            central[r.epsilon] = r.right_steps
    eps = sorted(central)
    radii = [central[e] for e in eps]
    assert len(eps) > 20
    assert all(a >= b for a, b in zip(radii, radii[1:]))
    assert radii[0] > radii[-1]


def test_norm_estimate_constant_and_harper():
    grid = ParameterGrid.uniform(5)
    rep = field_norm_estimate(HARPER, trivial_field(2), Box(2, 3), grid, workers=1)
    assert np.ptp(rep.norms) == 0.0 and rep.passed
    s = eigenvalues(assemble(Symbol.harper(), cochain_for(harper_field(), 0.0), Box(2, 40)))
    assert abs(s.norm - 4.0) <= 0.05


def test_scan_persistence_roundtrip(tmp_path):
    scan = spectrum_scan(HARPER, harper_field(), Box(2, 2), ParameterGrid.uniform(5), workers=1)
    save_scan(scan, tmp_path / "s", {"seed": 0})
    back = load_scan(tmp_path / "s")
    assert np.array_equal(back.grid.points, scan.grid.points)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(back.spectra, scan.spectra))
    manifest = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert manifest["provenance"]["cochain_policy"] == "direct" and manifest["seed"] == 0
    assert len(list((tmp_path / "s" / "spectra").iterdir())) == 5


def test_hausdorff_refinement_on_constant_scan():
    grid = ParameterGrid.uniform(5)
    c = spectrum_scan(HARPER, trivial_field(2), Box(2, 2), grid, workers=1)
    f = spectrum_scan(HARPER, trivial_field(2), Box(2, 2), grid.refine(), workers=1)
    r = hausdorff_refinement(c, f)
    assert r.coarse_max == 0.0 and r.passed


def test_scan_requires_one_spectrum_per_point():
    with pytest.raises(ValueError):
        SpectrumScan(ParameterGrid.uniform(3), [Spectrum(np.zeros(1))])
