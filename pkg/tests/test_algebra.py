import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import convolve

from magspec.algebra import (CoefficientField, Symbol, involution, is_selfadjoint, norm_1_inf,
                             random_symbol, symbol_defect, translate, truncate, twisted_product)
from magspec.lattice import window_points
from magspec.magnetic import MagneticPotential, TwoCocycle, cocycle_from_potential

seeds = st.integers(0, 2**31 - 1)
dims = st.integers(1, 3)
WINDOW = 2


def _setup(d, seed, n=3):
    rng = np.random.default_rng(seed)
    coc = cocycle_from_potential(MagneticPotential.random(d, 3.0, int(rng.integers(2**31))))
    syms = [random_symbol(d, rng, n_terms=int(rng.integers(1, 4)), radius=1) for _ in range(n)]
    return coc, syms


@given(dims, seeds)
def test_twisted_product_is_associative(d, seed):
    coc, (f, g, h) = _setup(d, seed)
    lhs = twisted_product(twisted_product(f, g, coc), h, coc)
    rhs = twisted_product(f, twisted_product(g, h, coc), coc)
    assert symbol_defect(lhs, rhs, WINDOW) <= 1e-12


@given(dims, seeds)
def test_involution_is_an_anti_automorphism(d, seed):
    coc, (f, g) = _setup(d, seed, 2)
    lhs = involution(twisted_product(f, g, coc))
    rhs = twisted_product(involution(g), involution(f), coc)
    assert symbol_defect(lhs, rhs, WINDOW) <= 1e-12
    assert symbol_defect(involution(involution(f)), f, WINDOW) == 0.0


@given(dims, seeds)
def test_norm_is_submultiplicative(d, seed):
    coc, (f, g) = _setup(d, seed, 2)
    prod = norm_1_inf(twisted_product(f, g, coc), WINDOW)
    nf, ng = norm_1_inf(f), norm_1_inf(g)
    assert nf.certified and ng.certified and not prod.certified
    assert prod.value <= nf.value * ng.value + 1e-12


def test_trivial_cocycle_constant_coefficients_is_ordinary_convolution():
    # oracle: scipy convolution of the coefficient grids
    rng = np.random.default_rng(4)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    offs = window_points(2, 1)

    def sym(arr):
        return Symbol(2, {tuple(o): CoefficientField.constant(arr[o[0] + 1, o[1] + 1], 2) for o in offs})

    prod = twisted_product(sym(a), sym(b), TwoCocycle.trivial(2))
    ref = convolve(a, b)
    for o in window_points(2, 2):
        got = prod.evaluate(np.array([[3, -1]]), o)[0]
        assert abs(got - ref[o[0] + 2, o[1] + 2]) < 1e-12


def test_constant_field_product_matches_closed_form_phase():
    # delta_x . delta_y = exp(i B/2 x^y) delta_{x+y} for the symmetric gauge
    B = 0.9
    coc = cocycle_from_potential(MagneticPotential.symmetric_gauge(B))
    x, y = (1, 2), (-3, 1)
    prod = twisted_product(Symbol.delta(x), Symbol.delta(y), coc)
    assert prod.support == [(-2, 3)]
    val = prod.evaluate(np.array([[5, 5], [0, -7]]), (-2, 3))
    assert np.allclose(val, np.exp(0.5j * B * (1 * 1 - 2 * -3)), atol=1e-13)


def test_identity_is_a_unit():
    coc, (f,) = _setup(2, 3, 1)
    e = Symbol.identity(2)
    assert symbol_defect(twisted_product(e, f, coc), f, WINDOW) <= 1e-14
    assert symbol_defect(twisted_product(f, e, coc), f, WINDOW) <= 1e-14


def test_harper_symbol_is_selfadjoint_with_norm_four():
    h = Symbol.harper()
    assert is_selfadjoint(h)
    n = norm_1_inf(h)
    assert n.value == 4.0 and n.certified


def test_random_selfadjoint_symbol():
    s = random_symbol(2, 0, n_terms=4, radius=2, selfadjoint=True)
    assert is_selfadjoint(s, tol=0.0)
    assert not is_selfadjoint(random_symbol(2, 0, n_terms=4, radius=2))


def test_coefficient_fields():
    t = CoefficientField.table({(1, 1): 2 - 1j}, 2)
    assert t.value(np.array([[1, 1], [0, 0]])).tolist() == [2 - 1j, 0]
    assert t.sup() == (abs(2 - 1j), True)
    p = CoefficientField.periodic(np.array([1.0, -1.0]))
    assert p.value(np.array([[0], [1], [-1], [4]])).tolist() == [1, -1, -1, 1]
    r = CoefficientField.random(3, 5, 0.5)
    vals = r.value(window_points(3, 3))
    assert np.all(np.abs(vals) <= 0.5)
    assert translate(p, [1]).value(np.array([[0]]))[0] == -1


def test_uncertified_sup_uses_window():
    cf = CoefficientField(lambda q: q[..., 0].astype(complex), 1)
    assert cf.sup(3) == (3.0, False)


def test_truncate_reports_discarded_mass():
    # h(q; x) = 2^{-|x|}: mass beyond radius 1 up to radius 4 is 2 * (1/4 + 1/8 + 1/16)
    sym, mass = truncate(lambda q, x: np.full(q.shape[:-1], 2.0 ** -abs(int(x[0]))), 1, 1, 4, 2)
    assert sym.support == [(-1,), (0,), (1,)]
    assert mass == pytest.approx(2 * (0.25 + 0.125 + 0.0625))


@pytest.mark.parametrize("s", [Symbol.harper(), Symbol.diagonal_potential({(0, 1): 0.5}, 2),
                               random_symbol(2, 1, 3, 1)])
def test_symbol_serialization_roundtrip(s):
    again = Symbol.from_dict(s.to_dict())
    assert symbol_defect(again, s, 2) == 0.0
