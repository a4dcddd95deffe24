import numpy as np
import pytest
from hypothesis import given, strategies as st

from magspec.algebra import Symbol, involution, random_symbol
from magspec.lattice import Box
from magspec.magnetic import (GaugeFunction, MagneticPotential, cochain_direct, cochain_transversal,
                              cocycle_from_potential)
from magspec.representation import (PeriodicityError, apply, assemble, export_matrix, gauge_unitary,
                                    homomorphism_defect, load_matrix, site_vector)

seeds = st.integers(0, 2**31 - 1)


def brute_matrix(h, lam, box):
    # independent double loop over site pairs
    sites = box.sites()
    n = len(sites)
    out = np.zeros((n, n), dtype=complex)
    for i, x in enumerate(sites):
        for j, y in enumerate(sites):
            off = tuple((y - x).tolist())
            if off in h.terms:
                out[i, j] = h.terms[off].value(x[None])[0] * np.exp(1j * lam.phase(x[None], (y - x)[None])[0])
    return out


def test_assemble_matches_brute_force():
    pot = MagneticPotential.random(2, 2.0, 3)
    h = random_symbol(2, 8, n_terms=5, radius=2)
    box = Box(2, 2)
    lam = cochain_direct(pot)
    assert np.abs(assemble(h, lam, box).toarray() - brute_matrix(h, lam, box)).max() < 1e-14


@given(st.integers(1, 3), seeds)
def test_selfadjoint_symbol_gives_hermitian_matrix(d, seed):
    pot = MagneticPotential.random(d, 3.0, seed)
    h = random_symbol(d, seed, n_terms=3, radius=1, selfadjoint=True)
    M = assemble(h, cochain_direct(pot), Box(d, 2 if d < 3 else 1))
    assert M.hermiticity_defect() <= 1e-13


@given(seeds)
def test_adjoint_covariance(seed):
    pot = MagneticPotential.random(2, 3.0, seed)
    lam = cochain_transversal(cocycle_from_potential(pot))
    f = random_symbol(2, seed, n_terms=3, radius=2)
    box = Box(2, 3)
    diff = assemble(involution(f), lam, box).matrix - assemble(f, lam, box).matrix.conj().T
    assert abs(diff).max() <= 1e-13 if diff.nnz else True


def test_adjoint_covariance_periodic():
    box = Box.periodic((6, 4), period=(3, 1))
    pot = MagneticPotential.landau_gauge(2 * np.pi / 3)
    lam = cochain_direct(pot)
    h = Symbol.harper()
    A = assemble(h, lam, box)
    assert A.hermiticity_defect() < 1e-13
    assert abs(assemble(involution(h), lam, box).matrix - A.matrix.conj().T).max() < 1e-13


def test_periodic_assembly_rejects_non_periodic_phases():
    pot = MagneticPotential.landau_gauge(2 * np.pi / 3)
    with pytest.raises(PeriodicityError, match="axis 0"):
        assemble(Symbol.harper(), cochain_direct(pot), Box.periodic((8, 4), period=(2, 1)))


def test_homomorphism_defect_interior():
    pot = MagneticPotential.symmetric_gauge(2 * np.pi / 4)
    coc = cocycle_from_potential(pot)
    f = random_symbol(2, 1, 3, 1)
    g = random_symbol(2, 2, 3, 1)
    for lam in (cochain_direct(pot), cochain_transversal(coc)):
        assert homomorphism_defect(f, g, lam, coc, Box(2, 6)) <= 1e-10


def test_homomorphism_defect_detects_wrong_cochain():
    pot = MagneticPotential.symmetric_gauge(2 * np.pi / 4)
    coc = cocycle_from_potential(pot)
    lam = cochain_direct(pot).perturbed([0, 0], [1, 0], 0.5)
    h = Symbol.harper()
    assert homomorphism_defect(h, h, lam, coc, Box(2, 6)) >= 0.1


def test_homomorphism_defect_needs_room():
    h = Symbol.harper()
    pot = MagneticPotential.zero(2)
    with pytest.raises(ValueError):
        homomorphism_defect(h, h, cochain_direct(pot), cocycle_from_potential(pot), Box(2, 1))


def test_gauge_conjugation_relates_cochains():
    # lambda_t = lambda_phi + g(q+x) - g(q) with g(x) = phi(x, 0)
    pot = MagneticPotential.random(2, 2.0, 11)
    box = Box(2, 3)
    h = random_symbol(2, 5, 4, 1, selfadjoint=True)
    A_d = assemble(h, cochain_direct(pot), box).toarray()
    A_t = assemble(h, cochain_transversal(cocycle_from_potential(pot)), box).toarray()
    U = gauge_unitary(GaugeFunction.origin_gauge(pot), box).toarray()
    assert np.abs(U.conj().T @ A_d @ U - A_t).max() < 1e-13


def test_apply_matches_matrix(rng):
    cases = [(random_symbol(2, 3, 4, 2), cochain_direct(MagneticPotential.random(2, 1.0, 2)), Box(2, 3)),
             (Symbol.harper(), cochain_direct(MagneticPotential.landau_gauge(np.pi / 2)),
              Box.periodic((8, 4), period=(4, 1)))]
    for h, lam, box in cases:
        u = rng.standard_normal(box.n_sites) + 1j * rng.standard_normal(box.n_sites)
        assert np.abs(apply(h, lam, box, u) - assemble(h, lam, box) @ u).max() < 1e-13
    with pytest.raises(ValueError):
        apply(h, lam, Box(2, 3), np.zeros(3))


def test_site_vector_and_harper_action():
    box = Box(2, 2)
    lam = cochain_direct(MagneticPotential.zero(2))
    out = apply(Symbol.harper(), lam, box, site_vector(box, [0, 0]))
    assert out.sum() == pytest.approx(4.0)


@pytest.mark.parametrize("binary", [False, True])
def test_export_roundtrip(tmp_path, binary):
    A = assemble(Symbol.harper(), cochain_direct(MagneticPotential.symmetric_gauge(0.3)), Box(2, 2))
    path = tmp_path / ("m.npz" if binary else "m.mtx")
    export_matrix(A, path, binary=binary)
    mat, header = load_matrix(path)
    assert header["box"]["L"] == 2 and header["n"] == 25
    assert abs(mat - A.matrix).max() == 0.0


def test_dense_limit():
    A = assemble(Symbol.identity(2), cochain_direct(MagneticPotential.zero(2)), Box(2, 50))
    with pytest.raises(MemoryError):
        A.toarray()
