"""Spectra of finite Hermitian matrices and utilities on finite point sets."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import gcd

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

HERMITIAN_TOL = 1e-12
BACKWARD_TOL = 1e-10
# banded solver when the half-bandwidth is below n / BANDED_RATIO
BANDED_RATIO = 8


class NotHermitianError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.sort(np.asarray(self.values, dtype=float).ravel())
        if not np.all(np.isfinite(vals)):
            raise ValueError("spectrum contains non-finite values")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    @property
    def norm(self):
        """Spectral radius, i.e. operator norm of the self-adjoint matrix."""
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True)
class GapList:
    intervals: list
    resolution: float

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)


def _as_matrix(M):
    mat = getattr(M, "matrix", M)
    return mat


def _half_bandwidth(mat):
    coo = mat.tocoo()
    return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def _to_upper_banded(mat, b):
    n = mat.shape[0]
    ab = np.zeros((b + 1, n), dtype=complex)
    coo = sp.triu(mat).tocoo()
    ab[b + coo.row - coo.col, coo.col] = coo.data
    return ab


def eigenvalues(M, residual_samples=10, rng=0, meta=None) -> Spectrum:
    """Full sorted eigenvalue list of a Hermitian matrix.

    ``M`` may be an :class:`OperatorMatrix`, a sparse matrix or a dense array.
    The input must be Hermitian to 1e-12 (it is then symmetrized).  Sparse
    inputs with a narrow band use LAPACK's banded Hermitian solver, the rest
    a dense one.  With ``residual_samples`` > 0, that many eigenvalues are
    checked by shifted inverse iteration against the backward-error bound
    ||Mv - lv|| <= 1e-10 ||M||.
    """
    mat = _as_matrix(M)
    if sp.issparse(mat):
        mat = sp.csr_matrix(mat, dtype=complex)
        diff = (mat - mat.conj().T).tocoo()
        if diff.nnz:
            k = int(np.argmax(np.abs(diff.data)))
            asym, where = float(abs(diff.data[k])), (int(diff.row[k]), int(diff.col[k]))
        else:
            asym, where = 0.0, None
    else:
        mat = np.asarray(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
        diff = np.abs(mat - mat.conj().T)
        k = int(np.argmax(diff)) if diff.size else 0
        asym = float(diff.flat[k]) if diff.size else 0.0
        where = tuple(int(i) for i in np.unravel_index(k, mat.shape)) if diff.size else None
    if asym > HERMITIAN_TOL:
        raise NotHermitianError(f"matrix is not Hermitian: |M - M^H| = {asym:.3g} at entry {where}")
    n = mat.shape[0]
    if n == 0:
        return Spectrum(np.zeros(0), dict(meta or {}))
    sym = (mat + mat.conj().T) * 0.5
    if sp.issparse(sym):
        sym = sym.tocsr()
        b = _half_bandwidth(sym)
        if b * BANDED_RATIO < n:
            vals = la.eigvals_banded(_to_upper_banded(sym, b), lower=False, check_finite=False)
        else:
            vals = la.eigvalsh(sym.toarray(), check_finite=False)
    else:
        vals = la.eigvalsh(sym, check_finite=False)
    spec = Spectrum(vals, dict(meta or {}))
    if residual_samples:
        check_backward_error(sym, spec.values, residual_samples, rng)
    return spec


def check_backward_error(mat, values, samples=10, rng=0, tol=BACKWARD_TOL):
    """Return max ||Mv - lv|| / ||M|| over sampled eigenvalues; raise if above tol."""
    n = mat.shape[0]
    scale = max(float(np.max(np.abs(values))), 1e-300)
    rng = np.random.default_rng(rng)
    idx = np.unique(np.linspace(0, n - 1, min(samples, n)).astype(int))
    a = sp.csc_matrix(mat, dtype=complex)
    eye = sp.identity(n, dtype=complex, format="csc")
    worst = 0.0
    for i in idx:
        lam = values[i]
        shift = lam + 1e-9 * scale
        lu = spla.splu((a - shift * eye).tocsc())
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        for _ in range(3):
            v = lu.solve(v)
            v /= np.linalg.norm(v)
        res = np.linalg.norm(a @ v - lam * v) / scale
        worst = max(worst, float(res))
    if worst > tol:
        raise EigenSolverError(f"backward error {worst:.3g} exceeds {tol:g}")
    return worst


def hausdorff(s1, s2) -> float:
    """Two-sided Hausdorff distance between finite subsets of R."""
    a = np.sort(np.asarray(getattr(s1, "values", s1), dtype=float).ravel())
    b = np.sort(np.asarray(getattr(s2, "values", s2), dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("hausdorff distance needs nonempty spectra")
    return max(_directed(a, b), _directed(b, a))


def _directed(a, b):
    # max over a of the distance to the sorted set b
    i = np.searchsorted(b, a)
    left = b[np.clip(i - 1, 0, b.size - 1)]
    right = b[np.clip(i, 0, b.size - 1)]
    return float(np.max(np.minimum(np.abs(a - left), np.abs(a - right))))


def distance_to_set(s, z):
    vals = np.asarray(getattr(s, "values", s), dtype=float)
    return float(np.min(np.abs(vals - z)))


def gaps(s, resolution=None, norm_bound=None) -> GapList:
    """Open intervals between consecutive spectrum points of length >= resolution.

    Without an explicit resolution, 1e-3 * ``norm_bound`` is used (pass the
    ||h||_{1,inf} of the generating symbol).
    """
    if resolution is None:
        if norm_bound is None:
            raise ValueError("give a resolution or a norm bound")
        resolution = 1e-3 * float(norm_bound)
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    vals = np.asarray(getattr(s, "values", s), dtype=float)
    if vals.size < 2:
        return GapList([], resolution)
    widths = np.diff(vals)
    keep = np.flatnonzero(widths >= resolution)
    return GapList([(float(vals[i]), float(vals[i + 1])) for i in keep], resolution)


def resolvent_norm(s, z) -> float:
    """||(H - z)^{-1}|| = 1 / dist(z, spectrum); infinite when z is within 1e-14 of it."""
    d = distance_to_set(s, z)
    if d <= 1e-14:
        return float("inf")
    return 1.0 / d


def harper_bloch_matrices(p, q, k1, k2):
    """Batch of q x q Bloch matrices of the Harper operator at flux 2 pi p / q.

    Landau gauge: on-site 2 cos(k2 + 2 pi p j / q), hopping exp(+-i k1)
    between neighbouring j with cyclic wrap.
    """
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    j = np.arange(q)
    H = np.zeros(k1.shape + (q, q), dtype=complex)
    H[..., j, j] = 2.0 * np.cos(k2[..., None] + 2.0 * np.pi * p * j / q)
    hop = np.exp(1j * k1)[..., None]
    nxt = (j + 1) % q
    H[..., j, nxt] += hop
    H[..., nxt, j] += np.conj(hop)
    return H


def bloch_bands_harper(p, q, kgrid) -> Spectrum:
    """Union of Harper Bloch eigenvalues over a kgrid x kgrid magnetic Brillouin zone."""
    p, q, kgrid = int(p), int(q), int(kgrid)
    if q < 1 or kgrid < 1 or gcd(p, q) != 1:
        raise ValueError(f"invalid flux {p}/{q} or kgrid {kgrid}")
    ks = 2.0 * np.pi / q * np.arange(kgrid) / kgrid
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    vals = np.linalg.eigvalsh(harper_bloch_matrices(p, q, k1, k2))
    return Spectrum(vals.ravel(), {"oracle": "harper_bloch", "p": p, "q": q, "kgrid": kgrid})


def band_intervals(p, q, kgrid):
    """[min, max] of each of the q Harper bands on the kgrid x kgrid Brillouin grid."""
    ks = 2.0 * np.pi / q * np.arange(kgrid) / kgrid
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    vals = np.linalg.eigvalsh(harper_bloch_matrices(p, q, k1, k2)).reshape(-1, q)
    return [(float(vals[:, b].min()), float(vals[:, b].max())) for b in range(q)]


def write_spectra_csv(path, rows):
    """rows: iterable of (epsilon, Spectrum); header epsilon,index,eigenvalue."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "index", "eigenvalue"])
        for eps, spec in rows:
            for i, v in enumerate(spec.values):
                w.writerow([repr(float(eps)), i, repr(float(v))])


def read_spectra_csv(path):
    """Inverse of :func:`write_spectra_csv`; returns {epsilon: Spectrum}."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(float(row["epsilon"]), []).append(float(row["eigenvalue"]))
    return {eps: Spectrum(np.array(v)) for eps, v in out.items()}


def write_gaps_csv(path, rows):
    """rows: iterable of (epsilon, GapList); header epsilon,gap_lo,gap_hi."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "gap_lo", "gap_hi"])
        for eps, gl in rows:
            for lo, hi in gl:
                w.writerow([repr(float(eps)), repr(float(lo)), repr(float(hi))])
