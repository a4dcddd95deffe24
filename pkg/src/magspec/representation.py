"""Finite-box realizations of the representation h -> Rep^lambda(h).

Matrices are indexed by box sites in row-major lexicographic order
(:meth:`Box.sites`), so row ``i`` is site ``box.sites()[i]``.  Entry
(x, y) is h(x; y - x) exp(i lambda(x; y - x)).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .algebra import Symbol, twisted_product
from .lattice import Box, as_points, phase_defect
from .magnetic import GaugeFunction, OneCochain, TwoCocycle

DENSE_LIMIT = 10_000
PERIODIC_TOL = 1e-12


class PeriodicityError(ValueError):
    """Symbol or cochain is not invariant under the period of a periodic box."""


@dataclass(frozen=True)
class OperatorMatrix:
    box: Box
    matrix: sp.csr_matrix
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.matrix.shape[0]

    def toarray(self):
        if self.n > DENSE_LIMIT:
            raise MemoryError(f"{self.n} sites exceeds the dense limit of {DENSE_LIMIT}")
        return self.matrix.toarray()

    def adjoint(self):
        return OperatorMatrix(self.box, self.matrix.conj().T.tocsr(), dict(self.meta, adjoint=True))

    def hermiticity_defect(self):
        diff = (self.matrix - self.matrix.conj().T).tocoo()
        if diff.nnz == 0:
            return 0.0
        return float(np.max(np.abs(diff.data)))

    @property
    def bandwidth(self):
        coo = self.matrix.tocoo()
        if coo.nnz == 0:
            return 0
        return int(np.max(np.abs(coo.row - coo.col)))

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.box, (self.matrix @ other.matrix).tocsr(),
                                  {"product": [self.meta, other.meta]})
        return self.matrix @ other


def _hops(h: Symbol, lam: OneCochain, box: Box, offset, sites):
    """(rows, cols, values) contributed by one offset of the symbol."""
    off = np.asarray(offset, dtype=np.int64)
    coeff = h.terms[offset].value(sites)
    phase = lam.phase(sites, np.broadcast_to(off, sites.shape))
    vals = coeff * np.exp(1j * phase)
    targets = sites + off
    rows = np.arange(sites.shape[0])
    if box.boundary == "dirichlet":
        inside = box.contains(targets)
        return rows[inside], box.index(targets[inside]), vals[inside]
    return rows, box.index(box.wrap(targets)), vals


def check_periodic(h: Symbol, lam: OneCochain, box: Box, tol=PERIODIC_TOL):
    """Raise PeriodicityError unless h and lam are invariant under the box period."""
    sites = box.sites()
    for offset in h.support:
        off = np.broadcast_to(np.asarray(offset, dtype=np.int64), sites.shape)
        base_c = h.terms[offset].value(sites)
        base_p = lam.phase(sites, off)
        for axis, p in enumerate(box.period):
            shift = np.zeros(box.d, dtype=np.int64)
            shift[axis] = p
            dc = np.abs(h.terms[offset].value(sites + shift) - base_c)
            dp = phase_defect(lam.phase(sites + shift, off), base_p)
            bad = np.flatnonzero((dc > tol) | (dp > tol))
            if bad.size:
                site = tuple(sites[bad[0]].tolist())
                raise PeriodicityError(
                    f"not invariant under period {tuple(box.period)} along axis {axis}: "
                    f"site {site}, offset {offset} "
                    f"(phase defect {float(dp[bad[0]]):.3g}, coefficient defect {float(dc[bad[0]]):.3g})")


def assemble(h: Symbol, lam: OneCochain, box: Box) -> OperatorMatrix:
    """Compression of Rep^lambda(h) to the box (Dirichlet) or its torus version (periodic)."""
    if not (h.d == lam.d == box.d):
        raise ValueError("dimension mismatch between symbol, cochain and box")
    if box.boundary == "periodic":
        check_periodic(h, lam, box)
    sites = box.sites()
    rows, cols, vals = [], [], []
    for offset in h.support:
        r, c, v = _hops(h, lam, box, offset, sites)
        rows.append(r)
        cols.append(c)
        vals.append(v)
    n = box.n_sites
    if rows:
        mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(n, n)).tocsr()
    else:
        mat = sp.csr_matrix((n, n), dtype=complex)
    mat.sum_duplicates()
    return OperatorMatrix(box, mat, {"symbol": h.label, "cochain": lam.label, "box": box.describe()})


def apply(h: Symbol, lam: OneCochain, box: Box, u):
    """Matrix-free Rep^lambda(h) u on the box."""
    u = np.asarray(u)
    if u.shape != (box.n_sites,):
        raise ValueError(f"vector of shape {u.shape} does not match {box.n_sites} box sites")
    if box.boundary == "periodic":
        check_periodic(h, lam, box)
    sites = box.sites()
    out = np.zeros(box.n_sites, dtype=complex)
    for offset in h.support:
        r, c, v = _hops(h, lam, box, offset, sites)
        np.add.at(out, r, v * u[c])
    return out


def gauge_unitary(g: GaugeFunction, box: Box) -> OperatorMatrix:
    """Diagonal unitary exp(i g(X)) on the box."""
    diag = np.exp(1j * g.value(box.sites()))
    return OperatorMatrix(box, sp.diags(diag, format="csr"), {"gauge": g.kind})


def homomorphism_defect(f: Symbol, g: Symbol, lam: OneCochain, coc: TwoCocycle, box: Box,
                        margin=None):
    """Largest ||Rep(f . g) u - Rep(f) Rep(g) u|| over unit u supported in the interior.

    The interior is the set of sites at distance >= margin from the faces
    (default margin: radius(f) + radius(g)), so truncation cannot touch the
    test vectors; the value returned is the spectral norm of the difference
    restricted to those columns.
    """
    margin = f.radius + g.radius if margin is None else int(margin)
    if box.boundary == "dirichlet":
        cols = np.flatnonzero(box.interior(margin))
        if not cols.size:
            raise ValueError(f"box {box.shape} has no sites at distance {margin} from its faces")
    else:
        cols = np.arange(box.n_sites)
    a_fg = assemble(twisted_product(f, g, coc), lam, box).matrix
    a_f = assemble(f, lam, box).matrix
    a_g = assemble(g, lam, box).matrix
    diff = (a_fg - a_f @ a_g)[:, cols].toarray()
    if not diff.size:
        return 0.0
    return float(np.linalg.norm(diff, ord=2))


def export_matrix(M: OperatorMatrix, path, binary=False):
    """Write triplets (row, col, re, im) with a header naming box, symbol and cochain.

    Text output follows the MatrixMarket coordinate layout (1-based indices);
    binary output is an ``.npz`` archive with the same fields.
    """
    coo = M.matrix.tocoo()
    header = {"box": M.box.describe(), "symbol": M.meta.get("symbol"),
              "cochain": M.meta.get("cochain"), "n": M.n}
    if binary:
        np.savez(path, row=coo.row, col=coo.col, re=coo.data.real, im=coo.data.imag,
                 header=json.dumps(header, sort_keys=True))
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%%MatrixMarket matrix coordinate complex general\n")
        fh.write("% " + json.dumps(header, sort_keys=True) + "\n")
        fh.write(f"{M.n} {M.n} {coo.nnz}\n")
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            fh.write(f"{coo.row[k] + 1} {coo.col[k] + 1} {float(coo.data[k].real)!r} {float(coo.data[k].imag)!r}\n")


def load_matrix(path):
    """Inverse of :func:`export_matrix`; returns (csr matrix, header dict)."""
    path = str(path)
    if path.endswith(".npz"):
        data = np.load(path)
        header = json.loads(str(data["header"]))
        n = header["n"]
        mat = sp.coo_matrix((data["re"] + 1j * data["im"], (data["row"], data["col"])), shape=(n, n))
        return mat.tocsr(), header
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = json.loads(lines[1][2:])
    n, _, nnz = (int(v) for v in lines[2].split())
    rows, cols, vals = [], [], []
    for line in lines[3:3 + nnz]:
        r, c, re, im = line.split()
        rows.append(int(r) - 1)
        cols.append(int(c) - 1)
        vals.append(complex(float(re), float(im)))
    mat = sp.coo_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n))
    return mat.tocsr(), header


def site_vector(box: Box, point):
    """Unit vector at a lattice point of the box."""
    u = np.zeros(box.n_sites, dtype=complex)
    u[box.index(as_points(point, box.d))] = 1.0
    return u
