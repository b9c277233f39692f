"""Block standard-form SDP data.

    maximize    sum_b <C_b, X_b>
    subject to  sum_b <A_ib, X_b> = b_i,   X_b ⪰ 0

``<A, X> = Re tr(A† X)``.  Constraint data for block b is stored as one sparse
matrix with a row per constraint holding the row-major vectorization of the
(full, hermitian) coefficient matrix.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

HERM_TOL = 1e-12


class Status(str, enum.Enum):
    OPTIMAL = "OPTIMAL"
    INACCURATE = "INACCURATE"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"


@dataclass
class SdpProblem:
    blocks: tuple[int, ...]
    objective: list[np.ndarray]
    a: list[sp.csr_matrix]
    b: np.ndarray
    name: str = "sdp"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.blocks = tuple(int(n) for n in self.blocks)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        m = self.b.size
        if len(self.objective) != len(self.blocks) or len(self.a) != len(self.blocks):
            raise ValueError("objective/constraint data must have one entry per block")
        objs, mats = [], []
        for n, c, a in zip(self.blocks, self.objective, self.a):
            c = np.asarray(c)
            if c.shape != (n, n):
                raise ValueError(f"objective block shape {c.shape}, expected {(n, n)}")
            a = sp.csr_matrix(a)
            if a.shape != (m, n * n):
                raise ValueError(f"constraint block shape {a.shape}, expected {(m, n * n)}")
            objs.append(c)
            mats.append(a)
        self.objective, self.a = objs, mats

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def is_complex(self) -> bool:
        return any(np.iscomplexobj(c) for c in self.objective) or any(np.iscomplexobj(a.data) for a in self.a)

    def constraint(self, i: int) -> list[np.ndarray]:
        return [a[i].toarray().reshape(n, n) for n, a in zip(self.blocks, self.a)]

    def apply(self, xs: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate the constraint map on block matrices."""
        out = np.zeros(self.m)
        for a, x in zip(self.a, xs):
            out += np.real(a.conj() @ np.asarray(x).reshape(-1))
        return out

    def objective_value(self, xs: Sequence[np.ndarray]) -> float:
        return float(sum(np.real(np.vdot(c, x)) for c, x in zip(self.objective, xs)))

    def hermitized(self) -> "SdpProblem":
        """Copy whose blocks are exactly hermitian, so upper-triangle exports lose nothing."""
        objs = [(np.asarray(c) + np.asarray(c).conj().T) / 2 for c in self.objective]
        mats = [((a + _transpose_rows(a, n).conj()) / 2).tocsr() for n, a in zip(self.blocks, self.a)]
        for a in mats:
            a.eliminate_zeros()
        return SdpProblem(self.blocks, objs, mats, self.b.copy(), name=self.name, meta=dict(self.meta))

    def check_hermitian(self, tol: float = HERM_TOL) -> None:
        for k, (n, c, a) in enumerate(zip(self.blocks, self.objective, self.a)):
            if np.max(np.abs(c - c.conj().T), initial=0) > tol * max(1, np.max(np.abs(c), initial=0)):
                raise ValueError(f"objective block {k} is not hermitian")
            t = _transpose_rows(a, n)
            d = a - t.conj()
            if d.nnz and np.max(np.abs(d.data)) > tol * max(1, np.max(np.abs(a.data), initial=0)):
                raise ValueError(f"constraint data in block {k} is not hermitian")

    def digest(self) -> str:
        """Hash of the coefficient data at 17 significant digits."""
        h = hashlib.sha256()
        h.update(repr(self.blocks).encode())
        for c, a in zip(self.objective, self.a):
            h.update(_fmt_array(np.asarray(c).reshape(-1)))
            a = a.tocoo()
            order = np.lexsort((a.col, a.row))
            h.update(a.row[order].tobytes())
            h.update(a.col[order].tobytes())
            h.update(_fmt_array(a.data[order]))
        h.update(_fmt_array(self.b))
        return h.hexdigest()

    def summary(self) -> dict:
        return {"name": self.name, "blocks": list(self.blocks), "constraints": self.m,
                "variables": int(sum(n * (n + 1) // 2 for n in self.blocks)),
                "complex": self.is_complex}


def _fmt_array(x: np.ndarray) -> bytes:
    x = np.asarray(x) + 0.0  # folds -0.0 into 0.0
    if np.iscomplexobj(x):
        parts = [f"{v.real:.17g},{v.imag:.17g}" for v in x]
    else:
        parts = [f"{float(v):.17g}" for v in x]
    return ";".join(parts).encode()


def _transpose_rows(a: sp.csr_matrix, n: int) -> sp.csr_matrix:
    """Row-wise transpose of vectorized n×n matrices."""
    coo = a.tocoo()
    r, c = np.divmod(coo.col, n)
    return sp.csr_matrix((coo.data, (coo.row, c * n + r)), shape=a.shape)


@dataclass
class SdpSolution:
    primal: list[np.ndarray]
    dual: np.ndarray
    slack: list[np.ndarray]
    primal_value: float
    dual_value: float
    gap: float
    status: Status
    iterations: int = 0
    primal_infeasibility: float = float("nan")
    dual_infeasibility: float = float("nan")
    seconds: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.primal_value


# ---------------------------------------------------------------------------
# assembly helpers
# ---------------------------------------------------------------------------

class SdpBuilder:
    """Accumulate constraints given as per-block dense or sparse matrices."""

    def __init__(self, blocks: Sequence[int], dtype=float, name: str = "sdp"):
        self.blocks = tuple(int(n) for n in blocks)
        self.dtype = dtype
        self.objective = [np.zeros((n, n), dtype=dtype) for n in self.blocks]
        self._rows: list[list] = [[] for _ in self.blocks]
        self._b: list[float] = []
        self.name = name

    def set_objective(self, block: int, c: np.ndarray) -> None:
        self.objective[block] = np.asarray(c)

    def add_rows(self, block_rows: dict[int, sp.spmatrix], rhs: np.ndarray) -> None:
        """Add several constraints at once: ``block_rows[k]`` has one vectorized row per constraint."""
        rhs = np.asarray(rhs, dtype=float).reshape(-1)
        for k in range(len(self.blocks)):
            if k in block_rows:
                mat = sp.csr_matrix(block_rows[k])
                if mat.shape != (rhs.size, self.blocks[k] ** 2):
                    raise ValueError(f"rows for block {k} have shape {mat.shape}")
            else:
                mat = sp.csr_matrix((rhs.size, self.blocks[k] ** 2), dtype=self.dtype)
            self._rows[k].append(mat)
        self._b.extend(rhs.tolist())

    def add(self, mats: dict[int, np.ndarray], rhs: float) -> None:
        rows = {k: sp.csr_matrix(np.asarray(m).reshape(1, -1)) for k, m in mats.items()}
        self.add_rows(rows, np.array([rhs]))

    def build(self) -> SdpProblem:
        a = []
        for k, n in enumerate(self.blocks):
            a.append(sp.vstack(self._rows[k], format="csr") if self._rows[k]
                     else sp.csr_matrix((0, n * n)))
        return SdpProblem(self.blocks, self.objective, a, np.array(self._b), name=self.name)


def hermitian_basis_rows(n: int, real: bool) -> sp.csr_matrix:
    """Rows spanning hermitian (or real symmetric) n×n matrices, each vectorized row-major.

    Row order: diagonal units, then for each i<j the symmetric pair and (complex case)
    the antisymmetric imaginary pair.  Pairing ``<row, vec(Y)>`` with a hermitian Y gives
    Y_ii, 2 Re Y_ij and 2 Im Y_ij respectively.
    """
    rows, cols, vals = [], [], []
    r = 0
    for i in range(n):
        rows.append(r); cols.append(i * n + i); vals.append(1.0)
        r += 1
    iu, ju = np.triu_indices(n, 1)
    for i, j in zip(iu, ju):
        rows += [r, r]; cols += [i * n + j, j * n + i]; vals += [1.0, 1.0]
        r += 1
    if not real:
        for i, j in zip(iu, ju):
            # A = i(E_ij - E_ji) is hermitian; Re tr(A† Y) = 2 Im Y_ij ... up to sign convention
            rows += [r, r]; cols += [i * n + j, j * n + i]; vals += [1j, -1j]
            r += 1
    dtype = float if real else complex
    return sp.csr_matrix((np.array(vals, dtype=dtype), (rows, cols)), shape=(r, n * n))


# ---------------------------------------------------------------------------
# complex -> real embedding
# ---------------------------------------------------------------------------

def embed_matrix(x: np.ndarray) -> np.ndarray:
    re, im = np.real(x), np.imag(x)
    return np.block([[re, -im], [im, re]])


def unembed_matrix(x: np.ndarray) -> np.ndarray:
    n = x.shape[0] // 2
    re = (x[:n, :n] + x[n:, n:]) / 2
    im = (x[n:, :n] - x[:n, n:]) / 2
    return re + 1j * im


def _embed_rows(a: sp.csr_matrix, n: int) -> sp.csr_matrix:
    coo = a.tocoo()
    i, j = np.divmod(coo.col, n)
    re, im = np.real(coo.data), np.imag(coo.data)
    n2 = 2 * n
    rows = np.concatenate([coo.row] * 4)
    ii = np.concatenate([i, i, i + n, i + n])
    jj = np.concatenate([j, j + n, j, j + n])
    # [[Re, -Im], [Im, Re]] of A where <A, X> = Re tr(A† X); rows store A itself
    vals = np.concatenate([re, -im, im, re]) / 2
    m = sp.csr_matrix((vals, (rows, ii * n2 + jj)), shape=(a.shape[0], n2 * n2))
    m.eliminate_zeros()
    return m


def embed_real(p: SdpProblem) -> SdpProblem:
    """Real symmetric problem with the same optimal value (complex blocks doubled)."""
    if not p.is_complex:
        return p
    blocks, objs, rows = [], [], []
    for n, c, a in zip(p.blocks, p.objective, p.a):
        blocks.append(2 * n)
        objs.append(embed_matrix(np.asarray(c, dtype=complex)) / 2)
        rows.append(_embed_rows(a.astype(complex), n))
    q = SdpProblem(tuple(blocks), objs, rows, p.b.copy(), name=p.name + "[real]", meta=dict(p.meta))
    q.meta["embedded_from"] = list(p.blocks)
    return q


# ---------------------------------------------------------------------------
# presolve
# ---------------------------------------------------------------------------

@dataclass
class Presolved:
    problem: SdpProblem
    kept: np.ndarray
    inconsistency: float


def _stacked(p: SdpProblem) -> sp.csr_matrix:
    return sp.hstack(p.a, format="csr") if p.a else sp.csr_matrix((p.m, 0))


def _gram(x, y) -> np.ndarray:
    """x @ y^H as a dense array; densifies first when the rows are mostly filled."""
    if sp.issparse(x) and x.nnz > 0.05 * x.shape[0] * x.shape[1] and (x.shape[0] + y.shape[0]) * x.shape[1] <= 4e7:
        x, y = x.toarray(), y.toarray()
    g = x @ y.conj().T
    return g.toarray() if sp.issparse(g) else np.asarray(g)


def independent_rows(a: sp.csr_matrix | np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Indices of a maximal set of linearly independent rows (first-come preference)."""
    m = a.shape[0]
    if m == 0:
        return np.zeros(0, dtype=int)
    ncols = a.shape[1]
    if sp.issparse(a):
        norms = np.sqrt(np.asarray(abs(a).power(2).sum(axis=1)).ravel())
    else:
        norms = np.linalg.norm(a, axis=1)
    nz = np.flatnonzero(norms > tol)
    if nz.size == 0:
        return nz
    scale = sp.diags(1 / norms[nz])
    sub = a[nz]
    sub = scale @ sub if sp.issparse(sub) else sub / norms[nz, None]
    if nz.size * ncols <= 3e6:
        dense = sub.toarray() if sp.issparse(sub) else np.asarray(sub)
        _, r, piv = sla.qr(dense.T, mode="economic", pivoting=True)
        d = np.abs(np.diag(r))
        rank = int(np.sum(d > tol * max(1.0, d[0]) * max(1, np.sqrt(nz.size)) * 10))
        return np.sort(nz[piv[:rank]])
    gram = _gram(sub, sub)
    gram = np.real(gram) if not np.iscomplexobj(sub.data if sp.issparse(sub) else sub) else gram
    lapack = sla.lapack.zpstrf if np.iscomplexobj(gram) else sla.lapack.dpstrf
    _, piv, rank, info = lapack(np.array(gram, order="F"), tol=max(1e-11, 64 * np.finfo(float).eps * nz.size), lower=1)
    piv = piv[:rank] - 1
    return np.sort(nz[piv])


def presolve(p: SdpProblem, tol: float = 1e-12) -> Presolved:
    a = _stacked(p)
    kept = independent_rows(a, tol)
    dropped = np.setdiff1d(np.arange(p.m), kept)
    inconsistency = 0.0
    if dropped.size:
        ak = a[kept]
        ad = a[dropped]
        g = _gram(ak, ak)
        h = _gram(ak, ad)
        coef = np.real(sla.solve(g, h, assume_a="pos")) if kept.size else np.zeros((0, dropped.size))
        resid = p.b[dropped] - coef.T @ p.b[kept]
        inconsistency = float(np.max(np.abs(resid)) / (1 + np.max(np.abs(p.b), initial=0)))
    q = SdpProblem(p.blocks, p.objective, [blk[kept] for blk in p.a], p.b[kept], name=p.name, meta=dict(p.meta))
    return Presolved(q, kept, inconsistency)
