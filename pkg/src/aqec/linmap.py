"""Linear maps between operator spaces over tensor-factor layouts.

Each map can act on a dense matrix and can also be materialized as a sparse
matrix acting on row-major vectorizations, which is what the unreduced SDP
assembly needs.  Only the handful of index-structured maps used by the
hierarchy constraints are provided.
"""
from __future__ import annotations

from math import prod
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .qcore import permute_array, ptrace_array, ptranspose_array


def _grid(dims: Sequence[int]) -> np.ndarray:
    n = prod(dims)
    return np.arange(n * n, dtype=np.int64).reshape(tuple(dims) * 2)


class LinMap:
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]

    @property
    def d_in(self) -> int:
        return prod(self.in_dims)

    @property
    def d_out(self) -> int:
        return prod(self.out_dims)

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def matrix(self) -> sp.csr_matrix:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def __matmul__(self, other: "LinMap") -> "LinMap":
        return Compose(self, other)

    def __add__(self, other: "LinMap") -> "LinMap":
        return Combo([(1.0, self), (1.0, other)])

    def __sub__(self, other: "LinMap") -> "LinMap":
        return Combo([(1.0, self), (-1.0, other)])

    def __rmul__(self, c: float) -> "LinMap":
        return Combo([(c, self)])


class Identity(LinMap):
    def __init__(self, dims: Sequence[int]):
        self.in_dims = self.out_dims = tuple(dims)

    def apply(self, x):
        return x

    def matrix(self):
        return sp.identity(self.d_in ** 2, format="csr")


class Permute(LinMap):
    """New factor j is old factor ``order[j]``."""

    def __init__(self, dims: Sequence[int], order: Sequence[int]):
        self.in_dims = tuple(dims)
        self.order = tuple(order)
        self.out_dims = tuple(self.in_dims[i] for i in self.order)

    def apply(self, x):
        return permute_array(x, self.in_dims, self.order)

    def matrix(self):
        src = _grid(self.in_dims)
        k = len(self.in_dims)
        cols = src.transpose(list(self.order) + [k + i for i in self.order]).ravel()
        n = cols.size
        return sp.csr_matrix((np.ones(n), (np.arange(n), cols)), shape=(n, n))


class PartialTrace(LinMap):
    def __init__(self, dims: Sequence[int], keep: Sequence[int]):
        self.in_dims = tuple(dims)
        self.keep = tuple(sorted(keep))
        self.out_dims = tuple(self.in_dims[i] for i in self.keep)

    def apply(self, x):
        return ptrace_array(x, self.in_dims, self.keep)

    def matrix(self):
        k = len(self.in_dims)
        gone = [i for i in range(k) if i not in self.keep]
        src = _grid(self.in_dims).transpose(list(self.keep) + gone + [k + i for i in self.keep] + [k + i for i in gone])
        dk, dt = self.d_out, prod(self.in_dims[i] for i in gone)
        src = src.reshape(dk, dt, dk, dt)
        t = np.arange(dt)
        cols = src[:, t, :, t].reshape(dt, dk * dk)  # advanced indices go first
        rows = np.tile(np.arange(dk * dk), dt)
        return sp.csr_matrix((np.ones(cols.size), (rows, cols.ravel())), shape=(dk * dk, self.d_in ** 2))


class PartialTranspose(LinMap):
    def __init__(self, dims: Sequence[int], subset: Sequence[int]):
        self.in_dims = self.out_dims = tuple(dims)
        self.subset = tuple(subset)

    def apply(self, x):
        return ptranspose_array(x, self.in_dims, self.subset)

    def matrix(self):
        k = len(self.in_dims)
        axes = list(range(2 * k))
        for i in self.subset:
            axes[i], axes[i + k] = axes[i + k], axes[i]
        cols = _grid(self.in_dims).transpose(axes).ravel()
        n = cols.size
        return sp.csr_matrix((np.ones(n), (np.arange(n), cols)), shape=(n, n))


class AppendIdentity(LinMap):
    """``X ↦ X ⊗ I/d`` with the new factors appended at the end."""

    def __init__(self, dims: Sequence[int], extra: Sequence[int]):
        self.in_dims = tuple(dims)
        self.extra = tuple(extra)
        self.out_dims = self.in_dims + self.extra

    def apply(self, x):
        e = prod(self.extra)
        return np.kron(x, np.eye(e) / e)

    def matrix(self):
        d, e = self.d_in, prod(self.extra)
        i, j, a = np.meshgrid(np.arange(d), np.arange(d), np.arange(e), indexing="ij")
        rows = ((i * e + a) * (d * e) + (j * e + a)).ravel()
        cols = (i * d + j).ravel()
        return sp.csr_matrix((np.full(rows.size, 1.0 / e), (rows, cols)), shape=((d * e) ** 2, d * d))


class Conjugate(LinMap):
    """``X ↦ K X K†`` for a fixed square K."""

    def __init__(self, dims: Sequence[int], k: np.ndarray):
        self.in_dims = self.out_dims = tuple(dims)
        self.k = np.asarray(k)

    def apply(self, x):
        return self.k @ x @ self.k.conj().T

    def matrix(self):
        k = sp.csr_matrix(self.k)
        return sp.kron(k, k.conj(), format="csr")


class Compose(LinMap):
    def __init__(self, outer: LinMap, inner: LinMap):
        if outer.in_dims != inner.out_dims:
            raise ValueError(f"cannot compose: {inner.out_dims} -> {outer.in_dims}")
        self.outer, self.inner = outer, inner
        self.in_dims, self.out_dims = inner.in_dims, outer.out_dims

    def apply(self, x):
        return self.outer.apply(self.inner.apply(x))

    def matrix(self):
        return (self.outer.matrix() @ self.inner.matrix()).tocsr()


class Combo(LinMap):
    def __init__(self, terms: list[tuple[float, LinMap]]):
        flat = []
        for c, m in terms:
            if isinstance(m, Combo):
                flat += [(c * c2, m2) for c2, m2 in m.terms]
            else:
                flat.append((c, m))
        self.terms = flat
        self.in_dims, self.out_dims = flat[0][1].in_dims, flat[0][1].out_dims
        for _, m in flat:
            if m.in_dims != self.in_dims or m.out_dims != self.out_dims:
                raise ValueError("summands must share input and output layouts")

    def apply(self, x):
        out = None
        for c, m in self.terms:
            y = c * m.apply(x)
            out = y if out is None else out + y
        return out

    def matrix(self):
        out = None
        for c, m in self.terms:
            y = c * m.matrix()
            out = y if out is None else out + y
        return out.tocsr()


def hermitian_rows(m: sp.csr_matrix, d_out: int, d_in: int, real: bool) -> sp.csr_matrix:
    """Constraint rows expressing ``m @ vec(X)`` entrywise for hermitian X.

    One row per diagonal output entry and per real (and, if ``real`` is false,
    imaginary) part of each upper off-diagonal entry.  Rows are returned as
    hermitian coefficient matrices in the ``Re tr(A† X)`` pairing.
    """
    iu, ju = np.triu_indices(d_out)
    idx = iu * d_out + ju
    sub = m[idx]
    re = sub.conj()
    parts = [re]
    if not real:
        off = iu != ju
        parts.append((1j * sub[np.flatnonzero(off)].conj()).tocsr())
    rows = sp.vstack(parts, format="csr")
    # hermitian part of each coefficient matrix
    coo = rows.tocoo()
    r, c = np.divmod(coo.col, d_in)
    t = sp.csr_matrix((coo.data.conj(), (coo.row, c * d_in + r)), shape=rows.shape)
    out = ((rows + t) * 0.5).tocsr()
    out.eliminate_zeros()
    if real:
        out = sp.csr_matrix(out.real) if np.iscomplexobj(out.data) else out
    return out


def target_rhs(t: np.ndarray, real: bool) -> np.ndarray:
    d = t.shape[0]
    iu, ju = np.triu_indices(d)
    vals = t[iu, ju]
    out = [np.real(vals)]
    if not real:
        out.append(np.imag(vals[iu != ju]))
    return np.concatenate(out)
