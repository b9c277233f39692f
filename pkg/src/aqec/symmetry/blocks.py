"""Numerical block diagonalization of commutant algebras and SDP reduction.

An algebra ``⊕_λ M_{m_λ} ⊗ I_{d_λ}`` is split by eigen-decomposing a generic
hermitian element: each eigenspace sits inside one isotypic component and has
dimension d_λ.  A second generic element links eigenspaces of the same
component, and its off-diagonal blocks (after a polar factor) align the copies
so that the isometry V brings every algebra element to the form X_λ ⊗ I.
Columns of V are ordered block by block, multiplicity index slow.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import scipy.sparse as sp

from ..sdp.model import SdpProblem, independent_rows

CLUSTER_TOL = 1e-9
GAP_TOL = 1e-7
LINK_TOL = 1e-7
LEAK_TOL = 1e-9
MAX_RESAMPLES = 5


class Sampler(Protocol):
    def random_element(self, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class BlockSpec:
    label: str
    m: int
    d: int
    offset: int

    @property
    def width(self) -> int:
        return self.m * self.d


@dataclass
class BlockDiagonalizer:
    v: np.ndarray
    blocks: list[BlockSpec]
    seed: int
    action: object = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.v.shape[0]

    @property
    def sizes(self) -> list[int]:
        return [b.m for b in self.blocks]

    def columns(self, k: int) -> np.ndarray:
        b = self.blocks[k]
        return self.v[:, b.offset:b.offset + b.width]

    def copy(self, k: int, t: int = 0) -> np.ndarray:
        """Columns of copy t of block k (one per multiplicity index)."""
        b = self.blocks[k]
        return self.v[:, b.offset + t:b.offset + b.width:b.d]

    def reduce(self, a: np.ndarray) -> list[np.ndarray]:
        """Adjoint of the lift: ``Σ_t W_t† a W_t`` per block."""
        out = []
        for k, b in enumerate(self.blocks):
            w = self.columns(k)
            m = (w.conj().T @ a @ w).reshape(b.m, b.d, b.m, b.d)
            out.append(np.einsum("atbt->ab", m))
        return out

    def project(self, a: np.ndarray) -> list[np.ndarray]:
        """Block coordinates X_λ of an algebra element ``a = V(⊕ X_λ ⊗ I)V†`` (first copy)."""
        out = []
        for k in range(len(self.blocks)):
            w = self.copy(k, 0)
            out.append(w.conj().T @ a @ w)
        return out

    def lift(self, xs: Sequence[np.ndarray]) -> np.ndarray:
        dt = np.result_type(self.v, *xs)
        out = np.zeros((self.dim, self.dim), dtype=dt)
        for k, (b, x) in enumerate(zip(self.blocks, xs)):
            w = self.columns(k)
            out += w @ np.kron(x, np.eye(b.d)) @ w.conj().T
        return out

    def unit(self, k: int, a: int, c: int) -> np.ndarray:
        """``Σ_t v_{a,t} v_{c,t}†`` for block k (lift of a matrix unit)."""
        b = self.blocks[k]
        w = self.columns(k).reshape(self.dim, b.m, b.d)
        return w[:, a, :] @ w[:, c, :].conj().T

    def hs_basis(self, k: int, a: int, c: int) -> np.ndarray:
        """Hilbert–Schmidt orthogonal basis element ``V(E_ac ⊗ I/d)V†``."""
        return self.unit(k, a, c) / self.blocks[k].d

    def leakage(self, x: np.ndarray) -> float:
        """Deviation of V†xV from the form ⊕ X_λ ⊗ I, relative to ‖x‖."""
        y = self.v.conj().T @ x @ self.v
        scale = max(1.0, float(np.max(np.abs(x))))
        err = 0.0
        for k, b in enumerate(self.blocks):
            sl = slice(b.offset, b.offset + b.width)
            blk = y[sl, sl].reshape(b.m, b.d, b.m, b.d)
            core = np.einsum("atbt->ab", blk) / b.d
            err = max(err, float(np.max(np.abs(blk - np.einsum("ab,tu->atbu", core, np.eye(b.d))))))
            rest = y[sl].copy()
            rest[:, sl] = 0
            err = max(err, float(np.max(np.abs(rest), initial=0)))
        return err / scale

    def summary(self) -> dict:
        return {"blocks": [{"label": b.label, "m": b.m, "d": b.d} for b in self.blocks],
                "sizes": self.sizes, "dim": self.dim, "seed": self.seed, "variables": sum(b.m ** 2 for b in self.blocks)}


class DecompositionError(RuntimeError):
    pass


def _clusters(w: np.ndarray) -> tuple[list[slice], float]:
    scale = max(1.0, float(np.max(np.abs(w))))
    cuts = np.flatnonzero(np.diff(w) > CLUSTER_TOL * scale) + 1
    edges = [0, *cuts.tolist(), w.size]
    groups = [slice(a, b) for a, b in zip(edges, edges[1:])]
    gaps = np.diff(w)[cuts - 1] if cuts.size else np.array([np.inf])
    return groups, float(np.min(gaps)) / scale


def _attempt(src: Sampler, rng: np.random.Generator) -> tuple[np.ndarray, list[BlockSpec]]:
    a = src.random_element(rng)
    w, q = np.linalg.eigh(a)
    groups, gap = _clusters(w)
    if gap < GAP_TOL:
        raise DecompositionError(f"eigen-gap {gap:.1e} too small")
    b = src.random_element(rng)
    qb = q.conj().T @ b @ q
    nb = len(groups)
    scale = max(1.0, float(np.max(np.abs(b))))
    # link strength between eigenspaces
    strength = np.zeros((nb, nb))
    for i, gi in enumerate(groups):
        for j in range(i + 1, nb):
            strength[i, j] = strength[j, i] = np.linalg.norm(qb[gi, groups[j]])
    linked = strength > LINK_TOL * scale
    comp = -np.ones(nb, dtype=int)
    ncomp = 0
    for s in range(nb):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = ncomp
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(linked[i] & (comp < 0)):
                comp[j] = ncomp
                stack.append(j)
        ncomp += 1
    cols, specs = [], []
    offset = 0
    for c in range(ncomp):
        members = [i for i in range(nb) if comp[i] == c]
        dims = {groups[i].stop - groups[i].start for i in members}
        if len(dims) != 1:
            raise DecompositionError(f"eigenspaces of unequal dimension {sorted(dims)} in one component")
        d = dims.pop()
        # breadth-first alignment along strongest links
        aligned = {members[0]: q[:, groups[members[0]]]}
        order = [members[0]]
        frontier = [members[0]]
        while frontier:
            nxt = []
            for p in frontier:
                for k in members:
                    if k in aligned or not linked[p, k]:
                        continue
                    t = q[:, groups[k]].conj().T @ b @ aligned[p]
                    u, s, vh = np.linalg.svd(t)
                    if s[-1] < (1 - 1e-6) * s[0]:
                        raise DecompositionError("copies cannot be aligned (link is not a scaled unitary)")
                    aligned[k] = q[:, groups[k]] @ (u @ vh)
                    order.append(k)
                    nxt.append(k)
            frontier = nxt
        if len(aligned) != len(members):
            raise DecompositionError("component is not connected")
        cols += [aligned[k] for k in order]
        specs.append(BlockSpec(f"b{c}", len(members), d, offset))
        offset += len(members) * d
    v = np.hstack(cols)
    return v, specs


def block_diagonalize(src: Sampler, seed: int = 2024, checks: int = 2) -> BlockDiagonalizer:
    """Symmetry-adapted isometry for the algebra sampled by ``src``."""
    rng = np.random.default_rng(seed)
    last = None
    for _ in range(MAX_RESAMPLES):
        try:
            v, specs = _attempt(src, rng)
        except DecompositionError as exc:
            last = exc
            continue
        # deterministic block order: larger blocks first, then by irrep dimension
        order = sorted(range(len(specs)), key=lambda i: (-specs[i].m, -specs[i].d, i))
        cols, new, off = [], [], 0
        for rank, i in enumerate(order):
            s = specs[i]
            cols.append(v[:, s.offset:s.offset + s.width])
            new.append(BlockSpec(f"b{rank}", s.m, s.d, off))
            off += s.width
        bd = BlockDiagonalizer(np.hstack(cols), new, seed, getattr(src, "action", src))
        err = np.max(np.abs(bd.v.conj().T @ bd.v - np.eye(bd.v.shape[1])))
        if err > 1e-10:
            last = DecompositionError(f"isometry error {err:.1e}")
            continue
        leak = max(bd.leakage(src.random_element(rng)) for _ in range(checks))
        if leak > LEAK_TOL:
            last = DecompositionError(f"off-block leakage {leak:.1e}")
            continue
        bd.meta["leakage"] = leak
        return bd
    raise DecompositionError(f"block diagonalization failed after {MAX_RESAMPLES} samples: {last}")


# ---------------------------------------------------------------------------
# SDP reduction
# ---------------------------------------------------------------------------

class SymmetryError(ValueError):
    pass


def _row_mats(p: SdpProblem, block: int) -> np.ndarray:
    n = p.blocks[block]
    return p.a[block].toarray().reshape(p.m, n, n)


def check_problem_invariance(p: SdpProblem, action, block: int = 0, tol: float = 1e-9,
                             rng: np.random.Generator | None = None) -> None:
    """Objective commutes with the group and the constraint set is mapped to itself."""
    rng = rng or np.random.default_rng(7)
    c = np.asarray(p.objective[block])
    unitaries = [("generator " + str(g), ("perm", g)) for g in action.group.generators]
    if getattr(action, "markers", ()):
        unitaries += [(f"random unitary {i}", ("dense", action.sample_unitary(rng))) for i in range(2)]

    def conj(x, how):
        kind, g = how
        return action.conjugate(x, g) if kind == "perm" else g @ x @ g.conj().T

    for name, how in unitaries:
        err = float(np.max(np.abs(conj(c, how) - c)))
        if err > tol * max(1.0, float(np.max(np.abs(c)))):
            raise SymmetryError(f"objective does not commute with {name}: norm {err:.2e}")
    if p.m == 0:
        return
    # a spanning subset of the rows carries the whole test
    kept = independent_rows(p.a[block])
    rows = _row_mats(p, block)[kept]
    b = p.b[kept]
    r = rows.reshape(kept.size, -1)
    q, tri = np.linalg.qr(r.T)
    for name, how in unitaries:
        # rows of U† A_i U, expressed in the span of the original rows
        inv = ("perm", tuple(np.argsort(how[1]))) if how[0] == "perm" else ("dense", how[1].conj().T)
        moved = np.array([conj(a, inv) for a in rows]).reshape(kept.size, -1)
        proj = q.conj().T @ moved.T
        resid = float(np.max(np.abs(q @ proj - moved.T), initial=0))
        if resid > 1e-7 * max(1.0, float(np.max(np.abs(r)))):
            raise SymmetryError(f"constraint space is not invariant under {name}: residual {resid:.2e}")
        t = np.linalg.solve(tri, proj)
        drift = float(np.max(np.abs(t.T @ b - b), initial=0))
        if drift > 1e-7 * max(1.0, float(np.max(np.abs(p.b), initial=0))):
            raise SymmetryError(f"right-hand side is not invariant under {name}: {drift:.2e}")


def reduce_sdp(p: SdpProblem, bd: BlockDiagonalizer, block: int = 0, check: bool = True) -> SdpProblem:
    """Replace one block by its symmetry-adapted blocks of sizes m_λ."""
    if check and bd.action is not None and hasattr(bd.action, "group"):
        check_problem_invariance(p, bd.action, block)
    if p.blocks[block] != bd.dim:
        raise ValueError("block diagonalizer does not match the block dimension")
    real = not p.is_complex and np.isrealobj(bd.v)
    new_c = [np.real(x) if real else x for x in bd.reduce(np.asarray(p.objective[block]))]
    rows = _row_mats(p, block)
    red = [[] for _ in bd.blocks]
    for a in rows:
        for k, x in enumerate(bd.reduce(a)):
            red[k].append((np.real(x) if real else x).reshape(-1))
    blocks, objs, mats = [], [], []
    for k, b in enumerate(bd.blocks):
        blocks.append(b.m)
        objs.append((new_c[k] + new_c[k].conj().T) / 2)
        m = np.array(red[k]).reshape(p.m, b.m * b.m) if p.m else np.zeros((0, b.m * b.m))
        mats.append(sp.csr_matrix(m))
    others = [i for i in range(len(p.blocks)) if i != block]
    blocks += [p.blocks[i] for i in others]
    objs += [p.objective[i] for i in others]
    mats += [p.a[i] for i in others]
    out = SdpProblem(tuple(blocks), objs, mats, p.b.copy(), name=p.name + "/reduced", meta=dict(p.meta)).hermitized()
    out.meta["reduction"] = bd.summary()
    return out


def lift_solution(xs: Sequence[np.ndarray], bd: BlockDiagonalizer) -> np.ndarray:
    return bd.lift(list(xs)[:len(bd.blocks)])


__all__ = ["BlockDiagonalizer", "BlockSpec", "DecompositionError", "SymmetryError", "block_diagonalize",
           "check_problem_invariance", "independent_rows", "lift_solution", "reduce_sdp"]
