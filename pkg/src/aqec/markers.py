"""Marker-factored reduction for the full unitary symmetry.

When every position carries a unitary marker (the logical system and each
physical qubit), the variable space is a tensor product over markers of
``(C^2)^{⊗(n+1)}``: the unbarred position followed by its n copies.  The
commutant of ``U^{⊗(n+1)}`` on one marker is small, the objective and every
constraint map are sums of Kronecker products of per-marker maps, so the
reduced problem is assembled marker by marker and combined with Kronecker
products.  Nothing of size ``D × D`` is formed except when lifting the
solution back.

Copy-swap invariance is kept as explicit constraints here rather than being
reduced away, so the blocks are the unitary sectors only.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from math import prod
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .channels import fidelity_operator
from .qcore import kron_all, permute_array, ptrace_array, ptranspose_array
from .sdp import SdpProblem, SdpSolution
from .symmetry.blocks import BlockDiagonalizer, SymmetryError, block_diagonalize
from .symmetry.commutant import TensorAction
from .symmetry.groups import PermGroup

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
TT_TOL = 1e-12

LocalFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# per-marker maps
# ---------------------------------------------------------------------------

@dataclass
class LocalMap:
    fn: LocalFn
    k_in: int
    k_out: int
    _m: np.ndarray | None = field(default=None, repr=False)

    def matrix(self) -> np.ndarray:
        if self._m is None:
            d_in, d_out = 2 ** self.k_in, 2 ** self.k_out
            m = np.zeros((d_out * d_out, d_in * d_in))
            for idx in range(d_in * d_in):
                e = np.zeros(d_in * d_in)
                e[idx] = 1
                m[:, idx] = np.real_if_close(self.fn(e.reshape(d_in, d_in))).reshape(-1)
            self._m = m
        return self._m

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        d = 2 ** self.k_in
        return (self.matrix().T @ y.reshape(-1)).reshape(d, d)


def _dims(k: int) -> tuple[int, ...]:
    return (2,) * k


def ident(k: int) -> LocalMap:
    return LocalMap(lambda x: x, k, k)


def keep(k: int, sel: Sequence[int]) -> LocalMap:
    sel = tuple(sorted(sel))
    return LocalMap(lambda x: ptrace_array(x, _dims(k), sel), k, len(sel))


def keep_append(k: int, sel: Sequence[int], j: int) -> LocalMap:
    """Keep ``sel`` and put 1/2 on local ``j``; output locals in increasing order."""
    sel = tuple(sorted(sel))
    cur = list(sel) + [j]
    new = sorted(cur)
    order = [cur.index(v) for v in new]

    def fn(x):
        y = np.kron(ptrace_array(x, _dims(k), sel), np.eye(2) / 2)
        return permute_array(y, _dims(len(cur)), order)

    return LocalMap(fn, k, len(cur))


def swap(k: int, a: int, b: int) -> LocalMap:
    order = list(range(k))
    order[a], order[b] = b, a
    return LocalMap(lambda x: permute_array(x, _dims(k), order), k, k)


def transpose(k: int, sel: Sequence[int], twist: bool) -> LocalMap:
    sel = tuple(sel)
    kk = kron_all([J if i in sel else np.eye(2) for i in range(k)])

    def fn(x):
        y = ptranspose_array(x, _dims(k), sel)
        return kk @ y @ kk.T if twist else y

    return LocalMap(fn, k, k)


@dataclass
class MarkerFamily:
    name: str
    terms: list[tuple[float, list[LocalMap]]]
    target: list[np.ndarray] | None = None
    slaved: bool = False

    @property
    def outs(self) -> list[int]:
        return [m.k_out for m in self.terms[0][1]]


def marker_families(hp) -> list[MarkerFamily]:
    """The constraint families of ``hierarchy.families`` written per marker (twisted)."""
    from .hierarchy import PROD

    n, r = hp.level, hp.positions.r
    k = n + 1
    nm = r + 1
    copies = tuple(range(1, n + 1))
    fams = [MarkerFamily("trace", [(1.0, [keep(k, ())] * nm)], [np.ones((1, 1))] * nm)]
    for c in range(1, n):
        fams.append(MarkerFamily(f"swap{c}", [(1.0, [ident(k)] * nm), (-1.0, [swap(k, c, c + 1)] * nm)]))

    def encoder(j):
        lo = tuple(range(1, j))
        return MarkerFamily(f"encoder{j}", [
            (1.0, [keep(k, tuple(range(1, j + 1)))] + [keep(k, lo)] * r),
            (-1.0, [keep_append(k, lo, j)] + [keep(k, lo)] * r)])

    decoder = MarkerFamily("decoder", [(1.0, [keep(k, copies)] + [ident(k)] * r),
                                       (-1.0, [keep(k, copies)] + [keep_append(k, copies, 0)] * r)])
    if hp.variant == PROD:
        fams.append(decoder)
        levels = range(1, n + 1) if hp.all_levels else [n]
        fams += [encoder(j) for j in levels]
    else:
        fams.append(MarkerFamily("decoder-marginal", [(1.0, [keep(k, ())] + [keep(k, (0,))] * r)],
                                 [np.ones((1, 1))] + [np.eye(2) / 2] * r))
        fams.append(MarkerFamily("encoder-marginal", [(1.0, [keep(k, (1,))] + [keep(k, ())] * r)],
                                 [np.eye(2) / 2] + [np.ones((1, 1))] * r))
        if hp.ns:
            fams.append(decoder)
    if hp.ns_a2b:
        lower = tuple(range(0, n))
        mid = tuple(range(1, n))
        fams.append(MarkerFamily("ns-a2b", [(1.0, [ident(k)] + [keep(k, mid)] * r),
                                            (-1.0, [keep_append(k, lower, n)] + [keep(k, mid)] * r)]))
    if hp.ppt_marginal:
        first = keep(k, (0, 1))
        pt = transpose(2, (1,), True)
        fams.append(MarkerFamily("ppt-marginal", [(1.0, [LocalMap(lambda x: pt.fn(first.fn(x)), k, 2)] * nm)],
                                 slaved=True))
    for cut in hp.ppt_cuts:
        fams.append(MarkerFamily("ppt" + "".join(str(c) for c in cut),
                                 [(1.0, [transpose(k, cut, True)] * nm)], slaved=True))
    return fams


# ---------------------------------------------------------------------------
# objective as a sum of marker products
# ---------------------------------------------------------------------------

def marker_positions(pos) -> list[tuple[int, ...]]:
    out = [(0,) + tuple(pos.lb(c) for c in range(1, pos.n + 1))]
    for i in range(pos.r):
        out.append((1 + i,) + tuple(pos.pb(c)[i] for c in range(1, pos.n + 1)))
    return out


def product_terms(a: np.ndarray, nm: int) -> list[tuple[float, list[np.ndarray]]]:
    """Operator-Schmidt (tensor train) expansion of an operator on (L, P_1..P_r, Lb, Pb_1..Pb_r).

    Returns terms ``coef ⊗_μ x_μ`` with x_μ on (unbarred, barred) of marker μ.
    """
    k = 2 * nm
    t = a.reshape((2,) * (2 * k))
    axes = []
    for mu in range(nm):
        axes += [mu, nm + mu, k + mu, k + nm + mu]
    t = t.transpose(axes).reshape((16,) * nm)
    cores = []
    rest = t.reshape(1, -1)
    left = 1
    for mu in range(nm - 1):
        mat = rest.reshape(left * 16, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep_ = s > TT_TOL * max(1.0, s[0])
        u, s, vh = u[:, keep_], s[keep_], vh[keep_]
        cores.append(u.reshape(left, 16, -1))
        rest = s[:, None] * vh
        left = u.shape[1]
    cores.append(rest.reshape(left, 16, 1))
    terms = []
    for bonds in itertools.product(*[range(c.shape[2]) for c in cores[:-1]]):
        idx = (0,) + bonds + (0,)
        mats = [cores[mu][idx[mu], :, idx[mu + 1]].reshape(2, 2, 2, 2).reshape(4, 4) for mu in range(nm)]
        terms.append((1.0, mats))
    return terms


def _embed_pair(x: np.ndarray, k: int, c: int) -> np.ndarray:
    """Place a (local 0, local c) operator into k locals, identity elsewhere, twisted on local 0."""
    others = [i for i in range(k) if i not in (0, c)]
    y = np.kron(x, np.eye(2 ** len(others)))
    cur = [0, c] + others
    order = [cur.index(v) for v in range(k)]
    y = permute_array(y, _dims(k), order)
    kk = np.kron(J, np.eye(2 ** (k - 1)))
    return kk @ y @ kk.T


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

_BD_CACHE: dict = {}


def unitary_bd(k: int, seed: int = 2024) -> BlockDiagonalizer:
    """Adapted basis of U^{⊗k} on k qubits."""
    key = (k, seed)
    if key not in _BD_CACHE:
        if k == 0:
            from .hierarchy import identity_bd
            _BD_CACHE[key] = identity_bd(1)
        else:
            act = TensorAction(_dims(k), PermGroup(k, ()), (tuple(range(k)),), f"U^{k}")
            _BD_CACHE[key] = block_diagonalize(act, seed=seed)
    return _BD_CACHE[key]


@dataclass
class MarkerReduction:
    """Sector bookkeeping: one main sector per tuple of per-marker blocks."""
    bds: list[BlockDiagonalizer]
    sectors: list[tuple[int, ...]]
    marker_positions: list[tuple[int, ...]]
    twist: tuple[int, ...]
    y_blocks: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def sizes(self) -> list[int]:
        return [prod(self.bds[mu].blocks[b].m for mu, b in enumerate(s)) for s in self.sectors]

    def summary(self) -> dict:
        return {"sectors": len(self.sectors), "sizes": self.sizes,
                "variables": int(sum(m * m for m in self.sizes)), "markers": len(self.bds)}

    def lift(self, xs: Sequence[np.ndarray], pos) -> np.ndarray:
        """Full operator in the original position order, twist undone."""
        nm = len(self.bds)
        dm = [bd.dim for bd in self.bds]
        total = None
        letters = "abcdefgh"
        for s, x in zip(self.sectors, xs):
            ms = [self.bds[mu].blocks[b].m for mu, b in enumerate(s)]
            units = []
            for mu, b in enumerate(s):
                bd = self.bds[mu]
                w = bd.columns(b).reshape(bd.dim, bd.blocks[b].m, bd.blocks[b].d)
                units.append(np.einsum("ipt,jqt->pqij", w, w.conj()))
            xt = np.asarray(x).reshape(ms + ms)
            p = letters[:nm]
            q = letters[nm:2 * nm].upper()
            ii = "ijklmnop"[:nm]
            jj = "IJKLMNOP"[:nm]
            spec = p + q + "," + ",".join(f"{p[mu]}{q[mu]}{ii[mu]}{jj[mu]}" for mu in range(nm)) + "->" + ii + jj
            y = np.einsum(spec, xt, *units, optimize=True)
            total = y if total is None else total + y
        d = prod(dm)
        rho = total.reshape(d, d)
        mp = [i for m in self.marker_positions for i in m]
        order = [mp.index(j) for j in range(len(mp))]
        rho = permute_array(rho, pos.dims, order)
        k = kron_all([J if i in self.twist else np.eye(2) for i in range(len(mp))])
        return k.T @ rho @ k


def _pieces(fam: MarkerFamily, main: BlockDiagonalizer, tbds: list[BlockDiagonalizer]):
    """piece[t][μ][λ'][p][q] = list over main blocks of Ψ*(Λ_{t,μ}†(w_p w_q†))."""
    out = []
    for coef, maps in fam.terms:
        per = []
        for mu, lm in enumerate(maps):
            tb = tbds[mu]
            blocks = []
            for bi in range(len(tb.blocks)):
                w = tb.copy(bi, 0)
                m = w.shape[1]
                grid = [[main.reduce(lm.adjoint(np.outer(w[:, p], w[:, q].conj()))) for q in range(m)]
                        for p in range(m)]
                blocks.append(grid)
            per.append(blocks)
        out.append((coef, per))
    return out


def build_marker_reduced(hp, seed: int = 2024, check: bool = True) -> tuple[SdpProblem, MarkerReduction]:
    t0 = time.perf_counter()
    pos = hp.positions
    if hp.d_l != 2 or any(d != 2 for d in pos.p_dims):
        raise ValueError("the marker-factored reduction needs a logical qubit and qubit positions")
    n, nm = pos.n, pos.r + 1
    k = n + 1
    main = unitary_bd(k, seed)
    sectors = list(itertools.product(range(len(main.blocks)), repeat=nm))
    red = MarkerReduction([main] * nm, sectors, marker_positions(pos), tuple(range(nm)))
    msz = [b.m for b in main.blocks]
    real = hp.noise.is_real()

    # objective
    a = fidelity_operator(hp.noise, hp.d_l) * hp.d_p ** 2
    terms = product_terms(a, nm)
    objs = [np.zeros((m, m), dtype=complex) for m in red.sizes]
    rng = np.random.default_rng(seed)
    act = TensorAction(_dims(k), PermGroup(k, ()), (tuple(range(k)),))
    for c in range(1, n + 1):
        for coef, mats in terms:
            loc = [_embed_pair(x, k, c) for x in mats]
            if check:
                for x in loc:
                    err = act.check_invariant(x, rng)
                    if err > 1e-9 * max(1.0, float(np.max(np.abs(x)))):
                        raise SymmetryError(f"objective factor is not unitarily invariant ({err:.2e})")
            rl = [main.reduce(x) for x in loc]
            for si, s in enumerate(sectors):
                objs[si] += coef / n * kron_all([rl[mu][b] for mu, b in enumerate(s)])
    objs = [(o + o.conj().T) / 2 for o in objs]
    if real:
        objs = [np.real(o) for o in objs]

    blocks = list(red.sizes)
    main_rows: list[list[np.ndarray]] = [[] for _ in sectors]
    rhs_all, y_rows = [], {}
    dt = float if real else complex
    for fam in marker_families(hp):
        tbds = [unitary_bd(o, seed) for o in fam.outs]
        pieces = _pieces(fam, main, tbds)
        tsectors = list(itertools.product(*[range(len(tb.blocks)) for tb in tbds]))
        rows = [[] for _ in sectors]
        rhs, where = [], []
        for ts in tsectors:
            tms = [tbds[mu].blocks[b].m for mu, b in enumerate(ts)]
            mt = prod(tms)
            for pp in range(mt):
                for qq in range(pp, mt):
                    pi = np.unravel_index(pp, tms)
                    qi = np.unravel_index(qq, tms)
                    rk = []
                    for si, s in enumerate(sectors):
                        acc = 0
                        for coef, per in pieces:
                            acc = acc + coef * kron_all([per[mu][ts[mu]][pi[mu]][qi[mu]][s[mu]]
                                                         for mu in range(nm)])
                        rk.append(acc)
                    if fam.target is not None:
                        val = 1.0 + 0j
                        for mu in range(nm):
                            w = tbds[mu].copy(ts[mu], 0)
                            val *= w[:, pi[mu]].conj() @ fam.target[mu] @ w[:, qi[mu]]
                    else:
                        val = 0j
                    variants = [(1.0, np.real(val))]
                    if not real and pp != qq:
                        variants.append((1j, np.imag(val)))
                    for ph, b in variants:
                        for si in range(len(sectors)):
                            r = ph * rk[si]
                            r = (r + r.conj().T) / 2
                            rows[si].append((np.real(r) if real else r).reshape(-1))
                        rhs.append(b)
                        where.append((ts, pp, qq, ph))
        rhs = np.array(rhs, dtype=float)
        nr = rhs.size
        if fam.slaved:
            first = len(blocks)
            tsz = [prod(tbds[mu].blocks[b].m for mu, b in enumerate(ts)) for ts in tsectors]
            red.y_blocks[fam.name] = (first, tsectors)
            for si in range(len(sectors)):
                main_rows[si].append(-np.array(rows[si]))
            blocks += tsz
            objs += [np.zeros((m, m)) for m in tsz]
            sel = [np.zeros((nr, m * m), dtype=dt) for m in tsz]
            tindex = {ts: i for i, ts in enumerate(tsectors)}
            for row, (ts, p, q, ph) in enumerate(where):
                nu = tindex[ts]
                m = tsz[nu]
                e = np.zeros((m, m), dtype=complex)
                e[p, q] = ph
                e = (e + e.conj().T) / 2
                sel[nu][row] = np.real(e).reshape(-1) if real else e.reshape(-1)
            y_rows[first] = (len(rhs_all), sel)
        else:
            for si in range(len(sectors)):
                main_rows[si].append(np.array(rows[si]))
        rhs_all.append(rhs)
    b = np.concatenate(rhs_all)
    mats = [sp.csr_matrix(np.vstack(r)) for r in main_rows]
    offsets = np.cumsum([0] + [len(r) for r in rhs_all])
    for first, (fi, sel) in sorted(y_rows.items()):
        lo, hi = offsets[fi], offsets[fi + 1]
        for s in sel:
            full = sp.lil_matrix((b.size, s.shape[1]), dtype=s.dtype)
            full[lo:hi] = s
            mats.append(full.tocsr())
    p = SdpProblem(tuple(blocks), objs, mats, b, name=f"level{hp.level}/full-markers").hermitized()
    p.meta.update({"level": hp.level, "flags": hp.flags(), "reduced": True, "symmetry": "full",
                   "reduction": red.summary()})
    red.seconds = time.perf_counter() - t0
    return p, red


def lift_marker_primal(sol: SdpSolution, red: MarkerReduction, pos) -> np.ndarray:
    return red.lift(sol.primal[:len(red.sectors)], pos)
