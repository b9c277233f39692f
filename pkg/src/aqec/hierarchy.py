"""Level-n outer relaxations of the channel-fidelity optimization.

The variable is an operator on ``L P (Lb Pb)^{1..n}``: the decoder-side pair
followed by n copies of the encoder-side pair.  P may consist of several
positions (one per physical qubit), in which case every copy carries the same
split.  Positions are numbered

    0 = L,  1..r = P,  then for copy k (1-based): k(1+r) = Lb_k, followed by Pb_k.

Every constraint is a *family*: a linear map Λ on the variable, a target T
(zero if omitted) and the positions its output lives on.  The unreduced
assembly turns each family into entrywise rows; the symmetry-reduced assembly
projects the same family onto the isotypic blocks of the output space.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import prod
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .channels import QuantumChannel, fidelity_operator
from .linmap import (AppendIdentity, Conjugate, Identity, LinMap, PartialTrace, PartialTranspose, Permute,
                     hermitian_rows, target_rhs)
from .qcore import SystemLayout, Op, kron_all, permute_array, ptrace_array, ptranspose_array
from .sdp import SdpProblem, SdpSolution, SolverOptions, Status, solve
from .symmetry.blocks import BlockDiagonalizer, BlockSpec, SymmetryError, block_diagonalize
from .symmetry.commutant import TensorAction
from .symmetry.groups import PermGroup

PROD, SEP = "prod", "sep"
MODES = ("none", "ext", "iid", "combined", "full")
UNREDUCED_GUARD = 5000
J = np.array([[0.0, 1.0], [-1.0, 0.0]])


# ---------------------------------------------------------------------------
# problem description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Positions:
    d_l: int
    p_dims: tuple[int, ...]
    n: int

    @property
    def r(self) -> int:
        return len(self.p_dims)

    @property
    def p(self) -> tuple[int, ...]:
        return tuple(range(1, 1 + self.r))

    def lb(self, k: int) -> int:
        return k * (1 + self.r)

    def pb(self, k: int) -> tuple[int, ...]:
        return tuple(range(self.lb(k) + 1, self.lb(k) + 1 + self.r))

    def copy(self, k: int) -> tuple[int, ...]:
        return (self.lb(k),) + self.pb(k)

    def copies(self, ks: Sequence[int]) -> tuple[int, ...]:
        return tuple(i for k in ks for i in self.copy(k))

    @property
    def dims(self) -> tuple[int, ...]:
        one = (self.d_l,) + tuple(self.p_dims)
        return one * (self.n + 1)

    @property
    def count(self) -> int:
        return (1 + self.r) * (self.n + 1)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def layout(self) -> SystemLayout:
        labels = ["L"] + [f"P{i + 1}" for i in range(self.r)]
        for k in range(1, self.n + 1):
            labels += [f"Lb{k}"] + [f"Pb{k}_{i + 1}" for i in range(self.r)]
        return SystemLayout(tuple(zip(labels, self.dims)))


def default_ppt_cuts(n: int) -> tuple[tuple[int, ...], ...]:
    cuts = [tuple(range(1, n + 1)), (1,)]
    return tuple(dict.fromkeys(cuts))


@dataclass(frozen=True)
class HierarchyProblem:
    noise: QuantumChannel
    d_l: int = 2
    level: int = 1
    ppt_cuts: tuple[tuple[int, ...], ...] = ()
    ns_a2b: bool = False
    ns: bool = False
    variant: str = PROD
    all_levels: bool = False
    ppt_marginal: bool = False

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("level must be >= 1")
        if self.variant not in (PROD, SEP):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.noise.d_in != self.noise.d_out:
            raise ValueError("noise must map P to a system of the same dimension")
        for cut in self.ppt_cuts:
            _check_cut(cut, self.level)

    @property
    def d_p(self) -> int:
        return self.noise.d_in

    @property
    def p_dims(self) -> tuple[int, ...]:
        return tuple(self.noise.in_layout.dims)

    @property
    def positions(self) -> Positions:
        return Positions(self.d_l, self.p_dims, self.level)

    @property
    def total_dim(self) -> int:
        return (self.d_l * self.d_p) ** (self.level + 1)

    def flags(self) -> dict:
        return {"ppt": [list(c) for c in self.ppt_cuts], "ppt_marginal": self.ppt_marginal, "ns": self.ns,
                "ns_a2b": self.ns_a2b, "variant": self.variant}


def _check_cut(cut, n):
    if not cut:
        raise ValueError("a PPT cut must select at least one copy")
    if any(not 1 <= k <= n for k in cut) or len(set(cut)) != len(cut):
        raise ValueError(f"cut {cut} is not a subset of copies 1..{n}")


@dataclass
class Family:
    name: str
    lmap: LinMap
    keep: tuple[int, ...]
    target: np.ndarray | None = None
    slaved: bool = False
    cut: tuple[int, ...] = ()

    def residual(self, rho: np.ndarray) -> float:
        y = self.lmap.apply(rho)
        if self.slaved:
            w = np.linalg.eigvalsh((y + y.conj().T) / 2)
            return float(max(0.0, -w[0]))
        t = 0 if self.target is None else self.target
        return float(np.max(np.abs(y - t)))


# ---------------------------------------------------------------------------
# constraint families
# ---------------------------------------------------------------------------

def _pt(pos: Positions, keep) -> PartialTrace:
    return PartialTrace(pos.dims, keep)


def trace_family(pos: Positions) -> Family:
    return Family("trace", _pt(pos, ()), (), np.ones((1, 1)))


def swap_families(pos: Positions) -> list[Family]:
    out = []
    for k in range(1, pos.n):
        order = list(range(pos.count))
        a, b = pos.copy(k), pos.copy(k + 1)
        for i, j in zip(a, b):
            order[i], order[j] = j, i
        lm = Identity(pos.dims) - Permute(pos.dims, order)
        out.append(Family(f"swap{k}", lm, tuple(range(pos.count))))
    return out


def decoder_side_family(pos: Positions) -> Family:
    """tr_L ρ = 1_P/d_P ⊗ ρ_copies."""
    keep = tuple(range(1, pos.count))
    cps = pos.copies(range(1, pos.n + 1))
    nc = len(cps)
    inner = AppendIdentity(tuple(pos.dims[i] for i in cps), pos.p_dims) @ _pt(pos, cps)
    order = list(range(nc, nc + pos.r)) + list(range(nc))
    lm = _pt(pos, keep) - Permute(inner.out_dims, order) @ inner
    return Family("decoder", lm, keep)


def encoder_side_family(pos: Positions, j: int | None = None) -> Family:
    """tr_{Pb_j} ρ_{copies 1..j} = ρ_{copies 1..j-1} ⊗ 1/d_L (top level by default)."""
    j = pos.n if j is None else j
    keep = tuple(i for i in pos.copies(range(1, j + 1)) if i not in pos.pb(j))
    lower = pos.copies(range(1, j))
    rhs = AppendIdentity(tuple(pos.dims[i] for i in lower), (pos.d_l,)) @ _pt(pos, lower)
    return Family(f"encoder{j}", _pt(pos, keep) - rhs, keep)


def sep_families(pos: Positions) -> list[Family]:
    d_p = prod(pos.p_dims)
    return [Family("decoder-marginal", _pt(pos, pos.p), pos.p, np.eye(d_p) / d_p),
            Family("encoder-marginal", _pt(pos, (pos.lb(1),)), (pos.lb(1),), np.eye(pos.d_l) / pos.d_l)]


def a2b_family(pos: Positions) -> Family:
    """tr_{P Pb_n} ρ = ρ_{L copies 1..n-1} ⊗ 1/d_L on Lb_n."""
    lower = (0,) + pos.copies(range(1, pos.n))
    keep = lower + (pos.lb(pos.n),)
    rhs = AppendIdentity(tuple(pos.dims[i] for i in lower), (pos.d_l,)) @ _pt(pos, lower)
    return Family("ns-a2b", _pt(pos, keep) - rhs, keep)


def ppt_family(pos: Positions, cut: Sequence[int], twist: "Twist | None" = None) -> Family:
    _check_cut(tuple(cut), pos.n)
    sel = pos.copies(cut)
    lm: LinMap = PartialTranspose(pos.dims, sel)
    if twist is not None:
        k = twist.transposed_operator(pos, sel)
        if k is not None:
            lm = Conjugate(pos.dims, k) @ lm
    return Family("ppt" + "".join(str(c) for c in cut), lm, tuple(range(pos.count)), slaved=True, cut=tuple(cut))


def ppt_marginal_family(pos: Positions, twist: "Twist | None" = None) -> Family:
    """Partial transpose of copy 1 on the marginal ρ_{LP copy1}."""
    w = 1 + pos.r
    keep = tuple(range(2 * w))
    dims = tuple(pos.dims[i] for i in keep)
    sel = tuple(range(w, 2 * w))
    lm: LinMap = PartialTranspose(dims, sel) @ _pt(pos, keep)
    if twist is not None:
        hit = [i for i in sel if (twist.l_marker and i == w) or (twist.p_markers and i > w)]
        if hit:
            k = kron_all([J if i in hit else np.eye(d) for i, d in enumerate(dims)])
            lm = Conjugate(dims, k) @ lm
    return Family("ppt-marginal", lm, keep, slaved=True, cut=(1,))


def families(hp: HierarchyProblem, twist: "Twist | None" = None, include_swaps: bool = True) -> list[Family]:
    pos = hp.positions
    fams = [trace_family(pos)]
    if include_swaps:
        fams += swap_families(pos)
    if hp.variant == PROD:
        fams.append(decoder_side_family(pos))
        levels = range(1, pos.n + 1) if hp.all_levels else [pos.n]
        fams += [encoder_side_family(pos, j) for j in levels]
    else:
        fams += sep_families(pos)
        if hp.ns:
            fams.append(decoder_side_family(pos))
    if hp.ns_a2b:
        fams.append(a2b_family(pos))
    if hp.ppt_marginal:
        fams.append(ppt_marginal_family(pos, twist))
    fams += [ppt_family(pos, c, twist) for c in hp.ppt_cuts]
    return fams


def objective(hp: HierarchyProblem) -> np.ndarray:
    """d_P² times the copy average of the fidelity operator on (L, P, copy k)."""
    pos = hp.positions
    a = fidelity_operator(hp.noise, hp.d_l) * hp.d_p ** 2
    rest = (hp.d_l * hp.d_p) ** (pos.n - 1)
    base = np.kron(a, np.eye(rest)) if rest > 1 else a
    if pos.n == 1:
        return base
    total = np.zeros_like(base)
    for k in range(1, pos.n + 1):
        order = list(range(pos.count))
        for i, j in zip(pos.copy(1), pos.copy(k)):
            order[i], order[j] = j, i
        total += base if k == 1 else permute_array(base, pos.dims, order)
    return total / pos.n


# ---------------------------------------------------------------------------
# unreduced assembly
# ---------------------------------------------------------------------------

def _prune(rows: sp.csr_matrix, rhs: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Drop zero rows and exact duplicates (up to sign) before the rank-revealing presolve."""
    rows = rows.tocsr()
    rows.eliminate_zeros()
    keep, seen = [], set()
    for i in range(rows.shape[0]):
        lo, hi = rows.indptr[i], rows.indptr[i + 1]
        if lo == hi:
            if abs(rhs[i]) > 1e-12:
                keep.append(i)  # inconsistent row is left for the solver to flag
            continue
        idx = rows.indices[lo:hi]
        val = rows.data[lo:hi]
        order = np.argsort(idx)
        idx, val = idx[order], val[order]
        s = 1.0 if (val[0].real if np.iscomplexobj(val) else val[0]) > 0 else -1.0
        key = (idx.tobytes(), np.round(s * val, 14).tobytes(), round(float(s * rhs[i]), 14))
        if key in seen:
            continue
        seen.add(key)
        keep.append(i)
    keep = np.array(keep, dtype=int)
    return rows[keep], rhs[keep]


def _family_rows(fam: Family, real: bool) -> tuple[sp.csr_matrix, np.ndarray]:
    lm = fam.lmap
    rows = hermitian_rows(lm.matrix(), lm.d_out, lm.d_in, real)
    rhs = np.zeros(rows.shape[0]) if fam.target is None else target_rhs(fam.target, real)
    return rows, rhs


def _is_real(hp: HierarchyProblem) -> bool:
    return hp.noise.is_real()


def _start_problem(hp: HierarchyProblem, fams: list[Family], c: np.ndarray, name: str) -> SdpProblem:
    real = _is_real(hp)
    rows_all, rhs_all = [], []
    for fam in fams:
        if fam.slaved:
            continue
        rows, rhs = _prune(*_family_rows(fam, real))
        rows_all.append(rows)
        rhs_all.append(rhs)
    p = SdpProblem((hp.total_dim,), [np.real(c) if real else c], [sp.vstack(rows_all, format="csr")],
                   np.concatenate(rhs_all), name=name)
    p.meta.update({"level": hp.level, "flags": hp.flags(), "families": [f.name for f in fams if not f.slaved],
                   "reduced": False})
    for fam in fams:
        if fam.slaved:
            p = _append(p, fam, real)
    return p


def _guard(hp: HierarchyProblem) -> None:
    if hp.total_dim > UNREDUCED_GUARD:
        raise MemoryError(f"variable dimension {hp.total_dim} exceeds {UNREDUCED_GUARD}; use a symmetry reduction")


def build_level_n(hp: HierarchyProblem) -> SdpProblem:
    """Unreduced level-n problem with the base constraints only (no PPT, no Alice→Bob constraint)."""
    _guard(hp)
    base = HierarchyProblem(hp.noise, hp.d_l, hp.level, (), False, hp.ns, hp.variant, hp.all_levels)
    return _start_problem(base, families(base), objective(base), f"level{hp.level}")


def _append(prob: SdpProblem, fam: Family, real: bool) -> SdpProblem:
    rows, rhs = _family_rows(fam, real)
    n0 = prob.blocks[0]
    if rows.shape[1] != n0 * n0:
        raise ValueError("family does not act on the main variable of this problem")
    extra = [sp.csr_matrix((rows.shape[0], n * n)) for n in prob.blocks[1:]]
    blocks, objs = list(prob.blocks), list(prob.objective)
    if fam.slaved:
        n = fam.lmap.d_out
        sel = hermitian_rows(sp.identity(n * n, format="csr"), n, n, real)
        blocks.append(n)
        objs.append(np.zeros((n, n)))
        a = [sp.vstack([prob.a[0], -rows], format="csr")]
        a += [sp.vstack([blk, z], format="csr") for blk, z in zip(prob.a[1:], extra)]
        a.append(sp.vstack([sp.csr_matrix((prob.m, n * n)), sel], format="csr"))
    else:
        rows, rhs = _prune(rows, rhs)
        extra = [sp.csr_matrix((rows.shape[0], n * n)) for n in prob.blocks[1:]]
        a = [sp.vstack([prob.a[0], rows], format="csr")]
        a += [sp.vstack([blk, z], format="csr") for blk, z in zip(prob.a[1:], extra)]
    out = SdpProblem(tuple(blocks), objs, a, np.concatenate([prob.b, rhs]), name=prob.name, meta=dict(prob.meta))
    out.meta["families"] = list(prob.meta.get("families", [])) + [fam.name]
    return out


def add_ppt_cut(prob: SdpProblem, hp: HierarchyProblem, cut: Sequence[int]) -> SdpProblem:
    """Add a PSD block equal to the partial transpose over the selected copies."""
    return _append(prob, ppt_family(hp.positions, tuple(cut)), _is_real(hp))


def add_ns_a2b(prob: SdpProblem, hp: HierarchyProblem) -> SdpProblem:
    return _append(prob, a2b_family(hp.positions), _is_real(hp))


def build_unreduced(hp: HierarchyProblem) -> SdpProblem:
    prob = build_level_n(hp)
    if hp.ns_a2b:
        prob = add_ns_a2b(prob, hp)
    if hp.ppt_marginal:
        prob = _append(prob, ppt_marginal_family(hp.positions), _is_real(hp))
    for cut in hp.ppt_cuts:
        prob = add_ppt_cut(prob, hp, cut)
    return prob


# ---------------------------------------------------------------------------
# symmetry: group actions, twisting, reduced assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Twist:
    """Conjugation by J = [[0,1],[-1,0]] on selected unbarred positions.

    For qubits conj(U) = J U J† up to a phase, so the U ⊗ conj(U) symmetries
    between unbarred and barred systems become U^{⊗k} after the twist.
    """
    positions: tuple[int, ...]
    l_marker: bool
    p_markers: bool

    def operator(self, pos: Positions) -> np.ndarray:
        return kron_all([J if i in self.positions else np.eye(d) for i, d in enumerate(pos.dims)])

    def transposed_operator(self, pos: Positions, sel: Sequence[int]) -> np.ndarray | None:
        """J on the transposed positions that belong to a marker."""
        hit = [i for i in sel if (self.l_marker and i % (1 + pos.r) == 0)
               or (self.p_markers and i % (1 + pos.r) != 0)]
        if not hit:
            return None
        return kron_all([J if i in hit else np.eye(d) for i, d in enumerate(pos.dims)])


def symmetry_action(pos: Positions, mode: str) -> tuple[TensorAction, Twist | None]:
    if mode not in MODES:
        raise ValueError(f"unknown symmetry mode {mode!r}; choose from {MODES}")
    gens = []
    if mode in ("ext", "combined", "full"):
        for k in range(1, pos.n):
            g = list(range(pos.count))
            for i, j in zip(pos.copy(k), pos.copy(k + 1)):
                g[i], g[j] = j, i
            gens.append(tuple(g))
    if mode in ("iid", "combined", "full") and pos.r > 1:
        for i in range(pos.r - 1):
            g = list(range(pos.count))
            for k in range(pos.n + 1):
                a = 1 + i + k * (1 + pos.r)
                g[a], g[a + 1] = a + 1, a
            gens.append(tuple(g))
    markers = []
    twist = None
    if mode in ("combined", "full"):
        if pos.d_l != 2:
            raise ValueError("unitary symmetry on the logical system is implemented for a logical qubit")
        markers.append((0,) + tuple(pos.lb(k) for k in range(1, pos.n + 1)))
        tw = [0]
        if mode == "full":
            if any(d != 2 for d in pos.p_dims):
                raise ValueError("unitary symmetry on physical systems needs qubit positions")
            for i in range(pos.r):
                markers.append((1 + i,) + tuple(pos.pb(k)[i] for k in range(1, pos.n + 1)))
                tw.append(1 + i)
        twist = Twist(tuple(tw), True, mode == "full")
    group = PermGroup(pos.count, tuple(gens))
    return TensorAction(pos.dims, group, tuple(markers), mode), twist


def _restricted(action: TensorAction, keep: Sequence[int]) -> TensorAction | None:
    if not keep:
        return None
    return action.restrict(keep)


def _cut_action(action: TensorAction, pos: Positions, cut: Sequence[int]) -> TensorAction:
    sel = set(pos.copies(cut))
    gens = [g for g in action.group.elements if {g[i] for i in sel} == sel]
    grp = PermGroup(action.group.degree, tuple(gens), _elements=sorted(set(gens)))
    return TensorAction(action.local_dims, grp, action.markers, action.name + "/cut")


def identity_bd(d: int) -> BlockDiagonalizer:
    return BlockDiagonalizer(np.eye(d), [BlockSpec("all", d, 1, 0)], 0, None)


def _is_trivial(action: TensorAction | None) -> bool:
    return action is None or (action.group.order == 1 and not action.markers)


def _bd_for(action: TensorAction | None, d: int, seed: int, cache: dict) -> BlockDiagonalizer:
    if _is_trivial(action):
        return identity_bd(d)
    key = (action.local_dims, tuple(sorted(action.group.elements)), action.markers)
    if key not in cache:
        cache[key] = block_diagonalize(action, seed=seed)
    return cache[key]


def _check_equivariant(fam: Family, src: TensorAction, tgt: TensorAction | None, rng, scale: float) -> None:
    x = src.random_element(rng)
    y = fam.lmap.apply(x)
    if tgt is not None:
        err = tgt.check_invariant(y, rng)
        if err > 1e-9 * max(1.0, scale, float(np.max(np.abs(y)))):
            raise SymmetryError(f"constraint {fam.name} is not equivariant under the chosen symmetry ({err:.2e})")
        if fam.target is not None:
            err = tgt.check_invariant(fam.target, rng)
            if err > 1e-12:
                raise SymmetryError(f"target of {fam.name} is not invariant ({err:.2e})")


def _row_data(fam: Family, w_blocks: list[np.ndarray], real: bool):
    """Hermitian test operators H on the output space (one per block entry), with right-hand sides."""
    hs, rhs, where = [], [], []
    for nu, w in enumerate(w_blocks):
        m = w.shape[1]
        for p in range(m):
            for q in range(p, m):
                k = np.outer(w[:, p], w[:, q].conj())
                variants = [(k, 1.0)]
                if not real and p != q:
                    variants.append((1j * k, 1j))
                for kk, ph in variants:
                    h = (kk + kk.conj().T) / 2
                    hs.append(h)
                    rhs.append(0.0 if fam.target is None else float(np.real(np.sum(h.conj() * fam.target))))
                    where.append((nu, p, q, ph))
    return hs, np.array(rhs), where


def _reduce_batch(bd: BlockDiagonalizer, g: np.ndarray, real: bool) -> list[np.ndarray]:
    """Ψ1* applied to a stack of operators: per block, Σ_t W_t† G W_t vectorized."""
    out = []
    for k, b in enumerate(bd.blocks):
        w = bd.columns(k)
        t = np.einsum("ia,nij,jb->nab", w.conj(), g, w, optimize=True)
        t = t.reshape(g.shape[0], b.m, b.d, b.m, b.d)
        r = np.einsum("natbt->nab", t)
        if real:
            r = np.real(r)
        out.append(r.reshape(g.shape[0], -1))
    return out


@dataclass
class ReducedContext:
    bd: BlockDiagonalizer
    twist: Twist | None
    action: TensorAction
    families: list[Family]
    y_blocks: dict = field(default_factory=dict)   # family name -> (first block index, BlockDiagonalizer)
    seconds: float = 0.0


def build_reduced(hp: HierarchyProblem, mode: str, seed: int = 2024, chunk: int = 64,
                  check: bool = True) -> tuple[SdpProblem, ReducedContext]:
    """Symmetry-adapted problem: the variable is restricted to the commutant of the chosen action."""
    t0 = time.perf_counter()
    pos = hp.positions
    action, twist = symmetry_action(pos, mode)
    swaps = pos.n > 1 and not any(_moves_copies(g, pos) for g in action.group.generators)
    fams = families(hp, twist, include_swaps=swaps)
    real = _is_real(hp)
    c = objective(hp)
    if twist is not None:
        k = twist.operator(pos)
        c = k @ c @ k.T
    rng = np.random.default_rng(seed)
    cscale = float(np.max(np.abs(c)))
    if check:
        err = action.check_invariant(c, rng)
        if err > 1e-9 * max(1.0, cscale):
            raise SymmetryError(f"objective is not invariant under the {mode} symmetry (deviation {err:.2e})")
    cache: dict = {}
    bd = _bd_for(action, pos.dim, seed, cache)
    blocks = list(bd.sizes)
    objs = [np.real(x) if real else x for x in bd.reduce(c)]
    objs = [(x + x.conj().T) / 2 for x in objs]
    main_rows: list[list[np.ndarray]] = [[] for _ in bd.blocks]
    y_rows: dict = {}
    rhs_all = []
    ctx = ReducedContext(bd, twist, action, fams)
    for fam in fams:
        if fam.slaved and len(fam.keep) == pos.count:
            tgt = _cut_action(action, pos, fam.cut)
        else:
            tgt = _restricted(action, fam.keep)
        if check:
            _check_equivariant(fam, action, tgt, rng, cscale)
        tbd = _bd_for(tgt, fam.lmap.d_out, seed, cache)
        w_blocks = [tbd.copy(k, 0) for k in range(len(tbd.blocks))]
        hs, rhs, where = _row_data(fam, w_blocks, real)
        if not hs:
            continue
        mh = fam.lmap.matrix().conj().T.tocsr()
        d = pos.dim
        red = [[] for _ in bd.blocks]
        for s in range(0, len(hs), chunk):
            hh = np.array([h.reshape(-1) for h in hs[s:s + chunk]])
            g = np.asarray(mh @ hh.T).T.reshape(-1, d, d)
            if real:
                g = np.real(g)
            for k, r in enumerate(_reduce_batch(bd, g, real)):
                red[k].append(r)
        red = [np.vstack(r) for r in red]
        nr = len(hs)
        if fam.slaved:
            first = len(blocks)
            ctx.y_blocks[fam.name] = (first, tbd)
            for k in range(len(bd.blocks)):
                main_rows[k].append(-red[k])
            sizes = [b.m for b in tbd.blocks]
            for nu, m in enumerate(sizes):
                blocks.append(m)
                objs.append(np.zeros((m, m)))
            sel = [np.zeros((nr, m * m), dtype=float if real else complex) for m in sizes]
            for row, (nu, p, q, ph) in enumerate(where):
                m = sizes[nu]
                e = np.zeros((m, m), dtype=sel[nu].dtype)
                e[p, q] = ph
                e = (e + e.conj().T) / 2
                sel[nu][row] = e.reshape(-1)
            y_rows[first] = (len(rhs_all), sel)
        else:
            for k in range(len(bd.blocks)):
                main_rows[k].append(red[k])
        rhs_all.append(rhs)
    b = np.concatenate(rhs_all)
    m_total = b.size
    mats = [sp.csr_matrix(np.vstack(r)) for r in main_rows]
    # slaved blocks occupy only their own family's rows
    offsets = np.cumsum([0] + [len(r) for r in rhs_all])
    for first, (fi, sel) in sorted(y_rows.items()):
        lo, hi = offsets[fi], offsets[fi + 1]
        for nu, s in enumerate(sel):
            full = sp.lil_matrix((m_total, s.shape[1]), dtype=s.dtype)
            full[lo:hi] = s
            mats.append(full.tocsr())
    p = SdpProblem(tuple(blocks), objs, mats, b, name=f"level{hp.level}/{mode}").hermitized()
    p.meta.update({"level": hp.level, "flags": hp.flags(), "families": [f.name for f in fams], "reduced": True,
                   "symmetry": mode, "reduction": bd.summary()})
    ctx.seconds = time.perf_counter() - t0
    return p, ctx


def _moves_copies(g, pos: Positions) -> bool:
    return any(g[pos.lb(k)] != pos.lb(k) for k in range(1, pos.n + 1))


def lift_primal(sol: SdpSolution, ctx: ReducedContext, pos: Positions) -> np.ndarray:
    rho = ctx.bd.lift(sol.primal[:len(ctx.bd.blocks)])
    if ctx.twist is not None:
        k = ctx.twist.operator(pos)
        rho = k.T @ rho @ k
    return rho


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

@dataclass
class OuterBoundResult:
    value: float
    level: int
    flags: dict
    solver_gap: float
    primal_state: Op | None
    status: Status = Status.OPTIMAL
    dual_value: float = float("nan")
    symmetry: str = "none"
    seconds: float = 0.0
    residual: float = float("nan")
    sdp: dict = field(default_factory=dict)


def applicable_mode(hp: HierarchyProblem, seed: int = 2024) -> str:
    """Strongest symmetry mode under which the level-1 objective is invariant."""
    pos1 = Positions(hp.d_l, hp.p_dims, 1)
    hp1 = HierarchyProblem(hp.noise, hp.d_l, 1)
    c = objective(hp1)
    rng = np.random.default_rng(seed)
    for mode in ("full", "combined", "iid", "ext"):
        try:
            action, twist = symmetry_action(pos1, mode)
        except ValueError:
            continue
        cc = c if twist is None else twist.operator(pos1) @ c @ twist.operator(pos1).T
        if action.check_invariant(cc, rng) <= 1e-9 * max(1.0, float(np.max(np.abs(cc)))):
            if mode == "ext" and hp.level == 1:
                return "none"
            return mode
    return "none"


def _marker_ready(hp: HierarchyProblem) -> bool:
    return hp.d_l == 2 and all(d == 2 for d in hp.p_dims)


def solve_outer(hp: HierarchyProblem, symmetry: str = "auto", tol: float = 1e-8, seed: int = 2024,
                options: SolverOptions | None = None, keep_state: bool = True) -> OuterBoundResult:
    t0 = time.perf_counter()
    mode = applicable_mode(hp, seed) if symmetry == "auto" else symmetry
    pos = hp.positions
    if mode == "none":
        prob = build_unreduced(hp)
        sol = solve(prob, tol=tol, options=options)
        rho = sol.primal[0]
        fams = families(hp)
    elif mode == "full" and _marker_ready(hp):
        from .markers import build_marker_reduced, lift_marker_primal
        prob, red = build_marker_reduced(hp, seed)
        sol = solve(prob, tol=tol, options=options)
        rho = lift_marker_primal(sol, red, pos) if sol.primal else None
        fams = families(hp)
    else:
        prob, ctx = build_reduced(hp, mode, seed)
        sol = solve(prob, tol=tol, options=options)
        rho = lift_primal(sol, ctx, pos) if sol.primal else None
        fams = families(hp)
    residual = float("nan")
    state = None
    if rho is not None and sol.status in (Status.OPTIMAL, Status.INACCURATE):
        residual = max(f.residual(rho) for f in fams)
        if keep_state:
            state = Op(pos.layout(), rho)
    return OuterBoundResult(sol.primal_value, hp.level, hp.flags(), sol.gap, state, sol.status, sol.dual_value,
                            mode, time.perf_counter() - t0, residual, prob.summary())


# ---------------------------------------------------------------------------
# separable but not product: the counterexample fixture
# ---------------------------------------------------------------------------

def counterexample_weight(gamma: np.ndarray, b: float) -> float:
    gamma = np.asarray(gamma)
    if gamma.shape[0] != gamma.shape[1] or np.max(np.abs(gamma - gamma.conj().T)) > 1e-12:
        raise ValueError("Γ must be a hermitian matrix")
    w = np.linalg.eigvalsh(gamma)
    lo, hi = w[0], w[-1]
    if not lo < b < hi:
        raise ValueError(f"b = {b} must lie strictly between λ_min = {lo} and λ_max = {hi}")
    return float((hi - b) / (hi - lo))


def counterexample_state(gamma: np.ndarray, b: float) -> Op:
    """ρ_AB = p P_min ⊗ |0⟩⟨0| + (1−p) P_max ⊗ |1⟩⟨1| with tr[Γ ρ_A] = b."""
    gamma = np.asarray(gamma)
    p = counterexample_weight(gamma, b)
    w, v = np.linalg.eigh(gamma)
    pmin = np.outer(v[:, 0], v[:, 0].conj())
    pmax = np.outer(v[:, -1], v[:, -1].conj())
    q1, q2 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    rho = p * np.kron(pmin, q1) + (1 - p) * np.kron(pmax, q2)
    return Op(SystemLayout((("A", gamma.shape[0]), ("B", 2))), rho, True)
