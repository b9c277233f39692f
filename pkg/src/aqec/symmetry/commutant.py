"""Group actions on tensor positions and bases of their commutants.

A :class:`TensorAction` combines a finite permutation group on positions with
optional *unitary markers*: sets of equal-dimension positions on which
``U^{⊗k}`` acts for every unitary U.  The finite group must map markers onto
markers, so the full symmetry is a semidirect product and its commutant is the
group twirl of ``⊗_markers span(permutations) ⊗ End(unmarked)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial, prod
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..qcore import permute_array, random_unitary
from .groups import PermGroup, inverse

MAX_PERMS = 720
SAMPLED_PERMS = 200


def position_order(g: Sequence[int]) -> tuple[int, ...]:
    """``order`` argument of permute_array that moves the factor at i to g[i]."""
    return inverse(tuple(g))


def basis_permutation(dims: Sequence[int], g: Sequence[int]) -> np.ndarray:
    """Index map s with (P_g)[r, s[r]] = 1 for the factor permutation g."""
    n = prod(dims)
    order = position_order(g)
    return np.arange(n).reshape(dims).transpose(order).ravel()


def permutation_operator(dims: Sequence[int], g: Sequence[int]) -> sp.csr_matrix:
    s = basis_permutation(dims, g)
    n = s.size
    return sp.csr_matrix((np.ones(n), (np.arange(n), s)), shape=(n, n))


@dataclass
class TensorAction:
    local_dims: tuple[int, ...]
    group: PermGroup
    markers: tuple[tuple[int, ...], ...] = ()
    name: str = ""

    def __post_init__(self):
        self.local_dims = tuple(int(d) for d in self.local_dims)
        self.markers = tuple(tuple(sorted(m)) for m in self.markers if len(m))
        if self.group.degree != len(self.local_dims):
            raise ValueError("group degree must equal the number of positions")
        for g in self.group.generators:
            for i, j in enumerate(g):
                if self.local_dims[i] != self.local_dims[j]:
                    raise ValueError(f"generator {g} maps positions of different dimension")
            mset = {frozenset(m) for m in self.markers}
            for m in self.markers:
                if frozenset(g[i] for i in m) not in mset:
                    raise ValueError(f"generator {g} does not map markers onto markers")
        seen = set()
        for m in self.markers:
            if seen & set(m):
                raise ValueError("markers must be disjoint")
            seen |= set(m)
            if len({self.local_dims[i] for i in m}) != 1:
                raise ValueError("marker positions must share one dimension")

    @property
    def dim(self) -> int:
        return prod(self.local_dims)

    @property
    def unmarked(self) -> tuple[int, ...]:
        used = {i for m in self.markers for i in m}
        return tuple(i for i in range(len(self.local_dims)) if i not in used)

    def conjugate(self, x: np.ndarray, g: Sequence[int]) -> np.ndarray:
        """``P_g x P_g†``."""
        return permute_array(x, self.local_dims, position_order(g))

    def twirl(self, x: np.ndarray) -> np.ndarray:
        els = self.group.elements
        out = np.zeros_like(x)
        for g in els:
            out += self.conjugate(x, g)
        return out / len(els)

    def restrict(self, keep: Sequence[int]) -> "TensorAction":
        """Action on the kept positions by the setwise stabilizer of ``keep``."""
        keep = sorted(keep)
        stab = self.group.stabilizer(keep).restrict(keep)
        index = {p: i for i, p in enumerate(keep)}
        markers = tuple(tuple(index[i] for i in m if i in index) for m in self.markers)
        return TensorAction(tuple(self.local_dims[i] for i in keep), stab, markers, self.name)

    def permuted(self, order: Sequence[int]) -> "TensorAction":
        """Same action after relabelling: new position j is old position order[j]."""
        where = {old: new for new, old in enumerate(order)}
        gens = []
        for g in self.group.elements:
            gens.append(tuple(where[g[order[j]]] for j in range(len(order))))
        grp = PermGroup(len(order), tuple(gens), _elements=sorted(set(gens)))
        markers = tuple(tuple(where[i] for i in m) for m in self.markers)
        return TensorAction(tuple(self.local_dims[i] for i in order), grp, markers, self.name)

    def sample_unitary(self, rng: np.random.Generator) -> np.ndarray:
        """A random element of the represented group as a dense matrix."""
        els = self.group.elements
        g = els[rng.integers(len(els))]
        u = self._marker_product(lambda m: _kron_power(random_unitary(self.local_dims[m[0]], rng), len(m)),
                                 lambda d: np.eye(d))
        return permutation_operator(self.local_dims, g) @ u

    def _marker_product(self, marker_op, rest_op) -> np.ndarray:
        groups = list(self.markers)
        ops = [marker_op(m) for m in groups]
        rest = self.unmarked
        if rest:
            groups.append(rest)
            ops.append(rest_op(prod(self.local_dims[i] for i in rest)))
        flat = [i for grp in groups for i in grp]
        x = ops[0]
        for o in ops[1:]:
            x = np.kron(x, o)
        dims = [self.local_dims[i] for i in flat]
        order = [flat.index(j) for j in range(len(self.local_dims))]
        return permute_array(x, dims, order)

    def random_element(self, rng: np.random.Generator, terms: int = 3) -> np.ndarray:
        """Random real symmetric element of the commutant."""
        total = None
        for _ in range(terms):
            x = self._marker_product(lambda m: _random_perm_combination(self.local_dims[m[0]], len(m), rng),
                                     lambda d: _sym(rng.standard_normal((d, d))))
            total = x if total is None else total + x
        return _sym(self.twirl(total))

    def check_invariant(self, x: np.ndarray, rng: np.random.Generator | None = None, samples: int = 2) -> float:
        """Largest ‖U x U† − x‖_max over generators (and random unitaries if markers exist)."""
        err = 0.0
        for g in self.group.generators:
            err = max(err, float(np.max(np.abs(self.conjugate(x, g) - x), initial=0)))
        if self.markers:
            rng = rng or np.random.default_rng(0)
            for _ in range(samples):
                u = self.sample_unitary(rng)
                err = max(err, float(np.max(np.abs(u @ x @ u.conj().T - x))))
        return err


def _sym(x: np.ndarray) -> np.ndarray:
    return (x + x.conj().T) / 2


def _kron_power(u: np.ndarray, k: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=u.dtype)
    for _ in range(k):
        out = np.kron(out, u)
    return out


def _random_perm_combination(d: int, k: int, rng: np.random.Generator) -> np.ndarray:
    dims = (d,) * k
    if factorial(k) <= MAX_PERMS:
        perms = list(itertools.permutations(range(k)))
    else:
        perms = [tuple(rng.permutation(k)) for _ in range(SAMPLED_PERMS)]
    out = np.zeros((d ** k, d ** k))
    for p in perms:
        out += rng.standard_normal() * permutation_operator(dims, p).toarray()
    return out


# ---------------------------------------------------------------------------
# explicit commutant bases
# ---------------------------------------------------------------------------

@dataclass
class CommutantBasis:
    """Basis of a commutant, either as explicit operators or as orbit labels."""
    dim_space: int
    labels: np.ndarray | None = None          # orbit id per matrix unit (row-major), orbit bases only
    operators: list | None = None              # explicit operators otherwise
    action: TensorAction | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        if self.labels is not None:
            return int(self.labels.max()) + 1
        return len(self.operators)

    @property
    def basis(self) -> list[sp.csr_matrix]:
        if self.operators is None:
            d = self.dim_space
            order = np.argsort(self.labels, kind="stable")
            cuts = np.searchsorted(self.labels[order], np.arange(self.dimension + 1))
            ops = []
            for k in range(self.dimension):
                idx = order[cuts[k]:cuts[k + 1]]
                r, c = np.divmod(idx, d)
                ops.append(sp.csr_matrix((np.ones(idx.size), (r, c)), shape=(d, d)))
            self.operators = ops
        return self.operators

    def random_element(self, rng: np.random.Generator, terms: int = 1) -> np.ndarray:
        if self.labels is not None:
            c = rng.standard_normal(self.dimension)
            x = c[self.labels].reshape(self.dim_space, self.dim_space)
        else:
            c = rng.standard_normal(len(self.operators))
            x = sum(ci * (o.toarray() if sp.issparse(o) else o) for ci, o in zip(c, self.operators))
        return _sym(np.real(x) if np.isrealobj(x) else x)


class OrbitGuardError(RuntimeError):
    pass


def commutant_orbit_basis(action: TensorAction, guard: float = 2e9) -> CommutantBasis:
    """One 0/1 operator per orbit of matrix-unit index pairs under the finite group."""
    if action.markers:
        raise ValueError("orbit bases cover finite groups only; unitary markers need schur_weyl_commutant")
    d = action.dim
    els = action.group.elements
    if float(d) ** 2 * len(els) > guard:
        raise OrbitGuardError(
            f"{d}² index pairs × {len(els)} group elements exceeds the guard; reduce per tensor sector "
            "(block strategy) instead of materializing the full commutant")
    pairs = np.arange(d * d, dtype=np.int64)
    i, j = np.divmod(pairs, d)
    canon = pairs.copy()
    for g in els:
        s = np.argsort(basis_permutation(action.local_dims, g))  # image of each basis index
        np.minimum(canon, s[i] * d + s[j], out=canon)
    _, labels = np.unique(canon, return_inverse=True)
    return CommutantBasis(d, labels=labels.astype(np.int64), action=action, meta={"kind": "orbit"})


def schur_weyl_commutant(positions: Sequence[int], local_dim: int, k: int | None = None) -> CommutantBasis:
    """Commutant of U^{⊗k} on k positions: a linearly independent set of permutation operators."""
    k = len(positions) if k is None else k
    if len(positions) != k:
        raise ValueError("marker must cover exactly k positions")
    dims = (local_dim,) * k
    ops, vecs, kept = [], [], []
    for p in itertools.permutations(range(k)):
        op = permutation_operator(dims, p)
        v = op.toarray().ravel()
        trial = np.array(vecs + [v])
        if np.linalg.matrix_rank(trial, tol=1e-9) == len(trial):
            vecs.append(v)
            ops.append(op)
            kept.append(p)
    return CommutantBasis(local_dim ** k, operators=ops, meta={"kind": "schur-weyl", "perms": kept,
                                                               "positions": tuple(positions)})
