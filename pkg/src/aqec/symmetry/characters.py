"""Character tables of symmetric groups and their direct products.

S2, S3 and S4 are stored as constants; larger symmetric groups are computed
with the Murnaghan–Nakayama rule.  Classes of S_k are cycle types (partitions).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, prod
from typing import Callable, Sequence

import numpy as np

from .groups import Perm, cycle_type, cycles_of

Partition = tuple[int, ...]


def partitions(n: int, max_part: int | None = None) -> list[Partition]:
    max_part = n if max_part is None else max_part
    if n == 0:
        return [()]
    out = []
    for k in range(min(n, max_part), 0, -1):
        out += [(k,) + rest for rest in partitions(n - k, k)]
    return out


def class_size(mu: Partition) -> int:
    n = sum(mu)
    z = 1
    for k, grp in itertools.groupby(mu):
        c = len(list(grp))
        z *= k ** c * factorial(c)
    return factorial(n) // z


def _rim_hooks(shape: Partition, k: int):
    """Yield (smaller shape, height) for every border strip of size k removable from ``shape``."""
    # beta-set (first-column hook lengths) representation
    n = len(shape)
    beta = [shape[i] + (n - 1 - i) for i in range(n)]
    bset = set(beta)
    for b in beta:
        if b - k >= 0 and (b - k) not in bset:
            height = sum(1 for c in beta if b - k < c < b)
            new = sorted((c if c != b else b - k for c in beta), reverse=True)
            m = len(new)
            lam = tuple(new[i] - (m - 1 - i) for i in range(m))
            yield tuple(x for x in lam if x > 0), height


@lru_cache(maxsize=None)
def mn_character(shape: Partition, mu: Partition) -> int:
    """χ^shape(mu) by the Murnaghan–Nakayama rule."""
    if not mu:
        return 1 if sum(shape) == 0 else 0
    k, rest = mu[0], mu[1:]
    return sum((-1) ** h * mn_character(sm, rest) for sm, h in _rim_hooks(shape, k))


@dataclass(frozen=True)
class CharacterTable:
    label: str
    classes: tuple            # class keys
    class_sizes: tuple[int, ...]
    irreps: tuple             # irrep labels
    values: np.ndarray        # irreps × classes
    classify: Callable = None  # group element -> class key

    @property
    def order(self) -> int:
        return sum(self.class_sizes)

    def dims(self) -> dict:
        # only the identity column reaches sum_λ χ_λ(g) = sum_λ dim λ
        ident = int(np.argmax(np.sum(self.values, axis=0)))
        return {lab: int(round(self.values[i, ident])) for i, lab in enumerate(self.irreps)}

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        w = np.array(self.class_sizes, dtype=float)
        return float(np.sum(w * f * np.conj(g)).real / self.order)

    def orthogonality_error(self) -> float:
        k = len(self.irreps)
        gram = np.array([[self.inner(self.values[i], self.values[j]) for j in range(k)] for i in range(k)])
        return float(np.max(np.abs(gram - np.eye(k))))


def _sym_classify(p: Perm) -> Partition:
    return cycle_type(p)


_S2 = {(2,): {(2,): 1, (1, 1): 1}, (1, 1): {(2,): -1, (1, 1): 1}}


@lru_cache(maxsize=None)
def symmetric_table(n: int) -> CharacterTable:
    """Character table of S_n; irreps labelled by partitions, classes by cycle types."""
    classes = tuple(sorted(partitions(n), reverse=True))
    irreps = tuple(partitions(n))
    if n <= 4:
        vals = np.array([[_SMALL[n][lam][mu] for mu in classes] for lam in irreps], dtype=float)
    else:
        vals = np.array([[mn_character(lam, mu) for mu in classes] for lam in irreps], dtype=float)
    return CharacterTable(f"S{n}", classes, tuple(class_size(mu) for mu in classes), irreps, vals, _sym_classify)


# built-in constants, rows by irrep (partition), columns by cycle type
_SMALL = {
    1: {(1,): {(1,): 1}},
    2: _S2,
    3: {
        (3,): {(1, 1, 1): 1, (2, 1): 1, (3,): 1},
        (2, 1): {(1, 1, 1): 2, (2, 1): 0, (3,): -1},
        (1, 1, 1): {(1, 1, 1): 1, (2, 1): -1, (3,): 1},
    },
    4: {
        (4,): {(1, 1, 1, 1): 1, (2, 1, 1): 1, (2, 2): 1, (3, 1): 1, (4,): 1},
        (3, 1): {(1, 1, 1, 1): 3, (2, 1, 1): 1, (2, 2): -1, (3, 1): 0, (4,): -1},
        (2, 2): {(1, 1, 1, 1): 2, (2, 1, 1): 0, (2, 2): 2, (3, 1): -1, (4,): 0},
        (2, 1, 1): {(1, 1, 1, 1): 3, (2, 1, 1): -1, (2, 2): -1, (3, 1): 0, (4,): 1},
        (1, 1, 1, 1): {(1, 1, 1, 1): 1, (2, 1, 1): -1, (2, 2): 1, (3, 1): 1, (4,): -1},
    },
}


def product_table(*tables: CharacterTable) -> CharacterTable:
    """Direct product; elements are tuples with one entry per factor."""
    classes = tuple(itertools.product(*(t.classes for t in tables)))
    sizes = tuple(prod(t.class_sizes[t.classes.index(c)] for t, c in zip(tables, cl)) for cl in classes)
    irreps = tuple(itertools.product(*(t.irreps for t in tables)))
    vals = np.empty((len(irreps), len(classes)))
    for i, lam in enumerate(irreps):
        for j, cl in enumerate(classes):
            vals[i, j] = prod(t.values[t.irreps.index(l), t.classes.index(c)] for t, l, c in zip(tables, lam, cl))
    classifiers = [t.classify for t in tables]

    def classify(g):
        return tuple(f(x) for f, x in zip(classifiers, g))

    return CharacterTable(" x ".join(t.label for t in tables), classes, sizes, irreps, vals, classify)


# ---------------------------------------------------------------------------
# permutation actions on tensor factors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorAction:
    """An abstract group (listed elements) acting by permutations of tensor positions."""
    local_dims: tuple[int, ...]
    elements: tuple            # abstract group elements (as understood by the table's classifier)
    to_positions: Callable     # abstract element -> position permutation

    def character(self, g) -> int:
        p = self.to_positions(g)
        return prod(self.local_dims[c[0]] for c in cycles_of(p))


def symmetric_product_elements(*degrees: int) -> list[tuple[Perm, ...]]:
    return list(itertools.product(*(list(itertools.permutations(range(d))) for d in degrees)))


class MultiplicityError(ValueError):
    pass


def multiplicities_by_characters(action: FactorAction, table: CharacterTable, tol: float = 1e-9) -> dict:
    """m_λ = <χ_action, χ_λ> with χ_action(g) = Π over cycles of the local dimension."""
    by_class: dict = {}
    for g in action.elements:
        key = table.classify(g)
        by_class.setdefault(key, []).append(action.character(g))
    chi = np.zeros(len(table.classes))
    for j, cl in enumerate(table.classes):
        vals = by_class.get(cl)
        if vals is None:
            raise MultiplicityError(f"class {cl} has no element in the action")
        if len(set(vals)) != 1:
            raise MultiplicityError(f"action character is not a class function on {cl}")
        chi[j] = vals[0]
    if len(action.elements) != table.order:
        raise MultiplicityError(f"action lists {len(action.elements)} elements, table order is {table.order}")
    out = {}
    for i, lam in enumerate(table.irreps):
        m = table.inner(chi, table.values[i])
        if abs(m - round(m)) > tol or round(m) < 0:
            raise MultiplicityError(f"non-integer multiplicity {m} for {lam}")
        out[lam] = int(round(m))
    dims = table.dims()
    total = prod(action.local_dims)
    if sum(out[l] * dims[l] for l in out) != total:
        raise MultiplicityError("multiplicities do not add up to the dimension")
    return out


def grid_action(m: int, n: int, local_dim: int = 2) -> FactorAction:
    """S_m × S_n on the m×(n+1) grid: rows permute in every column, extension columns permute.

    This is the commuting (iid acting on all columns) form of the two symmetries.
    """
    from .groups import grid_position

    def to_pos(g):
        rows, cols = g
        p = [0] * (m * (n + 1))
        for r in range(m):
            for c in range(n + 1):
                c2 = 0 if c == 0 else 1 + cols[c - 1]
                p[grid_position(r, c, n)] = grid_position(rows[r], c2, n)
        return tuple(p)

    return FactorAction((local_dim,) * (m * (n + 1)), tuple(symmetric_product_elements(m, n)), to_pos)


def copies_action(copy_dim: int, n: int, base_dim: int = 1) -> FactorAction:
    """S_n permuting n identical copies after a fixed base factor."""
    dims = ((base_dim,) if base_dim > 1 else ()) + (copy_dim,) * n
    off = 1 if base_dim > 1 else 0

    def to_pos(g):
        (p,) = g
        return tuple(range(off)) + tuple(off + p[i] for i in range(n))

    return FactorAction(dims, tuple(symmetric_product_elements(n)), to_pos)


def unitary_sector_multiplicities(k: int, d: int = 2) -> dict:
    """Multiplicity of each U(d) irrep (partition with ≤ d rows) in (C^d)^{⊗k}.

    By Schur–Weyl duality this equals the dimension of the matching S_k irrep.
    """
    t = symmetric_table(k)
    dims = t.dims()
    return {lam: dims[lam] for lam in t.irreps if len(lam) <= d}


def weyl_dimension(lam: Partition, d: int) -> int:
    lam = tuple(lam) + (0,) * (d - len(lam))
    num = Fraction(1)
    for i in range(d):
        for j in range(i + 1, d):
            num *= Fraction(lam[i] - lam[j] + j - i, j - i)
    return int(num)


def combined_multiplicities(m: int, n: int, local_dim: int = 2) -> dict:
    """Block sizes for S_m × S_n on the P grid together with U(2) on (L, L̄^(1..n)).

    The multiplicity space of the U(2) irrep μ in (C²)^{⊗(n+1)} carries the S_{n+1}
    irrep μ, on which S_n (the barred copies) acts by restriction.  Keys are
    (α, β, μ) with α ⊢ m, β ⊢ n, μ ⊢ n+1 with at most two rows.
    """
    grid = grid_action(m, n, local_dim)
    tm, tn, tk = symmetric_table(m), symmetric_table(n), symmetric_table(n + 1)
    table = product_table(tm, tn)
    out = {}
    for mu in tk.irreps:
        if len(mu) > 2:
            continue
        row = tk.values[tk.irreps.index(mu)]
        act = FactorAction(grid.local_dims, grid.elements, grid.to_positions)
        chi = {}
        for g in act.elements:
            rows, cols = g
            ext = cycle_type(tuple(cols) + (n,))  # fixed point for L
            key = table.classify(g)
            chi.setdefault(key, set()).add(act.character(g) * row[tk.classes.index(ext)])
        vec = np.array([next(iter(chi[c])) for c in table.classes])
        for i, lab in enumerate(table.irreps):
            val = table.inner(vec, table.values[i])
            if abs(val - round(val)) > 1e-9:
                raise MultiplicityError(f"non-integer multiplicity {val}")
            if round(val):
                out[lab + (mu,)] = int(round(val))
    return out
