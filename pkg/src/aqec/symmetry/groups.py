"""Finite permutation groups acting on tensor positions.

Permutations are tuples ``p`` with ``p[i]`` the image of position ``i``
(0-based).  Products compose right to left: ``mul(p, q)[i] = p[q[i]]``.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from math import factorial
from typing import Iterable, Sequence

import numpy as np

ORDER_GUARD = 10 ** 7

Perm = tuple[int, ...]


def identity_perm(n: int) -> Perm:
    return tuple(range(n))


def mul(p: Perm, q: Perm) -> Perm:
    return tuple(p[i] for i in q)


def inverse(p: Perm) -> Perm:
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


def from_cycles(degree: int, cycles: Iterable[Sequence[int]], one_based: bool = True) -> Perm:
    """Permutation from disjoint cycles, e.g. ``[(1, 4), (2, 5)]``."""
    p = list(range(degree))
    off = 1 if one_based else 0
    for cyc in cycles:
        c = [x - off for x in cyc]
        for a, b in zip(c, c[1:] + c[:1]):
            p[a] = b
    return tuple(p)


def cycles_of(p: Perm) -> list[tuple[int, ...]]:
    seen = [False] * len(p)
    out = []
    for i in range(len(p)):
        if not seen[i]:
            cyc = []
            j = i
            while not seen[j]:
                seen[j] = True
                cyc.append(j)
                j = p[j]
            out.append(tuple(cyc))
    return out


def cycle_type(p: Perm) -> tuple[int, ...]:
    return tuple(sorted((len(c) for c in cycles_of(p)), reverse=True))


def sign(p: Perm) -> int:
    return -1 if sum(len(c) - 1 for c in cycles_of(p)) % 2 else 1


def is_permutation(p: Sequence[int], degree: int) -> bool:
    return len(p) == degree and sorted(p) == list(range(degree))


class GroupTooLarge(RuntimeError):
    pass


@dataclass
class PermGroup:
    degree: int
    generators: tuple[Perm, ...]
    guard: int = ORDER_GUARD
    _elements: list[Perm] | None = field(default=None, repr=False)

    def __post_init__(self):
        gens = []
        for g in self.generators:
            g = tuple(int(x) for x in g)
            if not is_permutation(g, self.degree):
                raise ValueError(f"{g} is not a permutation of {self.degree} points")
            gens.append(g)
        self.generators = tuple(gens)

    @property
    def elements(self) -> list[Perm]:
        if self._elements is None:
            self._elements = _closure(self.degree, self.generators, self.guard)
        return self._elements

    @property
    def order(self) -> int:
        return len(self.elements)

    def __contains__(self, p: Perm) -> bool:
        return tuple(p) in self.element_set

    @property
    def element_set(self) -> frozenset[Perm]:
        if not hasattr(self, "_set"):
            self._set = frozenset(self.elements)
        return self._set

    def as_array(self) -> np.ndarray:
        return np.array(self.elements, dtype=np.int64).reshape(-1, self.degree)

    def stabilizer(self, subset: Iterable[int]) -> "PermGroup":
        """Setwise stabilizer, enumerated."""
        s = set(subset)
        els = [g for g in self.elements if {g[i] for i in s} == s]
        return PermGroup(self.degree, tuple(els), self.guard, _elements=els)

    def restrict(self, positions: Sequence[int]) -> "PermGroup":
        """Action on ``positions`` (which must be invariant), relabelled 0..k-1."""
        pos = list(positions)
        index = {p: i for i, p in enumerate(pos)}
        imgs = set()
        for g in self.elements:
            try:
                imgs.add(tuple(index[g[p]] for p in pos))
            except KeyError:
                raise ValueError("positions are not invariant under the group") from None
        els = sorted(imgs)
        return PermGroup(len(pos), tuple(els), self.guard, _elements=els)


def _closure(degree: int, gens: Sequence[Perm], guard: int) -> list[Perm]:
    e = identity_perm(degree)
    seen = {e}
    order = [e]
    queue = deque([e])
    while queue:
        g = queue.popleft()
        for s in gens:
            h = mul(s, g)
            if h not in seen:
                seen.add(h)
                order.append(h)
                queue.append(h)
                if len(seen) > guard:
                    raise GroupTooLarge(
                        f"group order exceeds {guard}; work with generators only (e.g. adjacent "
                        "transpositions) instead of enumerating elements")
    return order


def group_from_generators(degree: int, gens: Iterable[Sequence[int]], guard: int = ORDER_GUARD) -> PermGroup:
    g = PermGroup(degree, tuple(tuple(x) for x in gens), guard)
    g.elements  # enumerate now so guard errors surface here
    return g


def symmetric_group(degree: int, points: Sequence[int] | None = None, total: int | None = None) -> PermGroup:
    """Full symmetric group on ``points`` (default all), as a subgroup of Sym(total)."""
    total = degree if total is None else total
    pts = list(range(degree)) if points is None else list(points)
    gens = []
    for a, b in zip(pts, pts[1:]):
        p = list(range(total))
        p[a], p[b] = b, a
        gens.append(tuple(p))
    return PermGroup(total, tuple(gens))


# ---------------------------------------------------------------------------
# combining two symmetry groups
# ---------------------------------------------------------------------------

class Verdict(str, enum.Enum):
    JOINT = "JOINT"
    NOT_JOINT = "NOT_JOINT"


@dataclass(frozen=True)
class JointSymmetry:
    is_group: bool
    product_order: int
    closure_order: int
    order_u: int
    order_v: int
    intersection_order: int
    verdict: Verdict

    @property
    def product_formula_holds(self) -> bool:
        return self.closure_order * self.intersection_order == self.order_u * self.order_v


def joint_symmetry_check(u: PermGroup, v: PermGroup) -> JointSymmetry:
    """Decide whether the product set UV is a group."""
    if u.degree != v.degree:
        raise ValueError("groups act on different numbers of points")
    uv = {mul(a, b) for a in u.elements for b in v.elements}
    vu = {mul(b, a) for a in u.elements for b in v.elements}
    closure = PermGroup(u.degree, u.generators + v.generators)
    inter = len(u.element_set & v.element_set)
    is_group = uv == vu
    ok = is_group and closure.order * inter == u.order * v.order
    return JointSymmetry(is_group, len(uv), closure.order, u.order, v.order, inter,
                         Verdict.JOINT if ok else Verdict.NOT_JOINT)


def global_group_order(m: int, n: int) -> int:
    """Order of the group generated by iid and extension permutations on the m×(n+1) grid."""
    if m < 2 or n < 1:
        raise ValueError("need m >= 2 and n >= 1")
    return factorial(m) // 2 * factorial(m) ** n * factorial(n)


def grid_position(row: int, col: int, n: int) -> int:
    """Row-wise numbering of the m×(n+1) grid; column 0 holds the unbarred P systems."""
    return row * (n + 1) + col


def grid_iid_group(m: int, n: int) -> PermGroup:
    """Rows permuted in parallel in the P column and the first extension column."""
    deg = m * (n + 1)
    gens = []
    for r in range(m - 1):
        p = list(range(deg))
        for col in (0, 1):
            a, b = grid_position(r, col, n), grid_position(r + 1, col, n)
            p[a], p[b] = b, a
        gens.append(tuple(p))
    return PermGroup(deg, tuple(gens))


def grid_extension_group(m: int, n: int) -> PermGroup:
    """Extension columns 1..n permuted as wholes."""
    deg = m * (n + 1)
    gens = []
    for c in range(1, n):
        p = list(range(deg))
        for r in range(m):
            a, b = grid_position(r, c, n), grid_position(r, c + 1, n)
            p[a], p[b] = b, a
        gens.append(tuple(p))
    return PermGroup(deg, tuple(gens))


def grid_global_group(m: int, n: int) -> PermGroup:
    u, v = grid_iid_group(m, n), grid_extension_group(m, n)
    return PermGroup(u.degree, u.generators + v.generators)


@dataclass(frozen=True)
class ExtensionStructure:
    order: int
    image_order: int
    kernel_order: int
    kernel_all_even: bool
    expected_order: int


def extension_structure(m: int, n: int) -> ExtensionStructure:
    """Restriction of the grid group to the extension columns: image and kernel."""
    g = grid_global_group(m, n)
    cols = [grid_position(r, c, n) for r in range(m) for c in range(1, n + 1)]
    unbarred = [grid_position(r, 0, n) for r in range(m)]
    images = set()
    kernel = []
    for p in g.elements:
        img = tuple(p[i] for i in cols)
        images.add(img)
        if img == tuple(cols):
            kernel.append(p)
    index = {q: i for i, q in enumerate(unbarred)}
    even = all(sign(tuple(index[p[q]] for q in unbarred)) == 1 for p in kernel)
    return ExtensionStructure(g.order, len(images), len(kernel), even, global_group_order(m, n))
