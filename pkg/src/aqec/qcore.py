"""Linear algebra over labeled tensor factors.

Every operator carries a :class:`SystemLayout`; multi-indices are row-major
over the layout, so the leftmost system is the slowest index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

PSD_TOL = 1e-10
HERM_TOL = 1e-12


@dataclass(frozen=True)
class SystemLayout:
    systems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        systems = tuple((str(lab), int(d)) for lab, d in self.systems)
        object.__setattr__(self, "systems", systems)
        labels = [lab for lab, _ in systems]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in layout: {labels}")
        for lab, d in systems:
            if d < 1:
                raise ValueError(f"system {lab!r} has nonpositive dimension {d}")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "SystemLayout":
        return cls(tuple(pairs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.systems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.systems)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def __len__(self) -> int:
        return len(self.systems)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown system label {label!r}; layout has {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.systems[self.index(label)][1]

    def sub(self, labels: Iterable[str]) -> "SystemLayout":
        return SystemLayout(tuple((lab, self.dim_of(lab)) for lab in labels))

    def drop(self, labels: Iterable[str]) -> "SystemLayout":
        gone = set(labels)
        for lab in gone:
            self.index(lab)
        return SystemLayout(tuple(s for s in self.systems if s[0] not in gone))

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self.systems + other.systems)

    def relabel(self, mapping: dict[str, str]) -> "SystemLayout":
        return SystemLayout(tuple((mapping.get(lab, lab), d) for lab, d in self.systems))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.dims))

    def flat_index(self, multi: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.dims))


@dataclass(frozen=True)
class Op:
    layout: SystemLayout
    mat: np.ndarray = field(repr=False)
    hermitian: bool = False

    def __post_init__(self):
        mat = np.asarray(self.mat)
        n = self.layout.dim
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not match layout dimension {n}")
        if self.hermitian and mat.size and np.max(np.abs(mat - mat.conj().T)) > HERM_TOL * max(1.0, np.max(np.abs(mat))):
            raise ValueError("operator flagged hermitian is not hermitian")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def trace(self) -> complex:
        return np.trace(self.mat)

    def dag(self) -> "Op":
        return Op(self.layout, self.mat.conj().T, self.hermitian)

    def __add__(self, other: "Op") -> "Op":
        _check_same(self, other)
        return Op(self.layout, self.mat + other.mat, self.hermitian and other.hermitian)

    def __sub__(self, other: "Op") -> "Op":
        _check_same(self, other)
        return Op(self.layout, self.mat - other.mat, self.hermitian and other.hermitian)

    def __mul__(self, c) -> "Op":
        herm = self.hermitian and np.isreal(c)
        return Op(self.layout, self.mat * c, herm)

    __rmul__ = __mul__

    def __matmul__(self, other: "Op") -> "Op":
        _check_same(self, other)
        return Op(self.layout, self.mat @ other.mat)


def _check_same(a: Op, b: Op) -> None:
    if a.layout != b.layout:
        raise ValueError(f"layout mismatch: {a.layout.labels} vs {b.layout.labels}")


def is_hermitian(mat: np.ndarray, tol: float = HERM_TOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) <= tol * scale)


def op(layout: SystemLayout | Sequence[tuple[str, int]], mat, hermitian: bool | None = None) -> Op:
    """Build an Op, detecting hermiticity when not given."""
    if not isinstance(layout, SystemLayout):
        layout = SystemLayout(tuple(layout))
    mat = np.asarray(mat)
    if hermitian is None:
        hermitian = is_hermitian(mat)
    return Op(layout, mat, hermitian)


def identity(layout: SystemLayout, dtype=float) -> Op:
    return Op(layout, np.eye(layout.dim, dtype=dtype), True)


# ---------------------------------------------------------------------------
# array-level kernels (shared by the hierarchy builders)
# ---------------------------------------------------------------------------

def ptrace_array(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace keeping the systems at positions ``keep`` (in their original order)."""
    k = len(dims)
    keep = sorted(keep)
    t = mat.reshape(tuple(dims) * 2)
    traced = [i for i in range(k) if i not in keep]
    # trace pairs from the back so remaining axis numbers stay valid
    for i in sorted(traced, reverse=True):
        kk = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + kk)
    d = prod(dims[i] for i in keep)
    return t.reshape(d, d)


def ptranspose_array(mat: np.ndarray, dims: Sequence[int], subset: Sequence[int]) -> np.ndarray:
    k = len(dims)
    t = mat.reshape(tuple(dims) * 2)
    axes = list(range(2 * k))
    for i in subset:
        axes[i], axes[i + k] = axes[i + k], axes[i]
    n = prod(dims)
    return t.transpose(axes).reshape(n, n)


def permute_array(mat: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: new system j is old system ``order[j]``."""
    k = len(dims)
    t = mat.reshape(tuple(dims) * 2)
    axes = list(order) + [k + i for i in order]
    n = prod(dims)
    return t.transpose(axes).reshape(n, n)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def kron(a: Op, b: Op) -> Op:
    return Op(a.layout.concat(b.layout), np.kron(a.mat, b.mat), a.hermitian and b.hermitian)


def partial_trace(a: Op, keep: Iterable[str]) -> Op:
    keep = list(keep)
    idx = [a.layout.index(lab) for lab in keep]
    out = ptrace_array(a.mat, a.layout.dims, idx)
    return Op(a.layout.sub([lab for lab in a.layout.labels if lab in keep]), out, a.hermitian)


def trace_out(a: Op, gone: Iterable[str]) -> Op:
    gone = set(gone)
    for lab in gone:
        a.layout.index(lab)
    return partial_trace(a, [lab for lab in a.layout.labels if lab not in gone])


def partial_transpose(a: Op, subset: Iterable[str]) -> Op:
    idx = [a.layout.index(lab) for lab in subset]
    return Op(a.layout, ptranspose_array(a.mat, a.layout.dims, idx), a.hermitian)


def permute_systems(a: Op, order: Sequence[str]) -> Op:
    """Return the operator with its factors rearranged into the label order ``order``."""
    order = list(order)
    if sorted(order) != sorted(a.layout.labels):
        raise ValueError(f"{order} is not a permutation of {a.layout.labels}")
    idx = [a.layout.index(lab) for lab in order]
    return Op(a.layout.sub(order), permute_array(a.mat, a.layout.dims, idx), a.hermitian)


def swap_systems(a: Op, mapping: dict[str, str]) -> Op:
    """Conjugate by the unitary that moves the content of system x into system mapping[x].

    Labels stay in place; only contents move, so the layout is unchanged.
    """
    labels = a.layout.labels
    if sorted(mapping.keys()) != sorted(mapping.values()):
        raise ValueError("mapping must be a bijection on a set of labels")
    for src, dst in mapping.items():
        if a.layout.dim_of(src) != a.layout.dim_of(dst):
            raise ValueError(f"cannot move {src!r} (dim {a.layout.dim_of(src)}) onto {dst!r} (dim {a.layout.dim_of(dst)})")
    inverse = {dst: src for src, dst in mapping.items()}
    idx = [a.layout.index(inverse.get(lab, lab)) for lab in labels]
    return Op(a.layout, permute_array(a.mat, a.layout.dims, idx), a.hermitian)


def max_entangled(d: int, labels: tuple[str, str] = ("A", "B")) -> Op:
    if d < 2:
        raise ValueError("max_entangled needs d >= 2")
    v = np.eye(d).reshape(-1) / np.sqrt(d)
    return Op(SystemLayout(((labels[0], d), (labels[1], d))), np.outer(v, v), True)


def eigvalsh_checked(rho: Op, tol: float = PSD_TOL) -> np.ndarray:
    mat = rho.mat
    if not is_hermitian(mat, 1e-10):
        raise ValueError("state is not hermitian")
    w = np.linalg.eigvalsh((mat + mat.conj().T) / 2)
    if w.min(initial=0.0) < -tol:
        raise ValueError(f"state is not PSD (min eigenvalue {w.min():.3e})")
    if abs(w.sum() - 1) > tol:
        raise ValueError(f"state trace {w.sum():.12f} differs from 1")
    return w


def entropy_of_spectrum(w: np.ndarray) -> float:
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(rho: Op) -> float:
    """Entropy in bits."""
    return entropy_of_spectrum(np.clip(eigvalsh_checked(rho), 0.0, None))


def mutual_info_bound_check(rho_abc: Op, a: str | None = None, b: str | None = None,
                            c: str | None = None, tol: float = 1e-8) -> tuple[float, float, bool]:
    """Check I(AB:C) <= 2 log2 d_A for a state whose A-marginal splits as rho_B x rho_C.

    Systems default to the first three labels of the layout, in order A, B, C.
    """
    labels = rho_abc.layout.labels
    if len(labels) != 3 and None in (a, b, c):
        raise ValueError("three systems A, B, C must be named for a layout that is not tripartite")
    a = a if a is not None else labels[0]
    b = b if b is not None else labels[1]
    c = c if c is not None else labels[2]
    rho_bc = partial_trace(rho_abc, [b, c])
    rho_b = partial_trace(rho_abc, [b])
    rho_c = partial_trace(rho_abc, [c])
    prod_bc = permute_systems(kron(rho_b, rho_c), rho_bc.layout.labels)
    dev = float(np.linalg.norm(rho_bc.mat - prod_bc.mat))
    if dev > tol:
        raise ValueError(f"marginal on BC is not a product state (deviation {dev:.3e})")
    s_ab = von_neumann_entropy(partial_trace(rho_abc, [a, b]))
    s_c = von_neumann_entropy(rho_c)
    s_abc = von_neumann_entropy(rho_abc)
    lhs = s_ab + s_c - s_abc
    rhs = 2 * np.log2(rho_abc.layout.dim_of(a))
    return lhs, float(rhs), bool(lhs <= rhs + tol)


# ---------------------------------------------------------------------------
# small helpers used across modules
# ---------------------------------------------------------------------------

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None, real: bool = False) -> np.ndarray:
    k = rank or d
    g = rng.standard_normal((d, k))
    if not real:
        g = g + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def real_if_close(mat: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    if np.iscomplexobj(mat) and np.max(np.abs(mat.imag), initial=0.0) <= tol:
        return np.ascontiguousarray(mat.real)
    return mat
