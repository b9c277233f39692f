import numpy as np
import pytest
from hypothesis import given, strategies as st

from aqec.qcore import (
    Op,
    SystemLayout,
    identity,
    kron,
    max_entangled,
    mutual_info_bound_check,
    op,
    partial_trace,
    partial_transpose,
    permute_systems,
    ptrace_array,
    ptranspose_array,
    random_density,
    random_unitary,
    swap_systems,
    von_neumann_entropy,
)

seeds = st.integers(0, 2**32 - 1)


def _brute_ptrace(mat, dims, keep):
    # loop oracle over multi-indices
    n = len(dims)
    t = mat.reshape(tuple(dims) * 2)
    gone = [i for i in range(n) if i not in keep]
    kd = [dims[i] for i in keep]
    out = np.zeros((int(np.prod(kd)), int(np.prod(kd))), dtype=mat.dtype)
    for ri in np.ndindex(*kd):
        for ci in np.ndindex(*kd):
            s = 0
            for gi in np.ndindex(*[dims[i] for i in gone]):
                row, col = [0] * n, [0] * n
                for k, p in enumerate(keep):
                    row[p], col[p] = ri[k], ci[k]
                for k, p in enumerate(gone):
                    row[p] = col[p] = gi[k]
                s += t[tuple(row) + tuple(col)]
            out[np.ravel_multi_index(ri, kd), np.ravel_multi_index(ci, kd)] = s
    return out


def test_layout_rejects_duplicates():
    with pytest.raises(ValueError):
        SystemLayout.of(("A", 2), ("A", 3))


def test_layout_unknown_label():
    with pytest.raises(KeyError):
        SystemLayout.of(("A", 2)).index("B")


def test_op_shape_mismatch():
    with pytest.raises(ValueError):
        Op(SystemLayout.of(("A", 2)), np.eye(3))


def test_row_major_convention():
    a = np.diag([1.0, 0.0])
    b = np.diag([0.0, 1.0])
    ab = kron(op([("A", 2)], a), op([("B", 2)], b))
    # |0>_A |1>_B sits at flat index 1
    assert ab.mat[1, 1] == 1.0
    assert ab.layout.labels == ("A", "B")


def test_max_entangled_qubit():
    phi = max_entangled(2)
    expect = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            expect[i, j] = 0.5
    assert np.allclose(phi.mat, expect)
    assert np.allclose(partial_trace(phi, ["B"]).mat, np.eye(2) / 2)


def test_max_entangled_purity_d3():
    phi = max_entangled(3)
    assert abs(np.trace(phi.mat @ phi.mat) - 1) < 1e-12


def test_max_entangled_small_d():
    with pytest.raises(ValueError):
        max_entangled(1)


def test_entropy_examples():
    assert abs(von_neumann_entropy(op([("A", 2)], np.eye(2) / 2)) - 1.0) < 1e-12
    assert abs(von_neumann_entropy(max_entangled(2))) < 1e-12
    # direct formula value for diag(3/4, 1/4)
    assert abs(von_neumann_entropy(op([("A", 2)], np.diag([0.75, 0.25]))) - 0.8112781244591328) < 1e-12


def test_entropy_rejects_non_psd():
    with pytest.raises(ValueError):
        von_neumann_entropy(op([("A", 2)], np.diag([1.5, -0.5])))


@given(seeds)
def test_ptrace_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    dims = (2, 3, 2)
    m = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    for keep in ([0], [1], [0, 2], [1, 2]):
        assert np.allclose(ptrace_array(m, dims, keep), _brute_ptrace(m, dims, keep), atol=1e-12)


@given(seeds)
def test_ptrace_ptranspose_commute_on_disjoint(seed):
    rng = np.random.default_rng(seed)
    lay = SystemLayout.of(("A", 2), ("B", 2), ("C", 3))
    m = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    a = Op(lay, m)
    one = partial_transpose(partial_trace(a, ["A", "B"]), ["A"])
    two = partial_trace(partial_transpose(a, ["A"]), ["A", "B"])
    assert np.max(np.abs(one.mat - two.mat)) <= 1e-12


@given(seeds)
def test_permute_preserves_spectrum(seed):
    rng = np.random.default_rng(seed)
    lay = SystemLayout.of(("A", 2), ("B", 3), ("C", 2))
    rho = Op(lay, random_density(12, rng), True)
    moved = permute_systems(rho, ["C", "A", "B"])
    assert moved.layout.labels == ("C", "A", "B")
    assert np.allclose(np.linalg.eigvalsh(rho.mat), np.linalg.eigvalsh(moved.mat), atol=1e-10)


@given(seeds)
def test_random_density_valid(seed):
    rho = random_density(6, np.random.default_rng(seed))
    assert abs(np.trace(rho) - 1) < 1e-10
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-12


@given(seeds)
def test_entropy_unitarily_invariant(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(4, rng)
    u = random_unitary(4, rng)
    a = von_neumann_entropy(op([("A", 4)], rho))
    b = von_neumann_entropy(op([("A", 4)], u @ rho @ u.conj().T))
    assert abs(a - b) < 1e-9


def test_ptranspose_of_max_entangled_is_swap():
    pt = ptranspose_array(max_entangled(2).mat, (2, 2), [1])
    swap = np.eye(4)[[0, 2, 1, 3]]
    assert np.allclose(pt, swap / 2)


def test_swap_systems_moves_state():
    a = op([("A", 2)], np.diag([1.0, 0.0]))
    b = op([("B", 2)], np.diag([0.0, 1.0]))
    ab = kron(a, b)
    ba = swap_systems(ab, {"A": "B", "B": "A"})
    assert np.allclose(ba.mat, np.kron(b.mat, a.mat))


def test_identity_trace():
    lay = SystemLayout.of(("A", 2), ("B", 3))
    assert identity(lay).trace() == 6


def test_mutual_info_product_state(rng):
    parts = [op([(lab, 2)], random_density(2, rng)) for lab in "ABC"]
    lhs, rhs, holds = mutual_info_bound_check(kron(kron(parts[0], parts[1]), parts[2]))
    assert abs(lhs) < 1e-9 and rhs == 2.0 and holds


def test_mutual_info_purified_pair():
    # maximally entangled A, C and an independent B
    phi = max_entangled(2, ("A", "C"))
    b = op([("B", 2)], np.diag([0.3, 0.7]))
    rho = permute_systems(kron(phi, b), ["A", "B", "C"])
    lhs, rhs, holds = mutual_info_bound_check(rho)
    assert abs(lhs - 2) < 1e-9 and rhs == 2.0 and holds


def test_mutual_info_precondition():
    phi = max_entangled(2, ("B", "C"))
    a = op([("A", 2)], np.eye(2) / 2)
    with pytest.raises(ValueError, match="deviation"):
        mutual_info_bound_check(kron(a, phi))
