import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from aqec.sdp import (
    SdpaParseError,
    SdpBuilder,
    SdpProblem,
    Status,
    embed_real,
    hermitian_basis_rows,
    import_sdpa_solution,
    independent_rows,
    presolve,
    read_sdpa,
    solve,
    write_sdpa,
    write_solution,
)
from aqec.qcore import PAULI
from cvx_oracle import cvx_solve

seeds = st.integers(0, 2**32 - 1)


def trace_one(c):
    n = c.shape[0]
    b = SdpBuilder([n], dtype=c.dtype)
    b.set_objective(0, c)
    b.add({0: np.eye(n)}, 1.0)
    return b.build()


def random_feasible(rng, n=5, m=4, complex_=False):
    """Strictly feasible and bounded: tr X = 1 plus constraints satisfied by a PD point."""
    x0 = rng.standard_normal((n, n))
    if complex_:
        x0 = x0 + 1j * rng.standard_normal((n, n))
    x0 = x0 @ x0.conj().T + np.eye(n)
    x0 /= np.trace(x0).real
    b = SdpBuilder([n], dtype=complex if complex_ else float)
    c = rng.standard_normal((n, n))
    if complex_:
        c = c + 1j * rng.standard_normal((n, n))
    b.set_objective(0, (c + c.conj().T) / 2)
    b.add({0: np.eye(n)}, 1.0)
    for _ in range(m):
        a = rng.standard_normal((n, n))
        if complex_:
            a = a + 1j * rng.standard_normal((n, n))
        a = (a + a.conj().T) / 2
        b.add({0: a}, float(np.real(np.vdot(a, x0))))
    return b.build()


@pytest.mark.parametrize("name", ["Z", "X", "Y"])
def test_trace_one_eigenvalue(name):
    sol = solve(trace_one(PAULI[name]))
    assert sol.status is Status.OPTIMAL
    assert abs(sol.primal_value - 1.0) < 1e-7


def test_trace_one_max_eigenvalue(rng):
    c = rng.standard_normal((6, 6))
    c = c + c.T
    sol = solve(trace_one(c))
    assert abs(sol.primal_value - np.linalg.eigvalsh(c)[-1]) < 1e-7
    assert sol.dual_value >= sol.primal_value - 2e-8


def test_infeasible_detected():
    b = SdpBuilder([2])
    b.add({0: np.eye(2)}, 1.0)
    b.add({0: 2 * np.eye(2)}, 3.0)
    assert solve(b.build()).status is Status.INFEASIBLE


def test_tolerance_guard():
    with pytest.raises(ValueError):
        solve(trace_one(np.eye(2)), tol=1e-11)


def test_block_guard():
    p = SdpProblem((601,), [np.zeros((601, 601))], [sp.csr_matrix((0, 601 * 601))], np.zeros(0))
    with pytest.raises(ValueError, match="guard"):
        solve(p)


def test_deterministic(rng):
    p = random_feasible(rng)
    a, b = solve(p), solve(p)
    assert a.primal_value == b.primal_value
    assert all(np.array_equal(x, y) for x, y in zip(a.primal, b.primal))


@given(seeds)
def test_matches_independent_oracle(seed):
    rng = np.random.default_rng(seed)
    p = random_feasible(rng, n=int(rng.integers(3, 8)), m=int(rng.integers(1, 5)))
    ours = solve(p)
    _, ref = cvx_solve(p)
    assert ours.status is Status.OPTIMAL
    assert abs(ours.primal_value - ref.primal_value) < 1e-5
    assert ours.dual_value >= ours.primal_value - 2e-8


@given(seeds)
def test_complex_embedding_value(seed):
    rng = np.random.default_rng(seed)
    p = random_feasible(rng, n=4, m=3, complex_=True)
    assert p.is_complex
    a = solve(p)
    b = solve(embed_real(p))
    assert abs(a.primal_value - b.primal_value) < 1e-7


@given(seeds, st.floats(0.1, 10.0))
def test_objective_scaling(seed, scale):
    rng = np.random.default_rng(seed)
    p = random_feasible(rng)
    q = SdpProblem(p.blocks, [scale * c for c in p.objective], p.a, p.b)
    a, b = solve(p), solve(q)
    assert abs(b.primal_value - scale * a.primal_value) <= scale * 1e-6
    xa, xb = a.primal[0], b.primal[0]
    assert np.linalg.norm(xa / np.trace(xa) - xb / np.trace(xb)) < 1e-4


def test_presolve_drops_dependent_rows():
    b = SdpBuilder([2])
    b.add({0: np.eye(2)}, 1.0)
    b.add({0: 2 * np.eye(2)}, 2.0)
    b.add({0: np.diag([1.0, 0.0])}, 0.25)
    pre = presolve(b.build())
    assert pre.problem.m == 2 and pre.inconsistency < 1e-12


def test_independent_rows_first_come():
    a = np.array([[1.0, 0, 0], [2.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]])
    assert list(independent_rows(a)) == [0, 2]
    assert list(independent_rows(sp.csr_matrix(a))) == [0, 2]


def test_hermitian_basis_rows_count():
    assert hermitian_basis_rows(3, real=True).shape == (6, 9)
    assert hermitian_basis_rows(3, real=False).shape == (9, 9)


def test_sdpa_toy_grammar(tmp_path):
    path = tmp_path / "toy.dat-s"
    write_sdpa(trace_one(np.diag([1.0, -1.0])), path, comment="toy")
    lines = path.read_text().splitlines()
    assert lines[0] == '"toy'
    assert lines[1:5] == ["1", "1", "2", "1"]
    assert "0 1 1 1 1" in lines and "0 1 2 2 -1" in lines
    assert "1 1 1 1 1" in lines and "1 1 2 2 1" in lines


@given(seeds)
def test_sdpa_roundtrip_exact(seed):
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(seed)
    p = random_feasible(rng, complex_=bool(seed % 2))
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "p.dat-s"
        write_sdpa(p, path)
        back = read_sdpa(path)
    assert back.digest() == embed_real(p).digest()


def test_complex_block_exports_doubled(tmp_path):
    p = random_feasible(np.random.default_rng(3), n=3, complex_=True)
    path = tmp_path / "c.dat-s"
    write_sdpa(p, path)
    back = read_sdpa(path)
    assert back.blocks == (6,)
    assert abs(solve(back).primal_value - solve(p).primal_value) < 1e-7


def test_solution_roundtrip(tmp_path, rng):
    p = random_feasible(rng)
    sol = solve(p)
    path = tmp_path / "p.out"
    write_solution(sol, path)
    back = import_sdpa_solution(path, p)
    assert abs(back.primal_value - sol.primal_value) < 1e-12


@pytest.mark.parametrize("text, line", [
    ("1\n1\n2\n1.0\n0 1 1 1 x\n", 5),
    ("1\n1\n2\n1.0\n0 1 1\n", 5),
    ("1\n1\n", 2),
])
def test_sdpa_parse_errors(tmp_path, text, line):
    path = tmp_path / "bad.dat-s"
    path.write_text(text)
    with pytest.raises(SdpaParseError) as info:
        read_sdpa(path)
    assert info.value.line_no == line


def test_solution_parse_error(tmp_path):
    path = tmp_path / "bad.out"
    path.write_text("1.0\n3 1 1 1 0.5\n")
    with pytest.raises(SdpaParseError, match="matrix number"):
        import_sdpa_solution(path, blocks=(1,))
