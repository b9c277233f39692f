import numpy as np
import pytest
from hypothesis import given, strategies as st

from aqec.channels import amplitude_damping, depolarizing, identity_channel, iid_power, replacement_depolarizing
from aqec.hierarchy import (
    SEP,
    HierarchyProblem,
    Positions,
    add_ns_a2b,
    add_ppt_cut,
    build_level_n,
    build_unreduced,
    counterexample_state,
    counterexample_weight,
    default_ppt_cuts,
    families,
    objective,
    solve_outer,
)
from aqec.qcore import partial_trace, permute_array
from aqec.sdp import solve

TOL = 1e-8


def test_positions_layout():
    pos = Positions(2, (2, 2), 2)
    assert pos.count == 9 and pos.dim == 2 ** 9
    assert pos.copy(2) == (6, 7, 8)
    assert pos.layout().labels[:4] == ("L", "P1", "P2", "Lb1")


def test_total_dimension():
    hp = HierarchyProblem(iid_power(depolarizing(0.1), 3), 2, 2)
    assert hp.total_dim == 2 ** (1 + 3 + 2 * (1 + 3))


def test_problem_validation():
    with pytest.raises(ValueError):
        HierarchyProblem(depolarizing(0.1), 2, 0)
    with pytest.raises(ValueError):
        HierarchyProblem(depolarizing(0.1), 2, 1, ppt_cuts=((),))
    with pytest.raises(ValueError):
        HierarchyProblem(depolarizing(0.1), 2, 1, ppt_cuts=((2,),))


def test_default_cuts():
    assert default_ppt_cuts(1) == ((1,),)
    assert default_ppt_cuts(2) == ((1, 2), (1,))


def test_level_one_shape():
    p = build_level_n(HierarchyProblem(depolarizing(0.2), 2, 1))
    assert p.blocks == (16,)
    # d_P²(d_L²d_P²) + d_L² equalities plus the trace
    assert p.m == 68 + 1


def test_unreduced_guard():
    with pytest.raises(MemoryError, match="5000"):
        build_unreduced(HierarchyProblem(iid_power(depolarizing(0.1), 4), 2, 2))


def test_objective_hermitian():
    c = objective(HierarchyProblem(amplitude_damping(0.3), 2, 2))
    assert np.max(np.abs(c - c.conj().T)) < 1e-14


@pytest.mark.parametrize("kw", [{}, {"ppt_cuts": ((1,),)}, {"ns_a2b": True}, {"ppt_marginal": True, "ns": True}])
def test_identity_channel_perfect(kw):
    r = solve_outer(HierarchyProblem(identity_channel(), 2, 1, **kw), "none")
    assert abs(r.value - 1) < 1e-6


def test_ns_a2b_tightens():
    base = solve_outer(HierarchyProblem(depolarizing(0.5), 2, 1), "none")
    ns = solve_outer(HierarchyProblem(depolarizing(0.5), 2, 1, ns_a2b=True), "none")
    assert ns.value <= base.value + 2 * TOL
    assert ns.residual <= 10 * TOL


def test_add_helpers_match_flags():
    hp = HierarchyProblem(depolarizing(0.5), 2, 1)
    p = add_ns_a2b(add_ppt_cut(build_level_n(hp), hp, (1,)), hp)
    flagged = HierarchyProblem(depolarizing(0.5), 2, 1, ppt_cuts=((1,),), ns_a2b=True)
    assert abs(solve(p).primal_value - solve_outer(flagged, "none").value) < 1e-6


def test_ppt_marginal_equals_cut_at_level_one():
    a = solve_outer(HierarchyProblem(amplitude_damping(0.4), 2, 1, ppt_cuts=((1,),)), "none")
    b = solve_outer(HierarchyProblem(amplitude_damping(0.4), 2, 1, ppt_marginal=True), "none")
    assert abs(a.value - b.value) < 1e-6


@pytest.mark.parametrize("q", [0.1, 0.5])
def test_sep_relaxes_prod(q):
    prod = solve_outer(HierarchyProblem(depolarizing(q), 2, 2), "ext")
    sep = solve_outer(HierarchyProblem(depolarizing(q), 2, 2, variant=SEP), "ext")
    assert prod.value <= sep.value + 2 * TOL


def test_primal_invariants():
    hp = HierarchyProblem(amplitude_damping(0.3), 2, 2)
    r = solve_outer(hp, "ext")
    rho = r.primal_state.mat
    # copy swap on (Lb1 Pb1) <-> (Lb2 Pb2)
    swapped = permute_array(rho, hp.positions.dims, (0, 1, 4, 5, 2, 3))
    assert np.max(np.abs(swapped - rho)) <= 10 * TOL
    assert max(f.residual(rho) for f in families(hp)) <= 10 * TOL
    assert 0 <= r.value <= 1 + 1e-6


def test_symmetry_modes_agree_qubit_pair():
    hp = HierarchyProblem(iid_power(amplitude_damping(0.3), 2), 2, 1, ppt_marginal=True)
    vals = {m: solve_outer(hp, m).value for m in ("none", "combined")}
    assert abs(vals["none"] - vals["combined"]) < 1e-6
    assert solve_outer(hp).symmetry == "combined"


def test_marker_full_matches_combined():
    hp = HierarchyProblem(iid_power(replacement_depolarizing(0.3), 2), 2, 1, ppt_marginal=True, ns=True)
    a = solve_outer(hp, "combined")
    b = solve_outer(hp, "full")
    assert abs(a.value - b.value) < 1e-6
    assert abs(b.value - 0.775) < 1e-6


def test_level_three_monotone_small():
    vals = [solve_outer(HierarchyProblem(depolarizing(0.5), 2, n)).value for n in (1, 2, 3)]
    assert vals[0] >= vals[1] - 2 * TOL >= vals[2] - 4 * TOL


# --- counterexample fixture --------------------------------------------------

def test_counterexample_symmetric_spectrum():
    assert counterexample_weight(np.diag([1.0, -1.0]), 0.0) == 0.5


def test_counterexample_range():
    with pytest.raises(ValueError):
        counterexample_state(np.diag([2.0, -1.0]), 2.0)
    with pytest.raises(ValueError):
        counterexample_state(np.array([[0, 1.0], [0, 0]]), 0.0)


@given(st.integers(0, 2**32 - 1))
def test_counterexample_random(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    g = g + g.conj().T
    w = np.linalg.eigvalsh(g)
    b = w[0] + (w[-1] - w[0]) * rng.uniform(0.05, 0.95)
    rho = counterexample_state(g, b)
    ra = partial_trace(rho, ["A"]).mat
    assert abs(np.trace(g @ ra) - b) < 1e-12
    assert np.max(np.abs(g @ ra - ra @ g)) < 1e-12
    assert np.linalg.matrix_rank(ra, tol=1e-10) == 2
