import numpy as np
import pytest
from hypothesis import given, strategies as st

from aqec.channels import amplitude_damping, depolarizing, iid_power, replacement_depolarizing
from aqec.hierarchy import HierarchyProblem, build_reduced, families, objective, solve_outer
from aqec.markers import (
    build_marker_reduced,
    keep,
    keep_append,
    marker_families,
    marker_positions,
    product_terms,
    swap,
    transpose,
    unitary_bd,
)
from aqec.qcore import kron_all, permute_array, random_unitary
from aqec.sdp import solve

seeds = st.integers(0, 2**32 - 1)


@given(seeds)
def test_local_map_adjoint(seed):
    rng = np.random.default_rng(seed)
    for lm in (keep(3, (0, 2)), keep_append(3, (0,), 2), swap(3, 0, 1), transpose(3, (1,), True)):
        x = rng.standard_normal((2 ** lm.k_in,) * 2)
        y = rng.standard_normal((2 ** lm.k_out,) * 2)
        lhs = np.sum(lm.fn(x) * y)
        rhs = np.sum(x * lm.adjoint(y))
        assert abs(lhs - rhs) < 1e-12


def test_keep_append_places_identity():
    x = np.diag([1.0, 0.0, 0.0, 0.0])  # |00><00| on two locals
    y = keep_append(2, (1,), 0).fn(x)
    assert np.allclose(y, np.kron(np.eye(2) / 2, np.diag([1.0, 0.0])))


def test_marker_positions():
    hp = HierarchyProblem(iid_power(depolarizing(0.1), 2), 2, 2)
    assert marker_positions(hp.positions) == [(0, 3, 6), (1, 4, 7), (2, 5, 8)]


@pytest.mark.parametrize("nm", [2, 3])
def test_product_terms_reconstruct(nm):
    noise = iid_power(amplitude_damping(0.3), nm - 1)
    c = objective(HierarchyProblem(noise, 2, 1))
    terms = product_terms(c, nm)
    total = sum(coef * kron_all(mats) for coef, mats in terms)
    # markers come out as (unbarred, barred) pairs; undo that ordering
    order = []
    for mu in range(nm):
        order += [mu, nm + mu]
    back = permute_array(total, (2,) * (2 * nm), np.argsort(order))
    assert np.max(np.abs(back - c)) < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_unitary_bd_invariance(k, rng):
    bd = unitary_bd(k)
    assert np.max(np.abs(bd.v.conj().T @ bd.v - np.eye(2 ** k))) < 1e-10
    u = random_unitary(2, rng)
    uk = kron_all([u] * k)
    x = bd.lift([rng.standard_normal((b.m, b.m)) for b in bd.blocks])
    x = (x + x.conj().T) / 2
    assert np.max(np.abs(uk @ x @ uk.conj().T - x)) < 1e-10


def test_families_mirror_generic():
    hp = HierarchyProblem(depolarizing(0.2), 2, 2, ppt_marginal=True, ns=True)
    generic = [f.name for f in families(hp)]
    marker = [f.name for f in marker_families(hp)]
    assert sorted(set(generic)) == sorted(set(marker))


@pytest.mark.parametrize("kw", [{}, {"ppt_marginal": True}, {"ns_a2b": True, "ppt_marginal": True}])
def test_marker_build_matches_generic_full(kw):
    hp = HierarchyProblem(replacement_depolarizing(0.4), 2, 2, **kw)
    gen, _ = build_reduced(hp, "full")
    mark, red = build_marker_reduced(hp)
    a, b = solve(gen), solve(mark)
    assert abs(a.primal_value - b.primal_value) < 1e-6
    assert sum(red.sizes) > 0


def test_marker_lift_is_feasible():
    hp = HierarchyProblem(iid_power(replacement_depolarizing(0.2), 2), 2, 2, ppt_marginal=True)
    r = solve_outer(hp, "full")
    assert r.symmetry == "full"
    assert r.residual <= 1e-7
    c = objective(hp)
    assert abs(np.real(np.vdot(c, r.primal_state.mat)) - r.value) < 1e-6
