import numpy as np
import pytest

from aqec.channels import (
    amplitude_damping,
    channel_fidelity_value,
    depolarizing,
    identity_channel,
    iid_power,
    is_valid_code,
    trivial_code,
)
from aqec.hierarchy import HierarchyProblem, solve_outer
from aqec.inner import (
    ic_povm_qubits,
    random_code,
    round_outer,
    seesaw,
    seesaw_run,
    tetrahedral_effects,
    valid_pair,
    warm_started_pipeline,
)
from aqec.qcore import ptrace_array


def test_tetrahedral_povm():
    p = ic_povm_qubits(1)
    assert len(p) == 4
    assert p.completeness_error() < 1e-12
    assert p.gram_rank() == 4 and p.informationally_complete
    for e in tetrahedral_effects():
        assert np.linalg.eigvalsh(e).min() > -1e-12


def test_two_qubit_povm():
    p = ic_povm_qubits(2)
    assert len(p) == 16
    assert p.completeness_error() < 1e-12
    assert p.informationally_complete


def test_povm_guard():
    with pytest.raises(ValueError, match="guard"):
        ic_povm_qubits(10)
    with pytest.raises(ValueError):
        ic_povm_qubits(0)


def test_random_code_valid(rng):
    pair = random_code(2, 4, rng, iid_power(depolarizing(0.1), 2))
    assert is_valid_code(pair)
    assert abs(pair.fidelity - channel_fidelity_value(pair, iid_power(depolarizing(0.1), 2))) < 1e-12


def test_valid_pair_fixes_marginals(rng):
    dec = rng.standard_normal((4, 4))
    enc = rng.standard_normal((4, 4))
    pair = valid_pair(dec @ dec.T, enc @ enc.T, 2, 2, depolarizing(0.2), "manual")
    assert is_valid_code(pair, 1e-10)


def test_seesaw_identity_noise():
    assert abs(seesaw(identity_channel(), 2, starts=3).fidelity - 1) < 1e-6


def test_seesaw_trivial_fixed_point():
    res = seesaw_run(depolarizing(0.3), 2, trivial_code(2, 2))
    assert abs(res.pair.fidelity - 0.7) < 1e-6
    assert is_valid_code(res.pair)


def test_seesaw_monotone_history():
    res = seesaw_run(iid_power(amplitude_damping(0.2), 2), 2, starts=3, seed=11)
    assert all(b >= a - 1e-9 for a, b in zip(res.history, res.history[1:]))
    assert res.starts == 4


def test_seesaw_iteration_guard():
    with pytest.raises(ValueError):
        seesaw_run(depolarizing(0.1), 2, max_iters=0)


def test_seesaw_three_qubits_below_outer():
    noise = iid_power(depolarizing(0.1), 3)
    inner = seesaw(noise, 2, starts=20)
    outer = solve_outer(HierarchyProblem(noise, 2, 1, ppt_marginal=True, ns=True))
    assert is_valid_code(inner)
    assert inner.fidelity <= outer.value + 2e-8


def _product_extension(pair, n):
    # x ⊗ y^{⊗n} with x = Dc^T, y = C_E^T: a feasible point of every level
    x = pair.decoder_choi.mat.T
    y = pair.encoder_choi.mat.T
    out = x
    for _ in range(n):
        out = np.kron(out, y)
    return out


def test_round_product_primal_exact():
    pair = trivial_code(2, 2)
    res = round_outer(_product_extension(pair, 2), identity_channel(), 2, 2)
    assert abs(res.best_pair.fidelity - 1) < 1e-12
    assert abs(res.mixture_value - 1) < 1e-12
    res = round_outer(_product_extension(pair, 3), depolarizing(0.3), 2, 3)
    assert abs(res.best_pair.fidelity - 0.7) < 1e-12


def test_round_identity_channel_outer_primal():
    # the solver returns a mixture of equivalent perfect codes; rounding stays a certified inner point
    hp = HierarchyProblem(identity_channel(), 2, 2)
    outer = solve_outer(hp, "ext")
    res = round_outer(outer.primal_state, identity_channel(), 2, 2)
    assert res.mixture_value - 1e-9 <= res.best_pair.fidelity <= outer.value + 1e-6
    assert is_valid_code(valid_pair(res.best_pair.decoder_choi.mat, res.best_pair.encoder_choi.mat,
                                    2, 2, identity_channel(), "rounded"))


def test_round_depolarizing_sandwich():
    noise = depolarizing(0.2)
    outer = solve_outer(HierarchyProblem(noise, 2, 2), "ext")
    res = round_outer(outer.primal_state, noise, 2, 2)
    assert res.best_pair.fidelity <= outer.value + 1e-6
    assert res.best_pair.fidelity >= res.mixture_value - 1e-9
    assert res.best_pair.fidelity == max(o.value for o in res.per_outcome)
    assert res.marginal_error <= 1e-7
    assert abs(sum(o.probability for o in res.per_outcome) + res.dropped_mass - 1) < 1e-6


def test_round_conditional_marginals():
    noise = depolarizing(0.4)
    outer = solve_outer(HierarchyProblem(noise, 2, 3))
    res = round_outer(outer.primal_state, noise, 2, 3)
    assert set(res.mixtures) == {1, 2}
    enc = res.best_pair.encoder_choi.mat
    assert np.max(np.abs(ptrace_array(enc, (2, 2), [0]) - np.eye(2) / 2)) <= 1e-7


def test_round_needs_copies():
    with pytest.raises(ValueError):
        round_outer(np.eye(4) / 4, depolarizing(0.1), 2, 1)


def test_pipeline_identity():
    res = warm_started_pipeline(identity_channel(), 2, 2, starts=2)
    assert res.gap <= 1e-6


def test_pipeline_depolarizing_ppt():
    res = warm_started_pipeline(depolarizing(0.5), 2, 2, ppt=True, starts=2)
    assert res.gap >= -2e-8
    assert 0 <= res.inner.fidelity <= 1 and 0 <= res.outer.value <= 1 + 1e-8
    assert res.rounding is not None and res.inner.provenance == "warm-started"


def test_pipeline_level_one_is_seesaw_only():
    res = warm_started_pipeline(iid_power(depolarizing(0.1), 2), 2, 1, starts=2)
    assert res.rounding is None and res.inner.provenance == "seesaw"
    assert res.gap >= -2e-8
