"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""
import csv
import io
import time

import numpy as np
import pytest
from click.testing import CliRunner

from aqec.channels import depolarizing, iid_power, random_channel, replacement_depolarizing
from aqec.cli import main
from aqec.hierarchy import HierarchyProblem, build_reduced, build_unreduced, counterexample_state, solve_outer, symmetry_action
from aqec.inner import warm_started_pipeline
from aqec.qcore import Op, SystemLayout, mutual_info_bound_check, partial_trace, random_density
from aqec.sdp import SdpBuilder, embed_real, import_sdpa_solution, read_sdpa, solve, write_sdpa, write_solution
from aqec.symmetry import (
    Verdict,
    block_diagonalize,
    combined_multiplicities,
    commutant_orbit_basis,
    example_pair,
    extendibility_blocks,
    global_group_order,
    grid_action,
    grid_global_group,
    joint_symmetry_check,
    multiplicities_by_characters,
    product_table,
    reduce_sdp,
    symmetric_table,
)
from aqec.symmetry.groups import PermGroup, from_cycles
from conftest import ACCEPTANCE
from cvx_oracle import cvx_solve


def report(num, ok, measured, expected):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  measured={measured}  expected={expected}"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


def cli_value(*args):
    res = CliRunner().invoke(main, ["outer", *args], catch_exceptions=False)
    (row,) = csv.DictReader(io.StringIO(res.output))
    return float(row["value"])


def test_criterion_01_depolarizing_level_one():
    want = {0.0: 1.0, 0.0344828: 0.990065, 0.344828: 0.803087, 0.689655: 0.5}
    got = {p: cli_value("--channel", "dep", "--qubits", "3", "--level", "1", "--ppt", "--ns", "--param", str(p))
           for p in want}
    ok = all(abs(got[p] - want[p]) <= 1e-3 for p in want)
    report(1, ok, [round(v, 6) for v in got.values()], list(want.values()))


def test_criterion_02_amplitude_damping_level_one():
    want = {0.0: 1.0, 0.517241: 0.922185, 1.0: 0.5}
    got = {g: cli_value("--channel", "ad", "--qubits", "3", "--level", "1", "--ppt", "--ns", "--param", str(g))
           for g in want}
    ok = all(abs(got[g] - want[g]) <= 1e-3 for g in want)
    report(2, ok, [round(v, 6) for v in got.values()], list(want.values()))


def test_criterion_03_depolarizing_level_two():
    hp = HierarchyProblem(iid_power(replacement_depolarizing(0.0344828), 3), 2, 2, ppt_marginal=True, ns=True)
    r = solve_outer(hp, keep_state=False)
    report(3, abs(r.value - 0.988336) <= 2e-3, f"{r.value:.6f} ({r.symmetry})", 0.988336)


def test_criterion_04_character_multiplicities():
    t0 = time.perf_counter()
    grid = multiplicities_by_characters(grid_action(3, 2), product_table(symmetric_table(3), symmetric_table(2)))
    comb = combined_multiplicities(3, 2)
    dt = time.perf_counter() - t0
    want_g = [74, 26, 30, 46, 74, 94]
    want_c = want_g + [120, 56, 56, 120, 168, 168]
    ok = sorted(grid.values()) == sorted(want_g) and sorted(comb.values()) == sorted(want_c) and dt < 1
    report(4, ok, (sorted(grid.values()), sorted(comb.values()), f"{dt:.2f}s"), (want_g, want_c))


def test_criterion_05_extendibility_blocks():
    sizes = sorted(extendibility_blocks(3, 2).values())
    report(5, sizes == [1920, 2176], sizes, [1920, 2176])


def test_criterion_06_reduction_soundness():
    hp = HierarchyProblem(depolarizing(0.2), 2, 2)
    p = build_unreduced(hp)
    full = solve(p).primal_value
    action = symmetry_action(hp.positions, "ext")[0]
    reduced = solve(reduce_sdp(p, block_diagonalize(commutant_orbit_basis(action)))).primal_value
    structured = solve_outer(hp, "ext").value
    diff = max(abs(full - reduced), abs(full - structured))
    report(6, diff <= 1e-6, f"unreduced={full:.9f} reduced={reduced:.9f} structured={structured:.9f}", "agree to 1e-6")


def test_criterion_07_nesting():
    tol = 1e-8
    vals = {p: [solve_outer(HierarchyProblem(depolarizing(p), 2, n), keep_state=False).value for n in (1, 2, 3)]
            for p in (0.1, 0.5)}
    ok = all(v[k + 1] <= v[k] + 2 * tol for v in vals.values() for k in range(2))
    report(7, ok, {p: [round(x, 7) for x in v] for p, v in vals.items()}, "non-increasing in n")


def test_criterion_08_sandwich():
    rng = np.random.default_rng(20240601)
    worst, mono = -np.inf, True
    for _ in range(10):
        res = warm_started_pipeline(random_channel(2, 2, rng), 2, 2, ppt=True, starts=3)
        worst = max(worst, res.inner.fidelity - res.outer.value)
        h = res.seesaw.history
        mono &= all(b >= a - 1e-9 for a, b in zip(h, h[1:]))
    report(8, worst <= 2e-4 and mono, f"max(inner-outer)={worst:.2e} monotone={mono}", "<= 2e-4, monotone")


def test_criterion_09_analyzer():
    t0 = time.perf_counter()
    ex = joint_symmetry_check(*example_pair())
    u = PermGroup(4, (from_cycles(4, [(1, 2)]),))
    v = PermGroup(4, (from_cycles(4, [(3, 4)]),))
    dj = joint_symmetry_check(u, v)
    order = global_group_order(2, 2)
    closure = grid_global_group(2, 2).order
    dt = time.perf_counter() - t0
    ok = (ex.verdict is Verdict.NOT_JOINT and ex.closure_order == 8
          and dj.verdict is Verdict.JOINT and dj.order_u * dj.order_v == 4 == dj.closure_order * dj.intersection_order
          and order == closure == 8 and dt < 1)
    measured = (ex.verdict.name, ex.closure_order, dj.verdict.name, dj.closure_order * dj.intersection_order,
                order, closure, f"{dt:.2f}s")
    report(9, ok, measured, ("NOT_JOINT", 8, "JOINT", 4, 8, 8))


def _prop_a2_instance(rng):
    # A correlated with C only; B independent
    k = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(k))
    rb = random_density(2, rng)
    mat = sum(wi * np.kron(np.kron(random_density(2, rng), rb), random_density(3, rng)) for wi in w)
    return Op(SystemLayout((("A", 2), ("B", 2), ("C", 3))), mat, True)


def test_criterion_10_counterexample_and_bound():
    gamma = np.diag([2.0, -1.0])
    rho = counterexample_state(gamma, 0.5)
    ra = partial_trace(rho, ["A"]).mat
    p = float(np.real(rho.mat[2, 2] + rho.mat[3, 3]))  # weight on |0><0| of the flag
    b = float(np.real(np.trace(gamma @ ra)))
    rank = int(np.linalg.matrix_rank(ra, tol=1e-10))
    rng = np.random.default_rng(7)
    held = sum(mutual_info_bound_check(_prop_a2_instance(rng))[2] for _ in range(50))
    ok = abs(p - 0.5) <= 1e-12 and abs(b - 0.5) <= 1e-12 and rank == 2 and held == 50
    report(10, ok, (p, b, rank, f"{held}/50"), (0.5, 0.5, 2, "50/50"))


def _toy_problems():
    rng = np.random.default_rng(11)
    b = SdpBuilder([2])
    b.set_objective(0, np.diag([1.0, -1.0]))
    b.add({0: np.eye(2)}, 1.0)
    toy = b.build()
    n = 3
    x0 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    x0 = x0 @ x0.conj().T + np.eye(n)
    x0 /= np.trace(x0).real
    b = SdpBuilder([n], dtype=complex)
    c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b.set_objective(0, (c + c.conj().T) / 2)
    b.add({0: np.eye(n)}, 1.0)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = (a + a.conj().T) / 2
    b.add({0: a}, float(np.real(np.vdot(a, x0))))
    return [toy, b.build()]


def test_criterion_11_sdpa_roundtrip(tmp_path):
    from aqec.channels import amplitude_damping

    probs = _toy_problems() + [
        build_unreduced(HierarchyProblem(amplitude_damping(0.3), 2, 1)),
        build_unreduced(HierarchyProblem(depolarizing(0.2), 2, 1, ppt_marginal=True)),
        build_reduced(HierarchyProblem(amplitude_damping(0.3), 2, 2), "ext")[0],
    ]
    exact, worst = 0, 0.0
    for i, p in enumerate(probs):
        path = tmp_path / f"p{i}.dat-s"
        write_sdpa(p, path)
        back = read_sdpa(path)
        exact += back.digest() == embed_real(p).digest()
        q, ext = cvx_solve(back)
        out = tmp_path / f"p{i}.out"
        write_solution(ext, out)
        external = import_sdpa_solution(out, q).primal_value
        worst = max(worst, abs(external - solve(p).primal_value))
    ok = exact == len(probs) and worst <= 1e-5
    report(11, ok, f"exact {exact}/{len(probs)}, max |internal-external|={worst:.2e}", "5/5, <= 1e-5")
