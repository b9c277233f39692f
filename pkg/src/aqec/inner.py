"""Inner bounds: alternating encoder/decoder optimization and rounding of outer solutions.

Every pair returned here is a valid code up to solver tolerance, and its
fidelity is evaluated directly from the two Choi matrices, so the values are
achievable (inner) rather than relaxed.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from math import prod
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .channels import CodePair, QuantumChannel, channel_fidelity_value, fidelity_operator, trivial_code
from .hierarchy import HierarchyProblem, OuterBoundResult, default_ppt_cuts, solve_outer
from .linmap import PartialTrace, hermitian_rows, target_rhs
from .qcore import PAULI, Op, SystemLayout, ptrace_array
from .sdp import SdpProblem, SolverOptions, Status, solve

OUTCOME_GUARD = 10 ** 6
PROB_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------

@dataclass
class Povm:
    effects: list[np.ndarray]
    labels: list[tuple]
    dim: int

    def completeness_error(self) -> float:
        return float(np.max(np.abs(sum(self.effects) - np.eye(self.dim))))

    def gram_rank(self, tol: float = 1e-10) -> int:
        vecs = np.array([e.reshape(-1) for e in self.effects])
        return int(np.linalg.matrix_rank(vecs, tol=tol))

    @property
    def informationally_complete(self) -> bool:
        return self.gram_rank() == self.dim ** 2

    def __len__(self) -> int:
        return len(self.effects)


TETRAHEDRON = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)


def tetrahedral_effects() -> list[np.ndarray]:
    sig = [PAULI["X"], PAULI["Y"], PAULI["Z"]]
    return [(np.eye(2) + sum(s * p for s, p in zip(v, sig))) / 4 for v in TETRAHEDRON]


def ic_povm_qubits(k: int) -> Povm:
    """k-fold tensor power of the four-outcome tetrahedral measurement."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if 4 ** k > OUTCOME_GUARD:
        raise ValueError(f"4^{k} outcomes exceed the guard {OUTCOME_GUARD}")
    single = tetrahedral_effects()
    effects, labels = [np.ones((1, 1))], [()]
    for _ in range(k):
        effects = [np.kron(e, s) for e in effects for s in single]
        labels = [lab + (i,) for lab in labels for i in range(4)]
    return Povm(effects, labels, 2 ** k)


# ---------------------------------------------------------------------------
# see-saw
# ---------------------------------------------------------------------------

@dataclass
class SeesawResult:
    pair: CodePair
    history: list[float]
    iterations: int
    status: Status
    starts: int = 1


def _marginal_fix(c: np.ndarray, d_a: int, d_b: int, traced: int) -> np.ndarray:
    """Rescale a PSD operator on (A, B) so that its marginal on the untraced side is exactly I/d."""
    c = (c + c.conj().T) / 2
    w, v = np.linalg.eigh(c)
    c = (v * np.clip(w, 0, None)) @ v.conj().T
    keep = 1 - traced
    d_keep = (d_a, d_b)[keep]
    s = ptrace_array(c, (d_a, d_b), [keep]) * d_keep   # ≈ identity
    w, v = np.linalg.eigh((s + s.conj().T) / 2)
    if w.min() <= 1e-14:
        raise np.linalg.LinAlgError("marginal is singular; cannot normalize")
    r = (v / np.sqrt(w)) @ v.conj().T
    k = np.kron(r, np.eye(d_b)) if keep == 0 else np.kron(np.eye(d_a), r)
    out = k @ c @ k.conj().T
    return (out + out.conj().T) / 2


def valid_pair(dec: np.ndarray, enc: np.ndarray, d_l: int, d_p: int, noise: QuantumChannel,
               provenance: str) -> CodePair:
    """Project onto exact marginals and evaluate the fidelity directly."""
    dec = _marginal_fix(dec, d_l, d_p, traced=0)
    enc = _marginal_fix(enc, d_l, d_p, traced=1)
    pair = CodePair(Op(SystemLayout((("Lb", d_l), ("Pb", d_p))), enc, True),
                    Op(SystemLayout((("L", d_l), ("P", d_p))), dec, True), provenance=provenance)
    return CodePair(pair.encoder_choi, pair.decoder_choi, channel_fidelity_value(pair, noise), provenance)


def _choi_sdp(g: np.ndarray, d_a: int, d_b: int, traced: int, target_dim: int, tol: float,
              options: SolverOptions | None):
    """max ⟨g, X⟩ over PSD X on (A,B) with the untraced marginal fixed to identity/d."""
    keep = [1 - traced]
    lm = PartialTrace((d_a, d_b), keep)
    real = not np.iscomplexobj(g)
    rows = hermitian_rows(lm.matrix(), lm.d_out, lm.d_in, real)
    rhs = target_rhs(np.eye(target_dim) / target_dim, real)
    p = SdpProblem((d_a * d_b,), [g], [rows], rhs, name="seesaw-step")
    return solve(p, tol=tol, options=options)


def _half_objectives(a: np.ndarray, d_l: int, d_p: int):
    a4 = a.reshape(d_l * d_p, d_l * d_p, d_l * d_p, d_l * d_p)

    def for_decoder(enc):
        # G = tr_{LbPb}[A (I ⊗ C_E^T)], objective tr[G Dc^T] = ⟨conj G, Dc⟩
        g = np.einsum("icjd,cd->ij", a4, enc)
        return np.conj(g) * d_p ** 2

    def for_encoder(dec):
        g = np.einsum("icjd,ij->cd", a4, dec)
        return np.conj(g) * d_p ** 2

    return for_decoder, for_encoder


def random_code(d_l: int, d_p: int, rng: np.random.Generator, noise: QuantumChannel) -> CodePair:
    def wishart(d):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        return g @ g.conj().T

    return valid_pair(wishart(d_l * d_p), wishart(d_l * d_p), d_l, d_p, noise, "random")


def _single_seesaw(noise: QuantumChannel, d_l: int, init: CodePair, max_iters: int, tol: float,
                   solver_tol: float, options) -> SeesawResult:
    d_p = noise.d_in
    a = fidelity_operator(noise, d_l)
    f_dec, f_enc = _half_objectives(a, d_l, d_p)
    best = valid_pair(init.decoder_choi.mat, init.encoder_choi.mat, d_l, d_p, noise, "seesaw")
    history = [best.fidelity]
    status = Status.OPTIMAL
    it = 0
    for it in range(1, max_iters + 1):
        enc = best.encoder_choi.mat
        sol = _choi_sdp(f_dec(enc), d_l, d_p, 0, d_p, solver_tol, options)
        if sol.status != Status.OPTIMAL and not sol.primal:
            status = Status.INACCURATE
            break
        cand = valid_pair(sol.primal[0], enc, d_l, d_p, noise, "seesaw")
        if cand.fidelity >= best.fidelity:
            best = cand
        sol = _choi_sdp(f_enc(best.decoder_choi.mat), d_l, d_p, 1, d_l, solver_tol, options)
        if sol.status != Status.OPTIMAL and not sol.primal:
            status = Status.INACCURATE
            break
        cand = valid_pair(best.decoder_choi.mat, sol.primal[0], d_l, d_p, noise, "seesaw")
        if cand.fidelity >= best.fidelity:
            best = cand
        gain = best.fidelity - history[-1]
        history.append(best.fidelity)
        if gain < tol:
            break
    return SeesawResult(best, history, it, status)


def seesaw_run(noise: QuantumChannel, d_l: int, init: CodePair | str | None = "random", max_iters: int = 50,
               tol: float = 1e-9, starts: int = 20, seed: int = 2024, solver_tol: float = 1e-9,
               options: SolverOptions | None = None) -> SeesawResult:
    """Best of several see-saw runs; ``init`` is a pair or ``"random"`` (random starts plus the trivial code)."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    d_p = noise.d_in
    if isinstance(init, CodePair):
        inits = [init]
    else:
        rng = np.random.default_rng(seed)
        inits = [trivial_code(d_l, d_p)] + [random_code(d_l, d_p, rng, noise) for _ in range(starts)]
    best = None
    for pair in inits:
        res = _single_seesaw(noise, d_l, pair, max_iters, tol, solver_tol, options)
        if best is None or res.pair.fidelity > best.pair.fidelity:
            best = res
    best.starts = len(inits)
    return best


def seesaw(noise: QuantumChannel, d_l: int, init: CodePair | str | None = "random", max_iters: int = 50,
           tol: float = 1e-9, **kw) -> CodePair:
    return seesaw_run(noise, d_l, init, max_iters, tol, **kw).pair


# ---------------------------------------------------------------------------
# rounding of outer solutions
# ---------------------------------------------------------------------------

@dataclass
class Outcome:
    measured: int
    label: tuple
    probability: float
    value: float


@dataclass
class RoundingResult:
    best_pair: CodePair
    mixture_value: float
    per_outcome: list[Outcome]
    dropped_mass: float
    mixtures: dict = field(default_factory=dict)     # measured copies -> mixture value
    marginal_error: float = 0.0


def _copy_povm(dim: int) -> Povm:
    k = int(round(np.log2(dim)))
    if 2 ** k != dim:
        raise ValueError("rounding measurements are implemented for copies made of qubits")
    return ic_povm_qubits(k)


def round_outer(primal: Op | np.ndarray, noise: QuantumChannel, d_l: int, level: int,
                povm: Povm | None = None, max_measured: int | None = None) -> RoundingResult:
    """Measure copies 2..m+1 of an outer solution and keep the best conditional product point."""
    rho = primal.mat if isinstance(primal, Op) else np.asarray(primal)
    d_p = noise.d_in
    dc = d_l * d_p
    n = level
    if n < 2:
        raise ValueError("rounding needs at least two copies (level >= 2)")
    if rho.shape != (dc ** (n + 1),) * 2:
        raise ValueError("primal does not match the level-n layout")
    povm = povm or _copy_povm(dc)
    if povm.dim != dc:
        raise ValueError("measurement acts on the wrong dimension")
    a4 = fidelity_operator(noise, d_l).reshape(dc, dc, dc, dc)
    top = n - 1 if max_measured is None else min(n - 1, max_measured)
    outcomes: list[Outcome] = []
    mixtures = {}
    best = (-np.inf, None, None, None)
    dropped_total = 0.0
    worst_marg = 0.0
    eff = np.array(povm.effects)
    for m in range(1, top + 1):
        count = len(povm) ** m
        if count > OUTCOME_GUARD:
            raise ValueError(f"{count} outcomes for {m} measured copies exceed the guard")
        # keep LP, copy 1 and copies 2..m+1
        keep = list(range(m + 2))
        tau = ptrace_array(rho, (dc,) * (n + 1), keep)
        dm = dc ** m
        tau = tau.reshape(dc, dc, dm, dc, dc, dm)
        t_lp = np.einsum("icajcb->iajb", tau)
        t_c = np.einsum("icaidb->cadb", tau)
        labels = list(itertools.product(range(len(povm)), repeat=m))
        kept_mass, mix = 0.0, 0.0
        for s in range(0, len(labels), 4096):
            chunk = labels[s:s + 4096]
            ez = np.array([_kron_effects(eff, z) for z in chunk])
            p = np.real(np.einsum("iaib,zba->z", t_lp, ez))
            x = np.einsum("iajb,zba->zij", t_lp, ez)
            y = np.einsum("cadb,zba->zcd", t_c, ez)
            for z, pz, xz, yz in zip(chunk, p, x, y):
                if pz < PROB_FLOOR:
                    dropped_total += max(pz, 0.0)
                    continue
                xz, yz = xz / pz, yz / pz
                val = float(np.real(np.einsum("icjd,ji,dc->", a4, xz, yz))) * d_p ** 2
                worst_marg = max(worst_marg, _marg_err(xz, yz, d_l, d_p))
                outcomes.append(Outcome(m, tuple(int(v) for v in z), float(pz), val))
                kept_mass += pz
                mix += pz * val
                if val > best[0] or (val == best[0] and best[3] is not None and (m, z) < best[3]):
                    best = (val, xz, yz, (m, z))
        if kept_mass <= 0:
            raise ValueError("every outcome has negligible probability; the primal is degenerate")
        mixtures[m] = mix / kept_mass
    val, xz, yz, _ = best
    dec, enc = xz.T, yz.T
    pair = CodePair(Op(SystemLayout((("Lb", d_l), ("Pb", d_p))), (enc + enc.conj().T) / 2),
                    Op(SystemLayout((("L", d_l), ("P", d_p))), (dec + dec.conj().T) / 2), val, "rounded")
    return RoundingResult(pair, max(mixtures.values()), outcomes, dropped_total, mixtures, worst_marg)


def _kron_effects(eff: np.ndarray, z: Sequence[int]) -> np.ndarray:
    out = eff[z[0]]
    for i in z[1:]:
        out = np.kron(out, eff[i])
    return out


def _marg_err(x: np.ndarray, y: np.ndarray, d_l: int, d_p: int) -> float:
    # x plays Dc^T on (L,P), y plays C_E^T on (Lb,Pb)
    e1 = ptrace_array(x, (d_l, d_p), [1]) - np.eye(d_p) / d_p
    e2 = ptrace_array(y, (d_l, d_p), [0]) - np.eye(d_l) / d_l
    return float(max(np.max(np.abs(e1)), np.max(np.abs(e2))))


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    outer: OuterBoundResult
    inner: CodePair
    gap: float
    rounding: RoundingResult | None
    seesaw: SeesawResult
    seconds: float


def warm_started_pipeline(noise: QuantumChannel, d_l: int = 2, n: int = 1, ppt: bool = False,
                          ns_a2b: bool = False, variant: str = "prod", symmetry: str = "auto",
                          tol: float = 1e-8, seed: int = 2024, max_iters: int = 30,
                          starts: int = 5, ppt_cuts: bool = False) -> PipelineResult:
    """Outer solve, rounding of its primal (n >= 2), then see-saw refinement.

    ``ppt`` imposes PPT on the marginal LP:(LbPb)^(1); ``ppt_cuts`` adds the
    cuts on the full extension.
    """
    t0 = time.perf_counter()
    hp = HierarchyProblem(noise, d_l, n, default_ppt_cuts(n) if ppt_cuts else (), ns_a2b, False, variant,
                          ppt_marginal=ppt)
    outer = solve_outer(hp, symmetry, tol, seed)
    rounding = None
    if n >= 2 and outer.primal_state is not None:
        rounding = round_outer(outer.primal_state, noise, d_l, n)
        init = rounding.best_pair
        ss = seesaw_run(noise, d_l, init, max_iters, seed=seed)
        alt = seesaw_run(noise, d_l, "random", max_iters, starts=starts, seed=seed)
        if alt.pair.fidelity > ss.pair.fidelity:
            ss = alt
    else:
        ss = seesaw_run(noise, d_l, "random", max_iters, starts=starts, seed=seed)
    inner = CodePair(ss.pair.encoder_choi, ss.pair.decoder_choi, ss.pair.fidelity,
                     "warm-started" if rounding is not None else "seesaw")
    return PipelineResult(outer, inner, outer.value - inner.fidelity, rounding, ss, time.perf_counter() - t0)
