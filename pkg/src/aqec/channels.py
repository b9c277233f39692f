"""Quantum channels, Choi matrices and the code-fidelity functional.

Choi convention: ``C = (id ⊗ N)(Φ)`` with Φ the normalized maximally entangled
state and the reference copy of the input on the left.

Code pairs follow the same convention.  The encoder Choi lives on ``(Lb, Pb)``
with ``tr_Pb C_E = I/d_L``.  The decoder Choi lives on ``(L, P)`` and is the
Choi matrix of the recovery map P -> L with its reference moved to the right,
so ``tr_L C_D = I/d_P``.  With ``A = Φ_{L Lb} ⊗ C_N`` (C_N's reference on Pb,
its output on P) the entanglement fidelity of ``D∘N∘E`` is

    F = d_P² tr[A (C_D^T ⊗ C_E^T)].
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .qcore import (
    PAULI,
    Op,
    SystemLayout,
    is_hermitian,
    permute_array,
    ptrace_array,
    real_if_close,
)

CPTP_TOL = 1e-10


@dataclass(frozen=True)
class QuantumChannel:
    kraus: tuple[np.ndarray, ...] = field(repr=False)
    in_layout: SystemLayout
    out_layout: SystemLayout
    name: str = "channel"

    def __post_init__(self):
        ks = tuple(real_if_close(np.asarray(k, dtype=complex)) for k in self.kraus)
        din, dout = self.in_layout.dim, self.out_layout.dim
        for k in ks:
            if k.shape != (dout, din):
                raise ValueError(f"Kraus operator of shape {k.shape}, expected {(dout, din)}")
        object.__setattr__(self, "kraus", ks)

    @property
    def d_in(self) -> int:
        return self.in_layout.dim

    @property
    def d_out(self) -> int:
        return self.out_layout.dim

    def completeness_error(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.d_in))))

    def is_cptp(self, tol: float = CPTP_TOL) -> bool:
        return self.completeness_error() <= tol

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def is_real(self) -> bool:
        return all(not np.iscomplexobj(k) for k in self.kraus)


@dataclass(frozen=True)
class CodePair:
    encoder_choi: Op
    decoder_choi: Op
    fidelity: float = float("nan")
    provenance: str = "manual"

    def marginal_errors(self) -> tuple[float, float]:
        e, d = self.encoder_choi, self.decoder_choi
        d_lb = e.layout.dims[0]
        d_p = d.layout.dims[1]
        enc = ptrace_array(e.mat, e.layout.dims, [0]) - np.eye(d_lb) / d_lb
        dec = ptrace_array(d.mat, d.layout.dims, [1]) - np.eye(d_p) / d_p
        return float(np.max(np.abs(enc))), float(np.max(np.abs(dec)))

    def to_json(self) -> dict:
        def enc(m):
            m = np.asarray(m, dtype=complex)
            return [[[float(z.real), float(z.imag)] for z in row] for row in m]

        return {
            "encoder_choi": {"labels": list(self.encoder_choi.layout.labels),
                             "dims": list(self.encoder_choi.layout.dims),
                             "matrix": enc(self.encoder_choi.mat)},
            "decoder_choi": {"labels": list(self.decoder_choi.layout.labels),
                             "dims": list(self.decoder_choi.layout.dims),
                             "matrix": enc(self.decoder_choi.mat)},
            "fidelity": self.fidelity,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CodePair":
        def dec(block):
            m = np.array([[complex(re, im) for re, im in row] for row in block["matrix"]])
            layout = SystemLayout(tuple(zip(block["labels"], block["dims"])))
            return Op(layout, real_if_close(m))

        return cls(dec(data["encoder_choi"]), dec(data["decoder_choi"]),
                   float(data["fidelity"]), data.get("provenance", "manual"))


# ---------------------------------------------------------------------------
# channel zoo
# ---------------------------------------------------------------------------

def _qubit_layout(label: str = "q", d: int = 2) -> SystemLayout:
    return SystemLayout(((label, d),))


def identity_channel(d: int = 2, label: str = "q") -> QuantumChannel:
    lay = _qubit_layout(label, d)
    return QuantumChannel((np.eye(d),), lay, lay, "identity")


def weyl_operators(d: int) -> list[np.ndarray]:
    shift = np.roll(np.eye(d), 1, axis=0)
    omega = np.exp(2j * np.pi / d)
    clock = np.diag(omega ** np.arange(d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            for a in range(d) for b in range(d)]


def depolarizing(p: float, d: int = 2, label: str = "q") -> QuantumChannel:
    """Depolarizing noise with total error probability ``p``.

    For qubits the Kraus set is the Pauli form.  In general the map is
    ``(1-q) rho + q I/d`` with ``q = p d²/(d²-1)``, which gives q = 4p/3 on qubits.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing parameter p={p} outside [0, 1]")
    if d < 2:
        raise ValueError("depolarizing channel needs d >= 2")
    lay = _qubit_layout(label, d)
    if d == 2:
        ks = [np.sqrt(1 - p) * PAULI["I"]] + [np.sqrt(p / 3) * PAULI[s] for s in "XYZ"]
    else:
        w = weyl_operators(d)
        ks = [np.sqrt(1 - p) * w[0]] + [np.sqrt(p / (d * d - 1)) * u for u in w[1:]]
    return QuantumChannel(tuple(ks), lay, lay, f"depolarizing(p={p:g})")


def replacement_depolarizing(q: float, d: int = 2, label: str = "q") -> QuantumChannel:
    """``rho -> (1-q) rho + q I/d``, the parametrization of fidelity-versus-noise sweeps."""
    if not 0 <= q <= 1:
        raise ValueError(f"depolarizing parameter q={q} outside [0, 1]")
    ch = depolarizing(q * (d * d - 1) / (d * d), d, label)
    return QuantumChannel(ch.kraus, ch.in_layout, ch.out_layout, f"dep(q={q:g})")


def amplitude_damping(gamma: float, label: str = "q") -> QuantumChannel:
    if not 0 <= gamma <= 1:
        raise ValueError(f"damping parameter gamma={gamma} outside [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    lay = _qubit_layout(label)
    return QuantumChannel((k0, k1), lay, lay, f"amplitude_damping(gamma={gamma:g})")


def kraus_channel(kraus: Sequence[np.ndarray], label_in: str = "q", label_out: str | None = None,
                  name: str = "kraus") -> QuantumChannel:
    kraus = [np.asarray(k) for k in kraus]
    dout, din = kraus[0].shape
    lin = _qubit_layout(label_in, din)
    lout = _qubit_layout(label_out or label_in, dout)
    ch = QuantumChannel(tuple(kraus), lin, lout, name)
    if not ch.is_cptp(1e-8):
        raise ValueError(f"Kraus set is not trace preserving (error {ch.completeness_error():.2e})")
    return ch


def iid_power(ch: QuantumChannel, copies: int) -> QuantumChannel:
    if copies < 1:
        raise ValueError("copies must be >= 1")
    if copies == 1:
        return ch

    def suffixed(layout: SystemLayout) -> SystemLayout:
        return SystemLayout(tuple((f"{lab}{i}", d) for i in range(1, copies + 1) for lab, d in layout.systems))

    ks = []
    for combo in itertools.product(ch.kraus, repeat=copies):
        k = combo[0]
        for nxt in combo[1:]:
            k = np.kron(k, nxt)
        ks.append(k)
    return QuantumChannel(tuple(ks), suffixed(ch.in_layout), suffixed(ch.out_layout),
                          f"{ch.name}^{copies}")


def channel_from_config(cfg: dict) -> QuantumChannel:
    """Build the noise described by ``{"type", "param", "qubits"}`` (plus "path" for Kraus files).

    "depolarizing" (alias "pauli") takes the total Pauli error probability; "dep"
    takes the replacement probability q of ``(1-q) rho + q I/2``.
    """
    kind = cfg["type"]
    qubits = int(cfg.get("qubits", 1))
    if kind in ("depolarizing", "pauli"):
        base = depolarizing(float(cfg["param"]))
    elif kind == "dep":
        base = replacement_depolarizing(float(cfg["param"]))
    elif kind in ("amplitude_damping", "ad"):
        base = amplitude_damping(float(cfg["param"]))
    elif kind == "kraus":
        base = load_kraus_json(cfg["path"])
    else:
        raise ValueError(f"unknown channel type {kind!r}")
    return iid_power(base, qubits)


def load_kraus_json(path: str | Path) -> QuantumChannel:
    """Read a list of row-major complex matrices stored as [[re, im], ...] entries."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data["kraus"]
    mats = [np.array([[complex(re, im) for re, im in row] for row in m]) for m in data]
    return kraus_channel(mats, name=f"kraus:{Path(path).name}")


def save_kraus_json(ch: QuantumChannel, path: str | Path) -> None:
    mats = [[[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(k, dtype=complex)]
            for k in ch.kraus]
    Path(path).write_text(json.dumps({"kraus": mats}))


def random_channel(d_in: int, d_out: int, rng: np.random.Generator, n_kraus: int = 3,
                   real: bool = False) -> QuantumChannel:
    """Random CPTP map from a Haar-like isometry."""
    g = rng.standard_normal((d_out * n_kraus, d_in))
    if not real:
        g = g + 1j * rng.standard_normal((d_out * n_kraus, d_in))
    q, _ = np.linalg.qr(g)
    ks = [q[i * d_out:(i + 1) * d_out] for i in range(n_kraus)]
    return QuantumChannel(tuple(ks), _qubit_layout("in", d_in), _qubit_layout("out", d_out), "random")


# ---------------------------------------------------------------------------
# Choi matrices
# ---------------------------------------------------------------------------

def choi_matrix(ch: QuantumChannel) -> np.ndarray:
    """Normalized Choi matrix as a bare array indexed (ref, out)."""
    din = ch.d_in
    # vec(K) in (ref, out) ordering: v[i, j] = K[j, i]
    c = sum(np.outer(k.T.reshape(-1), k.T.reshape(-1).conj()) for k in ch.kraus) / din
    return real_if_close(c)


def choi(ch: QuantumChannel, ref_suffix: str = "'") -> Op:
    if not ch.is_cptp(1e-8):
        raise ValueError(f"channel is not CPTP (completeness error {ch.completeness_error():.2e})")
    ref = SystemLayout(tuple((lab + ref_suffix, d) for lab, d in ch.in_layout.systems))
    out = ch.out_layout
    if set(ref.labels) & set(out.labels):
        out = out.relabel({lab: lab + "_out" for lab in out.labels})
    return Op(ref.concat(out), choi_matrix(ch), True)


def channel_from_choi(c: np.ndarray, d_in: int, d_out: int, tol: float = 1e-12) -> QuantumChannel:
    """Kraus form of the channel whose normalized (ref, out) Choi matrix is ``c``."""
    w, v = np.linalg.eigh((c + c.conj().T) / 2)
    ks = []
    for lam, vec in zip(w, v.T):
        if lam > tol:
            ks.append(np.sqrt(d_in * lam) * vec.reshape(d_in, d_out).T)
    return QuantumChannel(tuple(ks), _qubit_layout("in", d_in), _qubit_layout("out", d_out), "from_choi")


# ---------------------------------------------------------------------------
# code fidelity
# ---------------------------------------------------------------------------

def fidelity_operator(noise: QuantumChannel, d_l: int) -> np.ndarray:
    """``Φ_{L Lb} ⊗ C_N`` arranged on (L, P, Lb, Pb); P is the noise output, Pb its input."""
    d_p = noise.d_in
    if noise.d_out != d_p:
        raise ValueError("noise must map a system to one of the same dimension")
    phi = np.eye(d_l).reshape(-1) / np.sqrt(d_l)
    phi = np.outer(phi, phi)
    cn = choi_matrix(noise)  # (Pb, P)
    a = np.kron(phi, cn)  # (L, Lb, Pb, P)
    return permute_array(a, (d_l, d_l, d_p, d_p), (0, 3, 1, 2))


def channel_fidelity_value(pair: CodePair, noise: QuantumChannel, warn_range: bool = True) -> float:
    enc, dec = pair.encoder_choi, pair.decoder_choi
    if len(enc.layout) != 2 or len(dec.layout) != 2:
        raise ValueError("encoder and decoder Choi matrices must be bipartite")
    d_lb, d_pb = enc.layout.dims
    d_l, d_p = dec.layout.dims
    if d_lb != d_l or d_pb != d_p or noise.d_in != d_p:
        raise ValueError(f"incompatible dimensions: encoder {enc.layout.dims}, decoder {dec.layout.dims}, noise {noise.d_in}")
    a = fidelity_operator(noise, d_l)
    rho = np.kron(dec.mat.T, enc.mat.T)
    val = float(np.real(np.sum(a * rho.T))) * d_p ** 2
    if warn_range and not (-1e-8 <= val <= 1 + 1e-8):
        import warnings

        warnings.warn(f"channel fidelity {val} outside [0, 1]")
    return val


def fidelity_from_kraus(encoder: QuantumChannel, noise: QuantumChannel, decoder: QuantumChannel) -> float:
    """Entanglement fidelity of decoder∘noise∘encoder via Σ_k |tr K_k|² / d²."""
    d = encoder.d_in
    total = 0.0
    for e in encoder.kraus:
        for n in noise.kraus:
            for r in decoder.kraus:
                total += abs(np.trace(r @ n @ e)) ** 2
    return float(total / d ** 2)


def encoder_choi_from_channel(enc: QuantumChannel) -> Op:
    lay = SystemLayout((("Lb", enc.d_in), ("Pb", enc.d_out)))
    return Op(lay, choi_matrix(enc), True)


def decoder_choi_from_channel(dec: QuantumChannel) -> Op:
    """Decoder Choi on (L, P) for a recovery map P -> L."""
    c = choi_matrix(dec)  # (P, L)
    d_p, d_l = dec.d_in, dec.d_out
    lay = SystemLayout((("L", d_l), ("P", d_p)))
    return Op(lay, permute_array(c, (d_p, d_l), (1, 0)), True)


def decoder_channel_from_choi(dc: Op) -> QuantumChannel:
    d_l, d_p = dc.layout.dims
    c = permute_array(dc.mat, (d_l, d_p), (1, 0))
    return channel_from_choi(c, d_p, d_l)


def encoder_channel_from_choi(ec: Op) -> QuantumChannel:
    d_l, d_p = ec.layout.dims
    return channel_from_choi(ec.mat, d_l, d_p)


def trivial_code(d_l: int, d_p: int) -> CodePair:
    """Encode into the first d_L levels of P and decode by the matching projection."""
    iso = np.zeros((d_p, d_l))
    iso[:d_l, :d_l] = np.eye(d_l)
    enc = QuantumChannel((iso,), _qubit_layout("L", d_l), _qubit_layout("P", d_p), "embed")
    proj = iso.T
    rest = [np.outer(np.eye(d_l)[0], np.eye(d_p)[j]) for j in range(d_l, d_p)]
    dec = QuantumChannel(tuple([proj] + rest), _qubit_layout("P", d_p), _qubit_layout("L", d_l), "project")
    return CodePair(encoder_choi_from_channel(enc), decoder_choi_from_channel(dec), provenance="trivial")


def is_valid_code(pair: CodePair, tol: float = 1e-8) -> bool:
    for m in (pair.encoder_choi.mat, pair.decoder_choi.mat):
        if not is_hermitian(m, 1e-10) or np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -tol:
            return False
        if abs(np.trace(m) - 1) > tol:
            return False
    return max(pair.marginal_errors()) <= tol
