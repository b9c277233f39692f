import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aqec.channels import (
    CodePair,
    amplitude_damping,
    channel_fidelity_value,
    channel_from_config,
    choi,
    choi_matrix,
    decoder_channel_from_choi,
    decoder_choi_from_channel,
    depolarizing,
    encoder_choi_from_channel,
    fidelity_from_kraus,
    identity_channel,
    iid_power,
    is_valid_code,
    kraus_channel,
    load_kraus_json,
    random_channel,
    replacement_depolarizing,
    save_kraus_json,
    trivial_code,
)
from aqec.qcore import PAULI, max_entangled, permute_array, ptrace_array, random_unitary

seeds = st.integers(0, 2**32 - 1)


def _choi_oracle(ch):
    # (id ⊗ N)(Φ) by applying the Kraus maps to each matrix unit
    d = ch.d_in
    out = np.zeros((d * ch.d_out, d * ch.d_out), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1
            out += np.kron(e, ch.apply(e)) / d
    return out


def test_depolarizing_kraus_form():
    ch = depolarizing(0.3)
    expect = [np.sqrt(0.7) * PAULI["I"]] + [np.sqrt(0.1) * PAULI[k] for k in "XYZ"]
    for k, e in zip(ch.kraus, expect):
        assert np.allclose(k, e)
    assert ch.is_cptp()


def test_depolarizing_zero_is_identity():
    assert np.allclose(choi_matrix(depolarizing(0.0)), max_entangled(2).mat)


def test_depolarizing_three_quarters_is_complete():
    assert np.allclose(choi_matrix(depolarizing(0.75)), np.eye(4) / 4)


def test_depolarizing_choi_spectrum():
    w = np.linalg.eigvalsh(choi_matrix(depolarizing(0.3)))
    assert np.allclose(sorted(w), sorted(np.linalg.eigvalsh(_choi_oracle(depolarizing(0.3)))))
    assert np.allclose(sorted(w), [0.1, 0.1, 0.1, 0.7])


def test_depolarizing_range():
    with pytest.raises(ValueError):
        depolarizing(1.2)
    with pytest.raises(ValueError):
        amplitude_damping(-0.1)


def test_replacement_form_matches_pauli_form():
    # (1-q) rho + q I/2 has Pauli probability 3q/4
    assert np.allclose(choi_matrix(replacement_depolarizing(0.4)), choi_matrix(depolarizing(0.3)))


def test_qutrit_depolarizing_is_replacement_channel(rng):
    ch = depolarizing(0.5, 3)
    q = 0.5 * 9 / 8
    rho = rng.standard_normal((3, 3))
    rho = rho @ rho.T
    rho /= np.trace(rho)
    assert np.allclose(ch.apply(rho), (1 - q) * rho + q * np.eye(3) / 3)


def test_amplitude_damping_examples():
    assert np.allclose(choi_matrix(amplitude_damping(0.0)), max_entangled(2).mat)
    out = amplitude_damping(1.0).apply(np.diag([0.2, 0.8]))
    assert np.allclose(out, np.diag([1.0, 0.0]))
    assert np.allclose(amplitude_damping(0.5).apply(np.diag([0.0, 1.0])), np.diag([0.5, 0.5]))


def test_amplitude_damping_choi_oracle():
    ch = amplitude_damping(0.3)
    assert np.allclose(choi_matrix(ch), _choi_oracle(ch), atol=1e-14)


def test_iid_power_identity():
    ch = iid_power(depolarizing(0.0), 3)
    assert ch.d_in == 8
    assert ch.in_layout.labels == ("q1", "q2", "q3")
    assert np.allclose(choi_matrix(ch), max_entangled(8).mat)
    assert iid_power(depolarizing(0.2), 1) is not None


def test_iid_power_choi_is_reordered_product():
    m = amplitude_damping(0.4)
    c1 = choi_matrix(m)
    c2 = choi_matrix(iid_power(m, 2))
    # C ⊗ C lives on (ref1, out1, ref2, out2); the power is ordered (ref1, ref2, out1, out2)
    expect = permute_array(np.kron(c1, c1), (2, 2, 2, 2), (0, 2, 1, 3))
    assert np.allclose(c2, expect)


def test_choi_layout_and_cptp_guard():
    c = choi(identity_channel())
    assert c.layout.labels == ("q'", "q")
    with pytest.raises(ValueError):
        kraus_channel([np.eye(2) * 2])


@given(seeds)
def test_choi_marginal_property(seed):
    rng = np.random.default_rng(seed)
    ch = random_channel(2, 3, rng)
    c = choi_matrix(ch)
    assert np.allclose(ptrace_array(c, (2, 3), [0]), np.eye(2) / 2, atol=1e-10)
    assert np.linalg.eigvalsh(c).min() > -1e-12
    assert np.allclose(c, _choi_oracle(ch))


@given(seeds)
def test_depolarizing_covariance(seed):
    rng = np.random.default_rng(seed)
    c = choi_matrix(depolarizing(0.37))
    for _ in range(4):
        u = random_unitary(2, rng)
        w = np.kron(u.conj(), u)
        assert np.max(np.abs(w @ c @ w.conj().T - c)) <= 1e-10


def test_fidelity_trivial_identity():
    assert abs(channel_fidelity_value(trivial_code(2, 2), identity_channel()) - 1) < 1e-12


@pytest.mark.parametrize("p", [0.0, 0.1, 0.3, 0.75])
def test_fidelity_trivial_depolarizing(p):
    assert abs(channel_fidelity_value(trivial_code(2, 2), depolarizing(p)) - (1 - p)) < 1e-12


def test_fidelity_complete_depolarizing(rng):
    enc = random_channel(2, 2, rng)
    dec = random_channel(2, 2, rng)
    pair = CodePair(encoder_choi_from_channel(enc), decoder_choi_from_channel(dec))
    assert abs(channel_fidelity_value(pair, depolarizing(0.75)) - 0.25) < 1e-12


@given(seeds)
def test_fidelity_matches_kraus_oracle(seed):
    rng = np.random.default_rng(seed)
    enc = random_channel(2, 4, rng)
    dec = random_channel(4, 2, rng)
    noise = iid_power(amplitude_damping(0.3), 2)
    pair = CodePair(encoder_choi_from_channel(enc), decoder_choi_from_channel(dec))
    val = channel_fidelity_value(pair, noise)
    assert abs(val - fidelity_from_kraus(enc, noise, dec)) < 1e-12
    assert -1e-8 <= val <= 1 + 1e-8


@given(seeds)
def test_fidelity_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    enc = random_channel(2, 2, rng)
    dec = random_channel(2, 2, rng)
    noise = amplitude_damping(0.2)
    u = random_unitary(2, rng)
    enc_u = kraus_channel([u @ k for k in enc.kraus])
    noise_u = kraus_channel([k @ u.conj().T for k in noise.kraus])
    a = fidelity_from_kraus(enc, noise, dec)
    b = fidelity_from_kraus(enc_u, noise_u, dec)
    pa = CodePair(encoder_choi_from_channel(enc_u), decoder_choi_from_channel(dec))
    assert abs(a - b) < 1e-9
    assert abs(channel_fidelity_value(pa, noise_u) - a) < 1e-9


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        channel_fidelity_value(trivial_code(2, 4), depolarizing(0.1))


def test_trivial_code_valid():
    pair = trivial_code(2, 8)
    assert is_valid_code(pair)
    assert max(pair.marginal_errors()) < 1e-14


def test_decoder_choi_roundtrip(rng):
    dec = random_channel(4, 2, rng)
    back = decoder_channel_from_choi(decoder_choi_from_channel(dec))
    rho = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = rho @ rho.conj().T
    assert np.allclose(back.apply(rho), dec.apply(rho))


def test_codepair_json_roundtrip(rng):
    pair = CodePair(encoder_choi_from_channel(random_channel(2, 2, rng)),
                    decoder_choi_from_channel(random_channel(2, 2, rng)), 0.5, "seesaw")
    back = CodePair.from_json(json.loads(json.dumps(pair.to_json())))
    assert np.allclose(back.encoder_choi.mat, pair.encoder_choi.mat)
    assert back.provenance == "seesaw" and back.fidelity == 0.5


def test_kraus_json_roundtrip(tmp_path):
    ch = amplitude_damping(0.25)
    path = tmp_path / "ad.json"
    save_kraus_json(ch, path)
    back = load_kraus_json(path)
    assert np.allclose(choi_matrix(back), choi_matrix(ch))
    cfg = channel_from_config({"type": "kraus", "path": str(path), "qubits": 2})
    assert cfg.d_in == 4


def test_channel_config_types():
    assert np.allclose(choi_matrix(channel_from_config({"type": "dep", "param": 0.4})),
                       choi_matrix(depolarizing(0.3)))
    assert channel_from_config({"type": "ad", "param": 0.1, "qubits": 3}).d_in == 8
    with pytest.raises(ValueError):
        channel_from_config({"type": "erasure", "param": 0.1})
