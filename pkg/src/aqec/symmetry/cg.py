"""Clebsch–Gordan vectors for the conj(u) ⊗ u ⊗ u action on three qubits.

The basis splits C⁸ into a four-dimensional spin-3/2 sector (v1..v4) and two
spin-1/2 doublets (v5, v6) and (v7, v8).  The two doublets carry the same
representation with aligned bases, which is what makes them usable as an
alignment reference for the multiplicity spaces of the logical sector.
"""
from __future__ import annotations

import numpy as np

_S2, _S3, _S6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)

# (coefficient, bit string) terms per vector
_TERMS = [
    [(1.0, "100")],
    [(-1 / _S3, "101"), (-1 / _S3, "110"), (1 / _S3, "000")],
    [(-1 / _S3, "111"), (1 / _S3, "001"), (1 / _S3, "010")],
    [(1.0, "011")],
    [(-1 / _S6, "101"), (-1 / _S6, "110"), (-2 / _S6, "000")],
    [(1 / _S6, "001"), (1 / _S6, "010"), (2 / _S6, "111")],
    [(-1 / _S2, "101"), (1 / _S2, "110")],
    [(1 / _S2, "010"), (-1 / _S2, "001")],
]

SECTORS = ((0, 4), (4, 6), (6, 8))


def cg_basis_lll() -> list[np.ndarray]:
    out = []
    for terms in _TERMS:
        v = np.zeros(8)
        for c, bits in terms:
            v[int(bits, 2)] += c
        out.append(v)
    return out


def cg_matrix() -> np.ndarray:
    """Columns v1..v8."""
    return np.column_stack(cg_basis_lll())


def sector_leakage(u: np.ndarray) -> float:
    """Off-sector mass of conj(u)⊗u⊗u in the vector basis; zero for every unitary u."""
    w = cg_matrix()
    r = w.T @ np.kron(np.kron(u.conj(), u), u) @ w
    mask = np.ones((8, 8), dtype=bool)
    for a, b in SECTORS:
        mask[a:b, a:b] = False
    return float(np.max(np.abs(r[mask])))


def doublet_mismatch(u: np.ndarray) -> float:
    """Difference between the two doublet blocks of conj(u)⊗u⊗u."""
    w = cg_matrix()
    r = w.T @ np.kron(np.kron(u.conj(), u), u) @ w
    return float(np.max(np.abs(r[4:6, 4:6] - r[6:8, 6:8])))
