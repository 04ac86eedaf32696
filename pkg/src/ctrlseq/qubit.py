"""Single-qubit algebra: Pauli matrices, SU(2) exponential/logarithm, Bloch maps.

Unitaries are plain ``(2, 2)`` complex ndarrays (stacks ``(..., 2, 2)`` where
noted), Bloch vectors are real ``(3,)`` arrays and pure states are ``(2,)``
complex arrays.  Comparisons between unitaries are made up to a global phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

__all__ = [
    "NumericPolicy",
    "POLICY",
    "I2",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "PAULI",
    "KET_H",
    "KET_V",
    "pauli_dot",
    "is_unitary",
    "is_hermitian",
    "su2_exp",
    "pauli_decompose",
    "adjoint_rotate",
    "adjoint_matrix",
    "SU2Log",
    "su2_log",
    "phase_overlap",
    "equal_up_to_phase",
    "bloch_vector",
    "state_from_bloch",
    "commutator",
]


@dataclass(frozen=True)
class NumericPolicy:
    """Default tolerances shared by the whole package."""

    atol: float = 1e-10
    unitary_atol: float = 1e-12
    axis_atol: float = 1e-9
    degenerate_atol: float = 1e-12


POLICY = NumericPolicy()

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

KET_H = np.array([1, 0], dtype=complex)
KET_V = np.array([0, 1], dtype=complex)


def pauli_dot(v: ArrayLike) -> np.ndarray:
    """Return ``v . sigma`` for a Bloch vector (or a stack of them)."""
    v = np.asarray(v)
    return np.einsum("...k,kij->...ij", v.astype(complex), PAULI)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_unitary(u: ArrayLike, tol: float = POLICY.unitary_atol) -> bool:
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        return False
    return bool(np.max(np.abs(u.conj().T @ u - I2)) <= tol)


def is_hermitian(m: ArrayLike, tol: float = POLICY.unitary_atol) -> bool:
    m = np.asarray(m, dtype=complex)
    return m.shape == (2, 2) and bool(np.max(np.abs(m - m.conj().T)) <= tol)


def su2_exp(axis: ArrayLike, angle: ArrayLike) -> np.ndarray:
    """``exp(-i * angle * axis . sigma) = cos(angle) I - i sin(angle) axis . sigma``.

    Broadcasts over leading dimensions of ``axis`` (``(..., 3)``) and ``angle``.
    """
    axis = np.asarray(axis, dtype=float)
    norms = np.linalg.norm(axis, axis=-1)
    if np.any(np.abs(norms - 1.0) > POLICY.axis_atol):
        raise ValueError(f"su2_exp needs a unit axis, got norm(s) {norms}")
    angle = np.asarray(angle, dtype=float)[..., None, None]
    return np.cos(angle) * I2 - 1j * np.sin(angle) * pauli_dot(axis)


def pauli_decompose(m: ArrayLike, tol: float = POLICY.unitary_atol) -> tuple[float, np.ndarray]:
    """Split a hermitian matrix as ``scalar * I + vec . sigma``."""
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m, tol):
        raise ValueError("pauli_decompose expects a hermitian 2x2 matrix")
    scalar = 0.5 * np.trace(m).real
    vec = 0.5 * np.einsum("kij,ji->k", PAULI, m).real
    return float(scalar), vec


def adjoint_rotate(u: ArrayLike, v: ArrayLike) -> np.ndarray:
    """Bloch vector ``w`` with ``U^dagger (v . sigma) U = w . sigma``."""
    u = np.asarray(u, dtype=complex)
    m = u.conj().T @ pauli_dot(v) @ u
    return 0.5 * np.einsum("kij,ji->k", PAULI, m).real


def adjoint_matrix(u: ArrayLike) -> np.ndarray:
    """3x3 real matrix ``R`` with ``adjoint_rotate(U, v) == R @ v``; broadcasts over stacks."""
    u = np.asarray(u, dtype=complex)
    conj = np.einsum("...ba,jbc,...cd->...jad", u.conj(), PAULI, u)
    return 0.5 * np.einsum("iab,...jba->...ij", PAULI, conj).real


class SU2Log(NamedTuple):
    angle: float
    axis: np.ndarray
    degenerate: bool


def su2_log(u: ArrayLike) -> SU2Log:
    """Invert :func:`su2_exp`: ``U ~ exp(-i angle axis . sigma)`` up to global phase.

    A matrix already in SU(2) is used as is, so ``angle`` covers ``[0, pi]``; any
    other unitary is first divided by the principal square root of its
    determinant.  For ``U ~ +-I`` the axis is meaningless and ``(0, 0, 1)`` is
    returned with ``degenerate=True``.
    """
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u, tol=1e-9):
        raise ValueError("su2_log expects a unitary 2x2 matrix")
    det = np.linalg.det(u)
    if abs(det - 1.0) > 1e-12:
        u = u / np.sqrt(det)
    a0 = 0.5 * np.trace(u).real
    # U = a0 I - i a.sigma  =>  a_k = (i/2) tr(sigma_k U)
    a = (0.5j * np.einsum("kij,ji->k", PAULI, u)).real
    s = np.linalg.norm(a)
    angle = float(np.arctan2(s, a0))
    if s < POLICY.degenerate_atol:
        return SU2Log(angle, np.array([0.0, 0.0, 1.0]), True)
    return SU2Log(angle, a / s, False)


def phase_overlap(a: ArrayLike, b: ArrayLike) -> float:
    """``|tr(A^dagger B)| / 2``; equals 1 iff A and B agree up to a global phase."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return float(abs(np.trace(a.conj().T @ b)) / 2)


def equal_up_to_phase(a: ArrayLike, b: ArrayLike, tol: float = POLICY.atol) -> bool:
    """Entrywise comparison after removing the best global phase."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    overlap = np.trace(a.conj().T @ b)
    if abs(overlap) < 1e-300:
        return False
    phase = overlap / abs(overlap)
    return bool(np.max(np.abs(a * phase - b)) <= tol)


def bloch_vector(psi: ArrayLike) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.einsum("i,kij,j->k", psi.conj(), PAULI, psi).real


def state_from_bloch(r: ArrayLike) -> np.ndarray:
    """Pure state whose Bloch vector is the unit vector ``r`` (phase: real first amplitude)."""
    r = np.asarray(r, dtype=float)
    n = np.linalg.norm(r)
    if abs(n - 1.0) > POLICY.axis_atol:
        raise ValueError(f"pure-state Bloch vector must be unit, got norm {n}")
    r = r / n
    # |psi> ~ (1 + r.sigma)|e> for any |e> not orthogonal to it
    if r[2] > -0.5:
        psi = np.array([1 + r[2], r[0] + 1j * r[1]], dtype=complex)
    else:
        psi = np.array([r[0] - 1j * r[1], 1 - r[2]], dtype=complex)
    psi /= np.linalg.norm(psi)
    if abs(psi[0]) > 1e-15:
        psi *= abs(psi[0]) / psi[0]
    return psi
