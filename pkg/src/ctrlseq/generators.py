"""Parameter generators of free and controlled qubit evolution.

For ``U_T(x) = exp(-i H(x) T)`` with ``H(x) = h(x) . sigma`` the generator is
``S_T = i U_T^dagger dU_T/dx = int_0^T U_t^dagger V_0 U_t dt`` with
``V_0 = dH/dx``.  Its Bloch vector traces a helix: uniform drift along
``n_h = h/|h|`` plus a circle of radius ``|v0_perp|/w`` with ``w = 2|h|``.
The quantum Fisher information of a pure probe is ``4 Var_psi(S_T)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from .qubit import (
    POLICY,
    adjoint_matrix,
    bloch_vector,
    pauli_decompose,
    pauli_dot,
    su2_exp,
)

__all__ = [
    "HamiltonianFamily",
    "PHASE_PLATE",
    "GeneratorState",
    "evolution",
    "instantaneous_signal",
    "free_generator",
    "generator_norm_sq",
    "controlled_generator",
    "sequence_generator",
    "numerical_generator",
    "generator_variance",
]


def _plate_h(x):
    x = np.asarray(x, dtype=float)
    return np.stack([np.sin(2 * x), np.zeros_like(x), np.cos(2 * x)], axis=-1)


def _plate_dh(x):
    x = np.asarray(x, dtype=float)
    return 2 * np.stack([np.cos(2 * x), np.zeros_like(x), -np.sin(2 * x)], axis=-1)


@dataclass(frozen=True)
class HamiltonianFamily:
    """``x -> h(x)`` together with its derivative ``x -> v0(x) = dh/dx``.

    Both callables must broadcast: an array of ``x`` gives ``(..., 3)`` vectors.
    """

    h: Callable[[ArrayLike], np.ndarray]
    dh: Callable[[ArrayLike], np.ndarray]
    name: str = "custom"


#: Rotated phase plate, ``H(x) = sin(2x) sigma_x + cos(2x) sigma_z``.
PHASE_PLATE = HamiltonianFamily(_plate_h, _plate_dh, name="phase-plate")


@dataclass(frozen=True)
class GeneratorState:
    """Bloch decomposition ``S = scalar * I + s . sigma`` of a generator.

    ``T`` is the total evolution time (``None`` when unknown, e.g. for the
    finite-difference generator of an arbitrary unitary), ``N`` the number of
    control blocks.  The scalar part never enters a variance.
    """

    s: np.ndarray
    T: float | None = None
    N: int = 1
    scalar: float = 0.0

    @property
    def norm_sq(self) -> np.ndarray:
        return np.sum(np.asarray(self.s) ** 2, axis=-1)

    def matrix(self) -> np.ndarray:
        return self.scalar * np.eye(2) + pauli_dot(self.s)


def evolution(family: HamiltonianFamily, x: ArrayLike, t: ArrayLike) -> np.ndarray:
    """``U_t(x) = exp(-i h(x) . sigma t)``; broadcasts over ``x`` and ``t``."""
    h = family.h(x)
    norm = np.linalg.norm(h, axis=-1)
    axis = h / np.where(norm > 0, norm, 1.0)[..., None]
    axis = np.where((norm > 0)[..., None], axis, np.array([0.0, 0.0, 1.0]))
    return su2_exp(axis, norm * np.asarray(t, dtype=float))


def _frame(family: HamiltonianFamily, x: ArrayLike):
    """Helix frame: speed along n_h, perpendicular speed, n_h, n1, n2 and w."""
    h = family.h(x)
    v0 = family.dh(x)
    hnorm = np.linalg.norm(h, axis=-1)
    n_h = h / hnorm[..., None]
    par = np.sum(v0 * n_h, axis=-1)
    perp = v0 - par[..., None] * n_h
    perp_norm = np.linalg.norm(perp, axis=-1)
    ok = perp_norm > POLICY.degenerate_atol
    n1 = np.where(ok[..., None], perp / np.where(ok, perp_norm, 1.0)[..., None], 0.0)
    # U^dagger (v.sigma) U turns v by -w t about n_h, i.e. toward n1 x n_h
    n2 = np.cross(n1, n_h)
    perp_norm = np.where(ok, perp_norm, 0.0)
    return par, perp_norm, n_h, n1, n2, 2 * hnorm


def instantaneous_signal(family: HamiltonianFamily, x: ArrayLike, t: ArrayLike) -> np.ndarray:
    """Bloch vector of ``V_t = U_t^dagger V_0 U_t``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    par, perp, n_h, n1, n2, w = _frame(family, x)
    wt = w * np.asarray(t, dtype=float)
    return (
        par[..., None] * n_h
        + (perp * np.cos(wt))[..., None] * n1
        + (perp * np.sin(wt))[..., None] * n2
    )


def free_generator(family: HamiltonianFamily, x: ArrayLike, T: ArrayLike) -> GeneratorState:
    """Closed-form helix ``s_T = int_0^T v_t dt`` of the uncontrolled evolution."""
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr < 0):
        raise ValueError("T must be non-negative")
    par, perp, n_h, n1, n2, w = _frame(family, x)
    wT = w * T_arr
    radius = perp / w
    s = (
        (par * T_arr)[..., None] * n_h
        + (radius * np.sin(wT))[..., None] * n1
        + (radius * (1 - np.cos(wT)))[..., None] * n2
    )
    return GeneratorState(s=s, T=float(T_arr) if T_arr.ndim == 0 else T_arr, N=1)


def generator_norm_sq(family: HamiltonianFamily, x: ArrayLike, T: ArrayLike) -> np.ndarray:
    """``|s_T|^2 = (v0.n_h)^2 T^2 + (|v0|^2 - (v0.n_h)^2) sin^2(|h| T) / |h|^2``."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("T must be non-negative")
    h = family.h(x)
    v0 = family.dh(x)
    hnorm = np.linalg.norm(h, axis=-1)
    par = np.sum(v0 * h, axis=-1) / hnorm
    v0_sq = np.sum(v0 * v0, axis=-1)
    return par**2 * T**2 + (v0_sq - par**2) / hnorm**2 * np.sin(hnorm * T) ** 2


def controlled_generator(
    family: HamiltonianFamily, x: ArrayLike, T: float, N: int
) -> GeneratorState:
    """Generator after ``N`` blocks with the commuting control ``U_c = U_{T/N}^dagger(x)``.

    The control makes every block contribute the same ``S_{T/N}``, so the
    total is ``N * S_{T/N}``.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    N = int(N)
    block = free_generator(family, x, np.asarray(T, dtype=float) / N)
    return GeneratorState(s=N * block.s, T=T, N=N)


def sequence_generator(
    family: HamiltonianFamily, x: ArrayLike, t: float, control: np.ndarray, N: int
) -> GeneratorState:
    """Generator of ``[U_c U_t(x)]^N`` for an arbitrary (x-independent) control.

    ``S^(N) = sum_k (U_ct^k)^dagger S_t U_ct^k``; broadcasts over ``x``.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    s_t = free_generator(family, x, t).s
    rot = adjoint_matrix(np.asarray(control) @ evolution(family, x, t))
    total = np.zeros_like(s_t)
    current = s_t
    for _ in range(int(N)):
        total = total + current
        current = np.einsum("...ij,...j->...i", rot, current)
    return GeneratorState(s=total, T=N * t, N=int(N))


def numerical_generator(
    unitary: Callable[[float], np.ndarray], x: float, dx: float = 1e-6
) -> GeneratorState:
    """Finite-difference generator ``i U^dagger dU/dx`` (central difference).

    The estimate is symmetrised to a hermitian matrix before the Pauli split;
    any trace part (a phase derivative) is kept in ``scalar``.
    """
    if dx <= 0:
        raise ValueError("dx must be positive")
    u = np.asarray(unitary(x), dtype=complex)
    du = (np.asarray(unitary(x + dx)) - np.asarray(unitary(x - dx))) / (2 * dx)
    m = 1j * u.conj().T @ du
    m = 0.5 * (m + m.conj().T)
    scalar, s = pauli_decompose(m)
    return GeneratorState(s=s, scalar=scalar)


def generator_variance(g: GeneratorState, probe: ArrayLike) -> np.ndarray:
    """``<S^2> - <S>^2 = |s|^2 - (r . s)^2`` for a pure probe with Bloch vector ``r``."""
    psi = np.asarray(probe, dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > POLICY.axis_atol:
        raise ValueError(f"probe must be normalised, got norm {nrm}")
    r = bloch_vector(psi)
    s = np.asarray(g.s)
    return g.norm_sq - np.einsum("...k,k->...", s, r) ** 2
