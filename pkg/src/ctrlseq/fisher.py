"""Quantum and classical Fisher information of the controlled scheme.

With the control designed for ``x_hat`` the per-block unitary is
``U_t^dagger(x_hat) U_t(x) = exp(-i t_e n_e . sigma)`` where
``cos t_e = cos^2 t + cos 2(x - x_hat) sin^2 t``.  Everything the two-outcome
readout sees depends on ``cos t_e`` through Chebyshev polynomials:
``A_N = sin(N t_e)/sin(t_e) = U_{N-1}(cos t_e)`` and
``cos(N t_e) = T_N(cos t_e)``, so the probability model is smooth everywhere.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from .generators import GeneratorState, generator_variance
from .protocol import build_protocol, plate_frame, protocol_qfi

__all__ = [
    "qfi_from_generator",
    "qfi_controlled_closed",
    "chebyshev_t",
    "chebyshev_u",
    "MismatchGeometry",
    "mismatch_geometry",
    "outcome_probability",
    "outcome_probability_derivative",
    "sweet_spot_probability",
    "cfi_two_outcome",
    "CFI_OK",
    "CFI_LIMIT",
    "PROBABILITY_GUARD",
    "FisherPoint",
    "Landscape",
    "fisher_landscape",
    "LANDSCAPE_HEADER",
]

PROBABILITY_GUARD = 1e-8
CFI_OK = 0
CFI_LIMIT = 1

LANDSCAPE_HEADER = ("x", "T", "N", "qfi", "cfi", "p_plus")


def qfi_from_generator(g: GeneratorState, probe: ArrayLike) -> np.ndarray:
    """``J = 4 <Delta S^2>`` for a pure probe."""
    return 4 * generator_variance(g, probe)


def qfi_controlled_closed(N: int, T: ArrayLike) -> np.ndarray:
    """Optimal QFI with ``N`` commuting controls: ``16 N^2 sin^2(T/N)``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("T must be non-negative")
    return 16 * N**2 * np.sin(T / N) ** 2


def chebyshev_t(n: int, c: ArrayLike) -> np.ndarray:
    """First-kind Chebyshev polynomial ``T_n(c)`` (``cos(n theta)`` at ``c = cos theta``)."""
    c = np.asarray(c, dtype=float)
    prev, cur = np.ones_like(c), c.copy()
    if n == 0:
        return prev
    for _ in range(n - 1):
        prev, cur = cur, 2 * c * cur - prev
    return cur


def chebyshev_u(n: int, c: ArrayLike, derivative: bool = False):
    """Second-kind ``U_n(c)`` (``sin((n+1) theta)/sin theta``), by three-term recurrence.

    With ``derivative=True`` returns ``(U_n, dU_n/dc)``.
    """
    c = np.asarray(c, dtype=float)
    if n < 0:
        zero = np.zeros_like(c)
        return (zero, zero) if derivative else zero
    u_prev, u = np.zeros_like(c), np.ones_like(c)
    d_prev, d = np.zeros_like(c), np.zeros_like(c)
    for _ in range(n):
        u_prev, u = u, 2 * c * u - u_prev
        d_prev, d = d, 2 * u_prev + 2 * c * d - d_prev
    return (u, d) if derivative else u


class MismatchGeometry(NamedTuple):
    """Effective rotation ``exp(-i t_e n_e . sigma)`` of one mismatched block."""

    t_e: float
    n_e: np.ndarray
    A_N: float
    degenerate: bool


def mismatch_geometry(t: float, x: float, x_hat: float, N: int = 1) -> MismatchGeometry:
    """Angle and axis of ``U_t^dagger(x_hat) U_t(x)``, plus ``A_N = sin(N t_e)/sin t_e``."""
    n_h, _, _, _, _ = plate_frame(x, t)
    n_hat, _, _, _, _ = plate_frame(x_hat, t)
    cos_te = np.cos(t) ** 2 + np.cos(2 * (x - x_hat)) * np.sin(t) ** 2
    m = np.sin(t) * np.cos(t) * (n_h - n_hat) + np.sin(t) ** 2 * np.cross(n_h, n_hat)
    sin_te = np.linalg.norm(m)
    t_e = float(np.arctan2(sin_te, cos_te))
    if sin_te < 1e-6:
        a_n = float(chebyshev_u(N - 1, np.clip(cos_te, -1, 1)))
    else:
        a_n = float(np.sin(N * t_e) / sin_te)
    if sin_te < 1e-12:
        return MismatchGeometry(t_e, np.array([0.0, 0.0, 1.0]), a_n, True)
    return MismatchGeometry(t_e, m / sin_te, a_n, False)


def _cos_te(x, x_hat, t):
    d = np.asarray(x, dtype=float) - np.asarray(x_hat, dtype=float)
    c = np.cos(t) ** 2 + np.cos(2 * d) * np.sin(t) ** 2
    return d, np.clip(c, -1.0, 1.0)


def outcome_probability(
    x: ArrayLike, x_hat: ArrayLike, t: float, N: int, alpha: float = 0.0
) -> np.ndarray:
    """``P_+`` after ``N`` blocks with probe, control and readout designed for ``x_hat``.

    ``P_+ = 1/2 + (A_N^2/8) sin2a sin^2 2t [cos 2d - 1]^2 + A_N sin t sin 2d cos(N t_e)``
    with ``d = x - x_hat``.  The readout realising it is the axis at
    ``beta = alpha - pi/2`` in the optimal plane (orthogonal to the probe); for
    ``alpha = 0`` that is the ``beta = pi/2`` basis with outcomes relabelled.
    Broadcasts over ``x`` and ``x_hat``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    d, c = _cos_te(x, x_hat, t)
    a_n = chebyshev_u(N - 1, c)
    p = (
        0.5
        + a_n**2 / 8 * np.sin(2 * alpha) * np.sin(2 * t) ** 2 * (np.cos(2 * d) - 1) ** 2
        + a_n * np.sin(t) * np.sin(2 * d) * chebyshev_t(N, c)
    )
    return np.clip(p, 0.0, 1.0)


def outcome_probability_derivative(
    x: ArrayLike, x_hat: ArrayLike, t: float, N: int
) -> np.ndarray:
    """Analytic ``dP_+/dx`` for ``alpha = 0``.

    ``P_+ - 1/2 = sin t sin 2d U_{N-1}(c) T_N(c)`` and ``dc/dd = -2 sin 2d sin^2 t``.
    """
    d, c = _cos_te(x, x_hat, t)
    u, du = chebyshev_u(N - 1, c, derivative=True)
    tn = chebyshev_t(N, c)
    dtn = N * u
    dc = -2 * np.sin(2 * d) * np.sin(t) ** 2
    return np.sin(t) * (2 * np.cos(2 * d) * u * tn + np.sin(2 * d) * (du * tn + u * dtn) * dc)


def sweet_spot_probability(x: ArrayLike, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Outcome probabilities ``(1 +- cos 4Nx)/2`` of the pre-fixed sweet-spot scheme.

    These are the populations of ``|H>`` and ``|V>`` after ``N`` blocks of
    ``i sigma_z U_{pi/2}(x)`` acting on ``|H>``; the ``sigma_x`` readout of the
    same state gives ``(1 -+ sin 4Nx)/2`` instead.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    c = np.cos(4 * N * np.asarray(x, dtype=float))
    return (1 + c) / 2, (1 - c) / 2


def cfi_two_outcome(
    x: ArrayLike,
    x_hat: ArrayLike,
    t: float,
    N: int,
    alpha: float = 0.0,
    dx: float = 1e-6,
    full_output: bool = False,
):
    """Fisher information ``(dP/dx)^2 / [P (1 - P)]`` of the binary readout.

    The derivative is analytic for ``alpha = 0`` and a central difference
    otherwise.  Where ``P`` is within :data:`PROBABILITY_GUARD` of 0 or 1 the
    ratio is 0/0 and is replaced by its limit ``2 |d^2P/dx^2|``; those cells are
    flagged with :data:`CFI_LIMIT` when ``full_output`` is set.
    """
    x = np.asarray(x, dtype=float)

    def deriv(xx):
        if alpha == 0.0:
            return outcome_probability_derivative(xx, x_hat, t, N)
        return (
            outcome_probability(xx + dx, x_hat, t, N, alpha)
            - outcome_probability(xx - dx, x_hat, t, N, alpha)
        ) / (2 * dx)

    p = outcome_probability(x, x_hat, t, N, alpha)
    dp = deriv(x)
    q = np.minimum(p, 1 - p)
    near_edge = q < PROBABILITY_GUARD
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(near_edge, 0.0, dp**2 / (p * (1 - p)))
    if np.any(near_edge):
        h = 1e-5 if alpha == 0.0 else 1e-4
        if alpha == 0.0:
            d2p = (deriv(x + h) - deriv(x - h)) / (2 * h)
        else:
            d2p = (
                outcome_probability(x + h, x_hat, t, N, alpha)
                - 2 * p
                + outcome_probability(x - h, x_hat, t, N, alpha)
            ) / h**2
        f = np.where(near_edge, 2 * np.abs(d2p), f)
    flags = np.where(near_edge, CFI_LIMIT, CFI_OK)
    if f.ndim == 0:
        f, flags = float(f), int(flags)
    return (f, flags) if full_output else f


@dataclass(frozen=True)
class FisherPoint:
    x: float
    T: float
    N: int
    qfi: float
    cfi: float
    p_plus: float


@dataclass(frozen=True, eq=False)
class Landscape:
    """Dense ``(len(x), len(T))`` tables of QFI, CFI and ``P_+``."""

    x: np.ndarray
    T: np.ndarray
    N: int
    x_hat: float
    qfi: np.ndarray
    cfi: np.ndarray
    p_plus: np.ndarray

    def points(self) -> Iterator[FisherPoint]:
        for i, xv in enumerate(self.x):
            for j, tv in enumerate(self.T):
                yield FisherPoint(
                    float(xv), float(tv), self.N,
                    float(self.qfi[i, j]), float(self.cfi[i, j]), float(self.p_plus[i, j]),
                )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(LANDSCAPE_HEADER)
        for pt in self.points():
            writer.writerow(
                [f"{pt.x:.12g}", f"{pt.T:.12g}", pt.N, f"{pt.qfi:.12g}", f"{pt.cfi:.12g}", f"{pt.p_plus:.12g}"]
            )
        return buf.getvalue()


def fisher_landscape(
    x_grid: ArrayLike, T_grid: ArrayLike, N: int, x_hat: float, alpha: float = 0.0
) -> Landscape:
    """QFI, CFI and ``P_+`` over ``x`` and total time ``T`` for a fixed design ``x_hat``."""
    x_grid = np.asarray(x_grid, dtype=float)
    T_grid = np.asarray(T_grid, dtype=float)
    if x_grid.size == 0 or T_grid.size == 0:
        raise ValueError("grids must be non-empty")
    for g in (x_grid, T_grid):
        if g.size > 1 and not (np.all(np.diff(g) > 0) or np.all(np.diff(g) < 0)):
            raise ValueError("grids must be strictly monotone")
    shape = (x_grid.size, T_grid.size)
    qfi, cfi, pp = np.zeros(shape), np.zeros(shape), np.full(shape, 0.5)
    for j, T in enumerate(T_grid):
        t = T / N
        if t == 0:
            continue
        pp[:, j] = outcome_probability(x_grid, x_hat, t, N, alpha)
        cfi[:, j] = cfi_two_outcome(x_grid, x_hat, t, N, alpha)
        qfi[:, j] = protocol_qfi(build_protocol(x_hat, N, t, alpha), x_grid)
    return Landscape(x_grid, T_grid, N, float(x_hat), qfi, cfi, pp)
