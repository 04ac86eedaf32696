"""Optimal probe, control and measurement for the rotated phase plate, and their
waveplate realisation.

The geometry is built from the frame ``{n_h(x), n1(x), n2}`` with
``n_h = (sin2x, 0, cos2x)``, ``n1 = (cos2x, 0, -sin2x)`` and ``n2 = n_h x n1 = y``.
A small parameter shift turns the state about ``n_U' = cos t n1 - sin t n2``,
so optimal probes and measurement axes live in the plane spanned by ``n_h``
and ``n3 = n_h x n_U' = sin t n1 + cos t n2``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .generators import PHASE_PLATE, evolution, generator_variance, sequence_generator
from .qubit import KET_H, SIGMA_Z, bloch_vector, state_from_bloch

__all__ = [
    "ProtocolConfig",
    "plate_frame",
    "build_protocol",
    "sweet_spot_protocol",
    "protocol_probability",
    "protocol_qfi",
    "jones_rotation",
    "jones_hwp",
    "jones_qwp",
    "WaveplateSetting",
    "waveplate_settings",
    "normalize_angle",
    "preparation_jones",
    "control_jones",
    "analyzer_jones",
    "detection_jones",
]


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """One instance of the controlled sequential scheme designed for ``x_hat``.

    ``t`` is the per-block evolution time, so the total time is ``T = N t``.
    ``meas_axis`` is the Bloch direction of the ``+`` outcome.
    """

    x_hat: float
    N: int
    t: float
    alpha: float
    beta: float
    probe: np.ndarray
    control: np.ndarray
    meas_axis: np.ndarray

    @property
    def T(self) -> float:
        return self.N * self.t

    @property
    def probe_bloch(self) -> np.ndarray:
        return bloch_vector(self.probe)


def cos_sin_combo(angle: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.cos(angle) * a + np.sin(angle) * b


def plate_frame(x: float, t: float):
    """Return ``(n_h, n1, n2, n3, n_U')`` at parameter ``x`` and block time ``t``."""
    n_h = np.array([np.sin(2 * x), 0.0, np.cos(2 * x)])
    n1 = np.array([np.cos(2 * x), 0.0, -np.sin(2 * x)])
    n2 = np.cross(n_h, n1)
    n3 = np.sin(t) * n1 + np.cos(t) * n2
    n_u = np.cos(t) * n1 - np.sin(t) * n2
    return n_h, n1, n2, n3, n_u


def build_protocol(
    x_hat: float, N: int, t: float, alpha: float = 0.0, beta: float = np.pi / 2
) -> ProtocolConfig:
    """Optimal probe, commuting control ``U_t^dagger(x_hat)`` and measurement for ``x_hat``."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if t <= 0:
        raise ValueError("t must be positive")
    n_h, _, _, n3, _ = plate_frame(x_hat, t)
    probe = state_from_bloch(cos_sin_combo(alpha, n_h, n3))
    control = evolution(PHASE_PLATE, x_hat, t).conj().T
    return ProtocolConfig(
        x_hat=float(x_hat),
        N=int(N),
        t=float(t),
        alpha=float(alpha),
        beta=float(beta),
        probe=probe,
        control=control,
        meas_axis=cos_sin_combo(beta, n_h, n3),
    )


def sweet_spot_protocol(N: int) -> ProtocolConfig:
    """Pre-fixed scheme at ``t = pi/2``: probe ``|H>``, control ``i sigma_z``, ``sigma_x`` readout."""
    base = build_protocol(0.0, N, np.pi / 2)
    return dataclasses.replace(
        base,
        probe=KET_H.copy(),
        control=1j * SIGMA_Z,
        meas_axis=np.array([1.0, 0.0, 0.0]),
    )


def protocol_probability(config: ProtocolConfig, x: ArrayLike) -> np.ndarray:
    """Probability of the ``+`` outcome by direct state-vector propagation.

    Propagates the probe through ``[U_c U_t(x)]^N`` and projects on
    ``meas_axis``; broadcasts over ``x``.
    """
    x = np.asarray(x, dtype=float)
    block = config.control @ evolution(PHASE_PLATE, x, config.t)
    total = np.linalg.matrix_power(block, config.N)
    psi = total @ config.probe
    m_plus = state_from_bloch(config.meas_axis)
    amp = np.einsum("i,...i->...", m_plus.conj(), psi)
    return np.abs(amp) ** 2


def protocol_qfi(config: ProtocolConfig, x: ArrayLike) -> np.ndarray:
    """Quantum Fisher information ``4 Var(S^(N))`` of the protocol's output at ``x``."""
    g = sequence_generator(PHASE_PLATE, x, config.t, config.control, config.N)
    return 4 * generator_variance(g, config.probe)


# --- waveplates -------------------------------------------------------------


def jones_rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def jones_hwp(theta: float) -> np.ndarray:
    """Half-wave plate with fast axis at ``theta``: ``R(theta) diag(1, -1) R(-theta)``."""
    r = jones_rotation(theta)
    return r @ np.diag([1, -1]).astype(complex) @ r.T


def jones_qwp(theta: float) -> np.ndarray:
    """Quarter-wave plate with fast axis at ``theta``: ``R(theta) diag(1, i) R(-theta)``."""
    r = jones_rotation(theta)
    return r @ np.diag([1, 1j]) @ r.T


def normalize_angle(theta: float) -> float:
    """Map a waveplate angle into ``(-pi/2, pi/2]`` (both plate types are pi-periodic)."""
    return float(theta - np.pi * np.ceil((theta - np.pi / 2) / np.pi))


@dataclass(frozen=True)
class WaveplateSetting:
    """Rotation angles (radians) of the seven motorised plates."""

    hwp1: float
    qwp1: float
    qwp2: float
    hwp2: float
    qwp3: float
    hwp3: float
    qwp4: float

    def as_dict(self) -> dict[str, dict[str, float]]:
        return {
            name: {"rad": value, "deg": float(np.degrees(value))}
            for name, value in dataclasses.asdict(self).items()
        }


def waveplate_settings(x_hat: float, t: float) -> WaveplateSetting:
    """Plate angles realising ``build_protocol(x_hat, ., t)`` with ``alpha = 0``."""
    q = x_hat + np.pi / 4
    raw = WaveplateSetting(
        hwp1=x_hat / 2,
        qwp1=x_hat,
        qwp2=q,
        hwp2=x_hat - t / 2 - np.pi / 4,
        qwp3=q,
        hwp3=x_hat / 2 - t / 4 + np.pi / 4,
        qwp4=q,
    )
    return WaveplateSetting(**{k: normalize_angle(v) for k, v in dataclasses.asdict(raw).items()})


def preparation_jones(w: WaveplateSetting) -> np.ndarray:
    """HWP1 then QWP1; acting on ``|H>`` it prepares the probe."""
    return jones_qwp(w.qwp1) @ jones_hwp(w.hwp1)


def control_jones(w: WaveplateSetting) -> np.ndarray:
    """QWP2, HWP2, QWP3 in beam order."""
    return jones_qwp(w.qwp3) @ jones_hwp(w.hwp2) @ jones_qwp(w.qwp2)


def analyzer_jones(w: WaveplateSetting) -> np.ndarray:
    """HWP3 then QWP4 read as a preparation stack: it maps ``|H>, |V>`` onto the
    measurement eigenbasis.  The angle formulas describe the analyzer this way
    (the basis it would prepare), so the detection map is its adjoint."""
    return jones_qwp(w.qwp4) @ jones_hwp(w.hwp3)


def detection_jones(w: WaveplateSetting) -> np.ndarray:
    """Operation applied before the polarising beam splitter; maps the measurement
    eigenbasis onto ``|H>, |V>``."""
    return analyzer_jones(w).conj().T
