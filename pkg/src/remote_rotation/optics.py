"""Linear-optical gate set: Jones matrices, the PBS CNOT and the entangled resource.

Basis bindings used throughout: ``|0> = |H> = |u>`` and ``|1> = |V> = |d>``.
Register labels: ``"1"`` is photon A's polarization, ``"2"`` photon B's path,
``"3"`` photon B's polarization.

Jones convention: a retarder with fast axis at angle ``t`` from horizontal is
``R(t) diag(1, e^{i G}) R(-t)`` with ``G = pi`` (half wave) or ``pi/2``
(quarter wave). Global phases are left unconstrained, so comparisons against
these matrices go through :func:`qmath.equal_up_to_phase`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qmath import I2, SX, QubitState, basis_state, embed, ket, tensor

HALF = "half"
QUARTER = "quarter"
_RETARDANCE = {HALF: np.pi, QUARTER: np.pi / 2}

POLARIZATIONS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "R": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}
for _v in POLARIZATIONS.values():
    _v.setflags(write=False)


def rz(varphi: float) -> np.ndarray:
    """``exp(i varphi sigma_z / 2)``: the z-rotation implemented remotely."""
    return np.diag([np.exp(0.5j * varphi), np.exp(-0.5j * varphi)])


@dataclass(frozen=True)
class WaveplateSetting:
    kind: str
    axis_angle: float

    def __post_init__(self):
        if self.kind not in _RETARDANCE:
            raise ValueError(f"unknown waveplate kind {self.kind!r}")


def _rotation(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]], dtype=complex)


def waveplate(setting: WaveplateSetting) -> np.ndarray:
    gamma = _RETARDANCE[setting.kind]
    t = setting.axis_angle
    return _rotation(t) @ np.diag([1.0, np.exp(1j * gamma)]) @ _rotation(-t)


def hwp(angle: float) -> np.ndarray:
    return waveplate(WaveplateSetting(HALF, angle))


def qwp(angle: float) -> np.ndarray:
    return waveplate(WaveplateSetting(QUARTER, angle))


def com_plate_settings(varphi: float) -> tuple[WaveplateSetting, WaveplateSetting, WaveplateSetting]:
    """QWP-HWP-QWP stack (in beam order) realizing ``rz(varphi)``.

    The sandwiched half-wave plate shifts the H/V relative phase by four
    times its angle, so the required setting is ``-varphi/4 - 45deg``.
    """
    q = WaveplateSetting(QUARTER, np.pi / 4)
    return q, WaveplateSetting(HALF, -varphi / 4 - np.pi / 4), q


def u_com_from_plates(varphi: float) -> np.ndarray:
    first, middle, last = com_plate_settings(varphi)
    return waveplate(last) @ waveplate(middle) @ waveplate(first)


def pbs_cnot(control: str = "3", target: str = "2") -> np.ndarray:
    """Polarization-controlled path flip, ordered as ``control (x) target``.

    ``|H>|u> -> |H>|u>``, ``|H>|d> -> |H>|d>``, ``|V>|u> -> |V>|d>``,
    ``|V>|d> -> |V>|u>``.
    """
    if control == target:
        raise ValueError("control and target must be distinct qubits")
    p0 = np.diag([1, 0]).astype(complex)
    p1 = np.diag([0, 1]).astype(complex)
    return np.kron(p0, I2) + np.kron(p1, SX)


def prepare_resource() -> QubitState:
    """Polarization-path entangled state ``(|H,u> + |V,d>)|H> / sqrt(2)`` on ("1", "2", "3").

    Built from the source pair ``(|H>_A|V>_B + |V>_A|H>_B)/sqrt(2)`` with photon B
    entering PBS P1 in mode ``d``; P1 routes V into ``u``, and H1 (a HWP at 45deg,
    i.e. sigma_x) then flips the polarization in ``u``.
    """
    labels = ("1", "2", "3")
    hv = basis_state([0, 1, 1], labels).amplitudes
    vh = basis_state([1, 1, 0], labels).amplitudes
    psi = (hv + vh) / np.sqrt(2)
    psi = embed(pbs_cnot("3", "2"), ("3", "2"), labels) @ psi
    p_u = np.diag([1, 0]).astype(complex)
    p_d = np.diag([0, 1]).astype(complex)
    h1 = np.kron(p_u, hwp(np.pi / 4)) + np.kron(p_d, I2)
    psi = embed(h1, ("2", "3"), labels) @ psi
    return QubitState(psi, labels)


def target_unitary(theta: float, phi: float) -> np.ndarray:
    """Unitary taking ``|H>`` to ``cos(theta)|H> + e^{i phi} sin(theta)|V>``."""
    a, b = np.cos(theta), np.exp(1j * phi) * np.sin(theta)
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]], dtype=complex)


def target_plates(theta: float, phi: float) -> tuple[WaveplateSetting, WaveplateSetting]:
    """HWP then QWP settings that bring ``|H>`` to the target polarization (up to phase)."""
    x = np.sin(2 * theta) * np.cos(phi)
    y = np.sin(2 * theta) * np.sin(phi)
    z = np.cos(2 * theta)
    orientation = 0.5 * np.arctan2(x, z)
    ellipticity = 0.5 * np.arcsin(np.clip(y, -1.0, 1.0))
    return (
        WaveplateSetting(HALF, 0.5 * (orientation + ellipticity)),
        WaveplateSetting(QUARTER, orientation),
    )


def prepare_target(state: QubitState, theta: float, phi: float) -> QubitState:
    """Rotate qubit 3 of the resource from ``|H>`` into the target state.

    The same waveplate pair sits in both arms, so the action is a local
    unitary on qubit 3 regardless of path.
    """
    if "3" not in state.labels:
        raise ValueError("state has no qubit 3")
    u = embed(target_unitary(theta, phi), ("3",), state.labels)
    return QubitState(u @ state.amplitudes, state.labels)


def bell_phi_plus(labels=("1", "2")) -> QubitState:
    return QubitState(np.array([1, 0, 0, 1]) / np.sqrt(2), labels)


def product_with_target(theta: float, phi: float) -> QubitState:
    """Reference ``|Phi+>_12 (x) |psi>_3`` for checking the optical preparation."""
    return tensor(bell_phi_plus(), ket(theta, phi, "3"))
