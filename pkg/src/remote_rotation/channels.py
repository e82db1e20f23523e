"""Kraus channels: the two visibility-limited dephasings, the dephased rotation and its dilation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .optics import POLARIZATIONS, rz
from .qmath import ATOL, I2, SZ, DensityMatrix, embed, is_unitary, partial_trace, tensor

__all__ = [
    "KrausChannel",
    "NoiseParams",
    "identity_channel",
    "unitary_channel",
    "dephasing",
    "dephased_rotation",
    "apply",
    "apply_on",
    "compose",
    "controlled_rotation",
    "dilate_to_channel",
    "channel_distance",
    "channels_equal",
]


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Trace-preserving completely positive map given by Kraus operators."""

    operators: tuple

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.operators)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"Kraus operators must be square, got {shape}")
        if any(k.shape != shape for k in ops):
            raise ValueError("Kraus operators must share one shape")
        for k in ops:
            k.setflags(write=False)
        total = sum(k.conj().T @ k for k in ops)
        dev = np.max(np.abs(total - np.eye(shape[0])))
        if dev > ATOL:
            raise ValueError(f"Kraus operators violate completeness (deviation {dev:.3g})")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def __call__(self, rho):
        return apply(self, rho)

    def __len__(self):
        return len(self.operators)


@dataclass(frozen=True)
class NoiseParams:
    """Source visibility ``p`` and interferometer visibility ``eta``."""

    p: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        for name in ("p", "eta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def visibility(self) -> float:
        return self.p * self.eta

    @property
    def noiseless(self) -> bool:
        return self.p == 1.0 and self.eta == 1.0


def identity_channel(dim: int = 2) -> KrausChannel:
    return KrausChannel((np.eye(dim, dtype=complex),))


def unitary_channel(u: np.ndarray) -> KrausChannel:
    if not is_unitary(u):
        raise ValueError("operator is not unitary")
    return KrausChannel((u,))


def dephasing(v: float) -> KrausChannel:
    """``{sqrt((1+v)/2) I, sqrt((1-v)/2) Z}``; scales coherences by ``v``."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    return KrausChannel((np.sqrt((1 + v) / 2) * I2, np.sqrt((1 - v) / 2) * SZ))


def dephased_rotation(varphi: float, params: NoiseParams) -> KrausChannel:
    """Rotation ``rz(varphi)`` with the combined dephasing of visibility ``p * eta``.

    Coherences transform as ``rho_01 -> p eta e^{i varphi} rho_01``.
    """
    v = params.visibility
    u = rz(varphi)
    return KrausChannel((np.sqrt((1 + v) / 2) * u, np.sqrt((1 - v) / 2) * u @ SZ))


def apply(ch: KrausChannel, rho):
    """``sum_k E_k rho E_k^dagger``; returns the same kind as ``rho``."""
    is_dm = isinstance(rho, DensityMatrix)
    m = rho.data if is_dm else np.asarray(rho, dtype=complex)
    if m.shape != (ch.dim, ch.dim):
        raise ValueError(f"channel of dimension {ch.dim} cannot act on shape {m.shape}")
    out = sum(k @ m @ k.conj().T for k in ch.operators)
    return DensityMatrix(out, rho.labels) if is_dm else out


def apply_on(ch: KrausChannel, rho: DensityMatrix, targets: Sequence[str]) -> DensityMatrix:
    """Apply ``ch`` to the qubits ``targets`` of a larger register."""
    ops = [embed(k, targets, rho.labels) for k in ch.operators]
    out = sum(k @ rho.data @ k.conj().T for k in ops)
    return DensityMatrix(out, rho.labels)


def compose(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """Channel for ``a`` after ``b``."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch {a.dim} vs {b.dim}")
    return KrausChannel(tuple(x @ y for x in a.operators for y in b.operators))


def controlled_rotation(u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    """``|0><0| (x) u0 + |1><1| (x) u1`` on ancilla (x) system."""
    for u in (u0, u1):
        if np.shape(u) != (2, 2) or not is_unitary(u):
            raise ValueError("controlled blocks must be 2x2 unitaries")
    return np.kron(np.diag([1, 0]), u0) + np.kron(np.diag([0, 1]), u1)


def dilate_to_channel(cr: np.ndarray, ancilla: DensityMatrix) -> KrausChannel:
    """System channel ``rho -> Tr_anc[cr (ancilla (x) rho) cr^dagger]``.

    Kraus operators are ``sqrt(w_j) <k| cr |e_j>`` over the ancilla eigenpairs
    ``(w_j, e_j)`` and computational outcomes ``k``; vanishing ones are dropped.
    """
    cr = np.asarray(cr, dtype=complex)
    if cr.shape != (4, 4) or not is_unitary(cr):
        raise ValueError("dilation needs a 4x4 unitary")
    anc = ancilla.data if isinstance(ancilla, DensityMatrix) else np.asarray(ancilla, dtype=complex)
    w, vecs = np.linalg.eigh(anc)
    blocks = cr.reshape(2, 2, 2, 2)  # (anc_out, sys_out, anc_in, sys_in)
    ops = []
    for j in range(2):
        if w[j] <= ATOL:
            continue
        for k in range(2):
            op = np.sqrt(w[j]) * np.einsum("abc,b->ac", blocks[k], vecs[:, j])
            if np.max(np.abs(op)) > 1e-12:
                ops.append(op)
    return KrausChannel(tuple(ops))


def dilation_action(cr: np.ndarray, ancilla: DensityMatrix, rho: DensityMatrix) -> DensityMatrix:
    """Reference route through the explicit two-qubit state and a partial trace."""
    anc = DensityMatrix(ancilla.data if isinstance(ancilla, DensityMatrix) else ancilla, ("1'",))
    sys = DensityMatrix(rho.data if isinstance(rho, DensityMatrix) else rho, ("1",))
    joint = tensor(anc, sys)
    out = cr @ joint.data @ np.asarray(cr).conj().T
    return partial_trace(DensityMatrix(out, joint.labels), {"1"})


def _probe_inputs() -> list[np.ndarray]:
    return [np.outer(v, v.conj()) for v in POLARIZATIONS.values()]


def channel_distance(a, b) -> float:
    """Max entrywise output difference over the H, V, D, R probe inputs."""
    return max(float(np.max(np.abs(_act(a, r) - _act(b, r)))) for r in _probe_inputs())


def channels_equal(a, b, atol: float = ATOL) -> bool:
    return channel_distance(a, b) < atol


def _act(ch, rho: np.ndarray) -> np.ndarray:
    out = apply(ch, rho) if isinstance(ch, KrausChannel) else ch(rho)
    return out.data if isinstance(out, DensityMatrix) else np.asarray(out)
