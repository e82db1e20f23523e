"""Dense linear algebra over registers of at most three qubits.

Qubit ordering: the leftmost label is the most significant bit of the
amplitude index, so ``labels=("1", "3")`` and index ``0b10`` means qubit 1
in ``|1>`` and qubit 3 in ``|0>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

ATOL = 1e-9
MAX_QUBITS = 3

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, SX, SY, SZ)

for _m in PAULIS:
    _m.setflags(write=False)


def _readonly(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _n_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the supported maximum of {MAX_QUBITS}")
    return n


def _check_labels(labels: Sequence[str], dim: int) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate qubit labels {labels}")
    if len(labels) != _n_qubits(dim):
        raise ValueError(f"{len(labels)} labels for dimension {dim}")
    return labels


@dataclass(frozen=True, eq=False)
class QubitState:
    """Normalized pure state of a labelled qubit register."""

    amplitudes: np.ndarray
    labels: tuple[str, ...] = ("0",)

    def __post_init__(self):
        amps = _readonly(self.amplitudes, 1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "labels", _check_labels(self.labels, amps.size))
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > ATOL:
            raise ValueError(f"state is not normalized (|psi|^2 = {norm2})")

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def dm(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.labels)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix on a labelled register."""

    data: np.ndarray
    labels: tuple[str, ...] = ("0",)

    def __post_init__(self):
        rho = _readonly(self.data, 2)
        if rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got {rho.shape}")
        object.__setattr__(self, "data", rho)
        object.__setattr__(self, "labels", _check_labels(self.labels, rho.shape[0]))
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > ATOL:
            raise ValueError(f"density matrix is not Hermitian (deviation {herm:.3g})")
        tr = np.trace(rho)
        if abs(tr - 1.0) > ATOL:
            raise ValueError(f"density matrix trace is {tr}, expected 1")
        lo = np.linalg.eigvalsh(rho).min()
        if lo < -ATOL:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3g}")

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.x**2 + self.y**2 + self.z**2 > 1 + ATOL:
            raise ValueError("Bloch vector lies outside the unit ball")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def length(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))

    @property
    def azimuth(self) -> float:
        return float(np.arctan2(self.y, self.x))

    @property
    def polar(self) -> float:
        return float(np.arctan2(np.hypot(self.x, self.y), self.z))


def ket(theta: float, phi: float, label: str = "3") -> QubitState:
    """Return ``cos(theta)|0> + exp(i phi) sin(theta)|1>``.

    Note that ``theta`` is half the Bloch polar angle.
    """
    return QubitState(np.array([np.cos(theta), np.exp(1j * phi) * np.sin(theta)]), (label,))


def basis_state(bits: Sequence[int], labels: Sequence[str]) -> QubitState:
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int("".join(str(int(b)) for b in bits), 2)] = 1.0
    return QubitState(amps, tuple(labels))


Tensorable = Union[np.ndarray, QubitState, DensityMatrix]


def tensor(a: Tensorable, b: Tensorable) -> Tensorable:
    """Kronecker product with ``a``'s factors preceding ``b``'s."""
    if isinstance(a, QubitState) and isinstance(b, QubitState):
        return QubitState(np.kron(a.amplitudes, b.amplitudes), a.labels + b.labels)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.data, b.data), a.labels + b.labels)
    if isinstance(a, (QubitState, DensityMatrix)) or isinstance(b, (QubitState, DensityMatrix)):
        raise TypeError("tensor operands must be of the same kind")
    out = np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    _n_qubits(out.shape[0])
    return out


def embed(op: np.ndarray, targets: Sequence[str], labels: Sequence[str]) -> np.ndarray:
    """Lift ``op`` acting on ``targets`` (in that order) to the full register."""
    targets, labels = tuple(targets), tuple(labels)
    k, n = len(targets), len(labels)
    op = np.asarray(op, dtype=complex)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} target qubits")
    missing = set(targets) - set(labels)
    if missing:
        raise ValueError(f"unknown qubit labels {sorted(missing)}")
    rest = [lbl for lbl in labels if lbl not in targets]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    order = list(targets) + rest
    perm = [order.index(lbl) for lbl in labels]
    full = full.reshape((2,) * (2 * n))
    full = full.transpose(perm + [n + i for i in perm])
    return full.reshape(2**n, 2**n)


def partial_trace(rho: DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    keep = set(keep)
    if not keep:
        raise ValueError("keep set must be non-empty")
    unknown = keep - set(rho.labels)
    if unknown:
        raise ValueError(f"unknown qubit labels {sorted(unknown)}")
    n = rho.n_qubits
    kept = [i for i, lbl in enumerate(rho.labels) if lbl in keep]
    traced = [i for i in range(n) if i not in kept]
    t = rho.data.reshape((2,) * (2 * n))
    t = t.transpose(kept + traced + [n + i for i in kept] + [n + i for i in traced])
    dk, dt = 2 ** len(kept), 2 ** len(traced)
    t = t.reshape(dk, dt, dk, dt)
    reduced = np.einsum("ajbj->ab", t)
    return DensityMatrix(reduced, tuple(rho.labels[i] for i in kept))


def _as_matrix(rho) -> np.ndarray:
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def _psd_sqrt(m: np.ndarray, atol: float) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    if w.min() < -atol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3g})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, sigma, atol: float = ATOL) -> float:
    """Root fidelity ``Tr sqrt(sqrt(sigma) rho sqrt(sigma))``.

    Qubits use the closed form ``sqrt(tr(rho sigma) + 2 sqrt(det rho det sigma))``.
    """
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    for m in (a, b):
        if np.linalg.eigvalsh(m).min() < -atol:
            raise ValueError("fidelity requires positive semidefinite inputs")
    if a.shape == (2, 2):
        det_a = max(np.linalg.det(a).real, 0.0)
        det_b = max(np.linalg.det(b).real, 0.0)
        f2 = np.trace(a @ b).real + 2.0 * np.sqrt(det_a * det_b)
        return float(np.clip(np.sqrt(max(f2, 0.0)), 0.0, 1.0))
    sb = _psd_sqrt(b, atol)
    inner = sb @ a @ sb
    w = np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0.0, None)
    return float(np.clip(np.sqrt(w).sum(), 0.0, 1.0))


def bloch_vector(rho) -> BlochVector:
    m = _as_matrix(rho)
    if m.shape != (2, 2):
        raise ValueError("Bloch vectors are defined for single-qubit states only")
    x, y, z = (float(np.trace(m @ p).real) for p in (SX, SY, SZ))
    return BlochVector(x, y, z)


def is_unitary(u: np.ndarray, atol: float = ATOL) -> bool:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < atol)


def phase_distance(a, b) -> float:
    """Max entrywise ``|a - e^{i g} b|`` with ``g`` fixed by the largest entry of ``b``."""
    a = np.asarray(a.amplitudes if isinstance(a, QubitState) else a, dtype=complex)
    b = np.asarray(b.amplitudes if isinstance(b, QubitState) else b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) == 0.0:
        return float(np.max(np.abs(a)))
    ratio = a[idx] / b[idx]
    phase = ratio / abs(ratio) if abs(ratio) > 0 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def equal_up_to_phase(a, b, atol: float = ATOL) -> bool:
    return phase_distance(a, b) < atol
