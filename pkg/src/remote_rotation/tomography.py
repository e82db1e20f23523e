"""State and process tomography, channel-averaged fidelity and Bloch angle deviation."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .channels import KrausChannel
from .optics import POLARIZATIONS
from .qmath import ATOL, PAULIS, DensityMatrix, bloch_vector

BASIS_LABELS = ("I", "X", "Y", "Z")
PROBES = ("H", "V", "D", "R")

# Row-major vectorization: vec(A rho B) = (A kron B^T) vec(rho).
_PAULI_SUPEROPS = np.stack(
    [np.kron(em, en.conj()).reshape(-1) for em in PAULIS for en in PAULIS], axis=1
)


@dataclass(frozen=True, eq=False)
class ChiMatrix:
    """Process matrix in the (I, X, Y, Z) basis: ``e(rho) = sum chi_mn E_m rho E_n^dagger``."""

    entries: np.ndarray

    def __post_init__(self):
        chi = np.array(self.entries, dtype=complex)
        if chi.shape != (4, 4):
            raise ValueError(f"chi must be 4x4, got {chi.shape}")
        chi.setflags(write=False)
        object.__setattr__(self, "entries", chi)

    def __getitem__(self, key) -> complex:
        m, n = key
        if isinstance(m, str):
            m = BASIS_LABELS.index(m)
        if isinstance(n, str):
            n = BASIS_LABELS.index(n)
        return complex(self.entries[m, n])

    def apply(self, rho) -> np.ndarray:
        rho = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
        out = np.zeros((2, 2), dtype=complex)
        for m, em in enumerate(PAULIS):
            for n, en in enumerate(PAULIS):
                out += self.entries[m, n] * em @ rho @ en.conj().T
        return out

    def __call__(self, rho) -> np.ndarray:
        return self.apply(rho)

    def violations(self, atol: float = ATOL) -> list[str]:
        chi = self.entries
        found = []
        herm = np.max(np.abs(chi - chi.conj().T))
        if herm > atol:
            found.append(f"not Hermitian (deviation {herm:.3g})")
        lo = np.linalg.eigvalsh((chi + chi.conj().T) / 2).min()
        if lo < -atol:
            found.append(f"not positive semidefinite (eigenvalue {lo:.3g})")
        tp = sum(chi[m, n] * en.conj().T @ em for m, em in enumerate(PAULIS) for n, en in enumerate(PAULIS))
        dev = np.max(np.abs(tp - np.eye(2)))
        if dev > atol:
            found.append(f"not trace preserving (deviation {dev:.3g})")
        return found

    def check(self, atol: float = ATOL) -> "ChiMatrix":
        bad = self.violations(atol)
        if bad:
            raise ValueError("invalid chi matrix: " + "; ".join(bad))
        return self

    def to_kraus(self) -> KrausChannel:
        w, v = np.linalg.eigh((self.entries + self.entries.conj().T) / 2)
        ops = [
            np.sqrt(wk) * sum(v[m, k] * PAULIS[m] for m in range(4))
            for k, wk in enumerate(w)
            if wk > ATOL
        ]
        return KrausChannel(tuple(ops))

    def to_dict(self) -> dict:
        return {
            "basis": list(BASIS_LABELS),
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ChiMatrix":
        if list(obj.get("basis", [])) != list(BASIS_LABELS):
            raise ValueError(f"unsupported chi basis {obj.get('basis')}")
        arr = np.asarray(obj["entries"], dtype=float)
        return cls(arr[..., 0] + 1j * arr[..., 1])


@dataclass(frozen=True)
class ChiEstimate:
    """Shot-noise reconstruction: the raw linear inversion and its PSD projection."""

    raw: ChiMatrix
    projected: ChiMatrix


@dataclass(frozen=True, eq=False)
class DeviationReport:
    delta_max: float  # degrees
    argmax_input: tuple  # (theta, phi) in radians, state parameterization
    deltas: np.ndarray  # degrees on the (azimuth, polar) grid, NaN where undefined

    def __post_init__(self):
        if not 0.0 <= self.delta_max <= 180.0:
            raise ValueError("delta_max must lie in [0, 180] degrees")


def _dm(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


def _bloch_to_dm(x: float, y: float, z: float) -> np.ndarray:
    return 0.5 * (PAULIS[0] + x * PAULIS[1] + y * PAULIS[2] + z * PAULIS[3])


def state_tomography(measure: Callable, shots: Optional[int] = None, label: str = "3") -> DensityMatrix:
    """Linear single-qubit reconstruction ``(I + x X + y Y + z Z) / 2``.

    ``measure(axis)`` is called for ``axis`` in ``"X", "Y", "Z"``. Without
    ``shots`` it must return the exact expectation value; with ``shots`` it
    must return the ``(n_plus, n_minus)`` counts for that setting. A Bloch
    vector pushed outside the unit ball by shot noise is scaled back onto it.
    """
    r = []
    for axis in ("X", "Y", "Z"):
        if shots is None:
            r.append(float(measure(axis)))
            continue
        n_plus, n_minus = measure(axis)
        total = n_plus + n_minus
        if total <= 0:
            raise ValueError(f"no counts recorded for the {axis} setting")
        r.append((n_plus - n_minus) / total)
    r = np.array(r)
    length = np.linalg.norm(r)
    if length > 1.0:
        r = r / length
    return DensityMatrix(_bloch_to_dm(*r), (label,))


def counting_measurement(rho, shots: int, rng: np.random.Generator) -> Callable:
    """Binomially sampled ``(n_plus, n_minus)`` counts for projective Pauli measurements."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    b = bloch_vector(rho)
    expect = {"X": b.x, "Y": b.y, "Z": b.z}

    def measure(axis: str):
        p_plus = float(np.clip((1 + expect[axis]) / 2, 0.0, 1.0))
        n_plus = int(rng.binomial(shots, p_plus))
        return n_plus, shots - n_plus

    return measure


def _channel_outputs(channel, probes) -> list[np.ndarray]:
    if isinstance(channel, Mapping):
        outs = [channel[k] for k in probes]
    else:
        outs = [channel(_dm(POLARIZATIONS[k])) for k in probes]
    outs = [o.data if isinstance(o, DensityMatrix) else np.asarray(o, dtype=complex) for o in outs]
    for o in outs:
        if o.shape != (2, 2):
            raise ValueError(f"probe output has shape {o.shape}, expected (2, 2)")
    return outs


def chi_from_probe_outputs(outputs: list[np.ndarray], probes=PROBES) -> ChiMatrix:
    """Linear inversion: superoperator from the probe pairs, then Pauli-basis coordinates."""
    inputs = np.stack([_dm(POLARIZATIONS[k]).reshape(-1) for k in probes], axis=1)
    results = np.stack([np.asarray(o).reshape(-1) for o in outputs], axis=1)
    superop = results @ np.linalg.inv(inputs)
    coeffs = np.linalg.solve(_PAULI_SUPEROPS, superop.reshape(-1))
    return ChiMatrix(coeffs.reshape(4, 4))


def project_chi(chi: ChiMatrix) -> ChiMatrix:
    """Nearest PSD matrix by eigenvalue clipping, renormalized to unit trace."""
    w, v = np.linalg.eigh((chi.entries + chi.entries.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return ChiMatrix(out / np.trace(out).real)


def process_tomography(channel, probes=PROBES, shots: Optional[int] = None, seed: Optional[int] = None):
    """Reconstruct chi from the action of ``channel`` on the H, V, D, R probes.

    ``channel`` may be a :class:`KrausChannel`, any callable on 2x2 density
    matrices, or a mapping from probe label to output state. In exact mode a
    validated :class:`ChiMatrix` is returned; with ``shots`` the probe outputs
    are re-estimated by simulated state tomography and a :class:`ChiEstimate`
    is returned.
    """
    probes = tuple(probes)
    if sorted(probes) != sorted(PROBES):
        raise ValueError(f"probe set must be {PROBES}")
    outputs = _channel_outputs(channel, probes)
    if shots is None:
        return chi_from_probe_outputs(outputs, probes).check()
    rng = np.random.default_rng(seed)
    estimated = [
        state_tomography(counting_measurement(o, shots, rng), shots=shots).data for o in outputs
    ]
    raw = chi_from_probe_outputs(estimated, probes)
    return ChiEstimate(raw=raw, projected=project_chi(raw))


def _sphere_states(polar: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
    """Batch of pure-state density matrices at the given Bloch angles."""
    a = np.cos(polar / 2)
    b = np.exp(1j * azimuth) * np.sin(polar / 2)
    psi = np.stack([a, b], axis=-1).astype(complex)
    return np.einsum("...i,...j->...ij", psi, psi.conj())


def _batch_apply(channel, rhos: np.ndarray) -> np.ndarray:
    if isinstance(channel, KrausChannel):
        return sum(np.einsum("ij,...jk,lk->...il", k, rhos, k.conj()) for k in channel.operators)
    if isinstance(channel, np.ndarray):
        return np.einsum("ij,...jk,lk->...il", channel, rhos, channel.conj())
    flat = rhos.reshape(-1, 2, 2)
    out = np.stack([np.asarray(getattr(r, "data", r)) for r in (channel(x) for x in flat)])
    return out.reshape(rhos.shape)


def _batch_fidelity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    overlap = np.einsum("...ij,...ji->...", a, b).real
    det_a = np.clip(np.linalg.det(a).real, 0.0, None)
    det_b = np.clip(np.linalg.det(b).real, 0.0, None)
    return np.clip(np.sqrt(np.clip(overlap + 2 * np.sqrt(det_a * det_b), 0.0, None)), 0.0, 1.0)


def fidelity_samples(ch_a, ch_b, n: int, seed: int = 0) -> np.ndarray:
    """Pointwise output fidelities on ``n`` Haar-random pure inputs."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    rhos = np.einsum("ni,nj->nij", z, z.conj())
    return _batch_fidelity(_batch_apply(ch_a, rhos), _batch_apply(ch_b, rhos))


def avg_fidelity(
    ch_a,
    ch_b,
    method: str = "quadrature",
    nodes: int = 64,
    samples: int = 100_000,
    seed: int = 0,
) -> float:
    """Fidelity between two single-qubit channels averaged over pure inputs on the Bloch sphere.

    Quadrature uses Gauss-Legendre nodes in the cosine of the polar angle and
    a periodic trapezoid rule in azimuth.
    """
    if method == "montecarlo":
        return float(fidelity_samples(ch_a, ch_b, samples, seed).mean())
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    u, w = np.polynomial.legendre.leggauss(nodes)
    az = 2 * np.pi * np.arange(nodes) / nodes
    polar, azimuth = np.meshgrid(np.arccos(u), az, indexing="ij")
    rhos = _sphere_states(polar, azimuth)
    f = _batch_fidelity(_batch_apply(ch_a, rhos), _batch_apply(ch_b, rhos))
    return float(np.sum(w[:, None] * f) / (2 * nodes))


def _batch_bloch(rhos: np.ndarray) -> np.ndarray:
    r01 = rhos[..., 0, 1]
    return np.stack([2 * r01.real, -2 * r01.imag, (rhos[..., 0, 0] - rhos[..., 1, 1]).real], axis=-1)


def _angles(ch, ideal, rhos: np.ndarray) -> np.ndarray:
    """Bloch-vector angle in radians; NaN when either output vector vanishes."""
    va = _batch_bloch(_batch_apply(ch, rhos))
    vb = _batch_bloch(_batch_apply(ideal, rhos))
    cross = np.linalg.norm(np.cross(va, vb), axis=-1)
    dot = np.sum(va * vb, axis=-1)
    ang = np.arctan2(cross, dot)
    small = (np.linalg.norm(va, axis=-1) < 1e-12) | (np.linalg.norm(vb, axis=-1) < 1e-12)
    return np.where(small, np.nan, ang)


def angle_deviation(ch, ideal, state) -> Optional[float]:
    """Angle in degrees between the Bloch vectors of ``ch(psi)`` and ``ideal(psi)``.

    Returns ``None`` when either output has a zero-length Bloch vector.
    """
    amps = state.amplitudes if hasattr(state, "amplitudes") else np.asarray(state, dtype=complex)
    ang = _angles(ch, ideal, _dm(amps)[None])[0]
    return None if np.isnan(ang) else float(np.degrees(ang))


def max_angle_deviation(ch, ideal, n_azimuth: int = 181, n_polar: int = 91, rounds: int = 4) -> DeviationReport:
    """Grid search over the Bloch sphere followed by coordinate-wise bounded refinement."""
    az = np.linspace(0.0, 2 * np.pi, n_azimuth)
    po = np.linspace(0.0, np.pi, n_polar)
    A, P = np.meshgrid(az, po, indexing="ij")
    grid = _angles(ch, ideal, _sphere_states(P, A))
    deltas = np.degrees(grid)
    if np.all(np.isnan(grid)):
        return DeviationReport(0.0, (0.0, 0.0), deltas)

    i, j = np.unravel_index(np.nanargmax(grid), grid.shape)
    best_az, best_po, best = az[i], po[j], grid[i, j]
    d_az, d_po = az[1] - az[0], po[1] - po[0]

    def objective(polar, azimuth):
        v = _angles(ch, ideal, _sphere_states(np.array([polar]), np.array([azimuth])))[0]
        return -np.inf if np.isnan(v) else v

    for _ in range(rounds):
        lo, hi = max(0.0, best_po - d_po), min(np.pi, best_po + d_po)
        res = minimize_scalar(lambda t: -objective(t, best_az), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        if -res.fun > best:
            best, best_po = -res.fun, res.x
        res = minimize_scalar(lambda t: -objective(best_po, t), bounds=(best_az - d_az, best_az + d_az),
                              method="bounded", options={"xatol": 1e-10})
        if -res.fun > best:
            best, best_az = -res.fun, res.x

    return DeviationReport(
        delta_max=float(np.degrees(best)),
        argmax_input=(float(best_po / 2), float(np.mod(best_az, 2 * np.pi))),
        deltas=deltas,
    )


def render_chi_table(chi: ChiMatrix, title: str = "chi") -> str:
    """Real and imaginary parts side by side, one row per basis element."""
    head = "      " + "".join(f"{b:>9}" for b in BASIS_LABELS)
    lines = [f"{title}", f"{'Re':<42}   Im", head + "   |" + head[6:]]
    shown = np.round(chi.entries, 4) + 0.0  # drop signed zeros
    for m, lbl in enumerate(BASIS_LABELS):
        re = "".join(f"{shown[m, n].real + 0.0:9.4f}" for n in range(4))
        im = "".join(f"{shown[m, n].imag + 0.0:9.4f}" for n in range(4))
        lines.append(f"  {lbl:<4}{re}   |{im}")
    return "\n".join(lines)
