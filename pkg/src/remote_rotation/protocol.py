"""Two-party remote z-rotation: Bob encodes, Alice rotates, Alice decodes.

Register: qubit ``"1"`` (Alice, photon A polarization), ``"2"`` (Bob, photon B
path) and ``"3"`` (Bob, photon B polarization, the target). States stay pure
when no noise is configured and become density matrices otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .channels import NoiseParams, apply_on, dephasing
from .optics import hwp, pbs_cnot, prepare_resource, prepare_target, rz
from .qmath import DensityMatrix, QubitState, embed, ket

State = Union[QubitState, DensityMatrix]

ALICE = "Alice"
BOB = "Bob"
MODES = ("enumerate", "sample")
PLACEMENTS = ("photon_A", "path_B", "both_as_paper")
ENCODING = "encoding_outcome"
DECODING = "decoding_outcome"

_Z_BASIS = (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex))
_X_BASIS = (np.array([1, 1], dtype=complex) / np.sqrt(2), np.array([1, -1], dtype=complex) / np.sqrt(2))
_BRANCH_EPS = 1e-15


class TranscriptError(ValueError):
    pass


@dataclass(frozen=True)
class Party:
    name: str
    held_qubits: frozenset


PARTIES = {
    ALICE: Party(ALICE, frozenset({"1"})),
    BOB: Party(BOB, frozenset({"2", "3"})),
}


@dataclass(frozen=True)
class ClassicalMessage:
    sender: str
    receiver: str
    bit: int
    purpose: str
    branch: tuple = ()


@dataclass(frozen=True)
class Step:
    actor: str
    action: str
    outcome: Optional[int] = None
    branch_probability: float = 1.0
    branch: tuple = ()


@dataclass(frozen=True)
class Branch:
    encode_bit: int
    decode_bit: int
    probability: float
    state: State


@dataclass(frozen=True)
class RunConfig:
    """Inputs of one protocol run. Angles are in radians."""

    theta: float = 0.0
    phi: float = 0.0
    varphi: float = 0.0
    noise: NoiseParams = field(default_factory=NoiseParams)
    mode: str = "enumerate"
    seed: Optional[int] = None
    noise_placement: str = "both_as_paper"
    discard_d_branch: bool = False

    def __post_init__(self):
        for name in ("theta", "phi", "varphi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.noise_placement not in PLACEMENTS:
            raise ValueError(f"noise_placement must be one of {PLACEMENTS}")
        if self.mode == "sample" and self.seed is None:
            raise ValueError("sample mode requires a seed")
        if self.seed is not None and not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class ProtocolTranscript:
    config: RunConfig
    steps: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    branches: list = field(default_factory=list)
    final_state: Optional[DensityMatrix] = None

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "theta": cfg.theta,
                "phi": cfg.phi,
                "varphi": cfg.varphi,
                "p": cfg.noise.p,
                "eta": cfg.noise.eta,
                "mode": cfg.mode,
                "seed": cfg.seed,
                "noise_placement": cfg.noise_placement,
                "discard_d_branch": cfg.discard_d_branch,
            },
            "steps": [
                {
                    "actor": s.actor,
                    "action": s.action,
                    "outcome": s.outcome,
                    "branch_probability": float(s.branch_probability),
                    "branch": list(s.branch),
                }
                for s in self.steps
            ],
            "messages": [
                {
                    "from": m.sender,
                    "to": m.receiver,
                    "bit": m.bit,
                    "purpose": m.purpose,
                    "branch": list(m.branch),
                }
                for m in self.messages
            ],
            "branches": [_branch_dict(b) for b in self.branches],
            "final_state": complex_to_json(self.final_state.data),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def complex_to_json(a: np.ndarray):
    """Nested lists with each complex entry as ``[re, im]``."""
    a = np.asarray(a)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [complex_to_json(x) for x in a]


def complex_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _branch_dict(b: Branch) -> dict:
    out = {"encode_bit": b.encode_bit, "decode_bit": b.decode_bit, "probability": float(b.probability)}
    if isinstance(b.state, QubitState):
        out["amplitudes"] = complex_to_json(b.state.amplitudes)
    else:
        out["density"] = complex_to_json(b.state.data)
    return out


def _evolve(state: State, u: np.ndarray, targets) -> State:
    full = embed(u, targets, state.labels)
    if isinstance(state, QubitState):
        return QubitState(full @ state.amplitudes, state.labels)
    return DensityMatrix(full @ state.data @ full.conj().T, state.labels)


def _measure(state: State, label: str, basis) -> list:
    """Measure ``label`` in ``basis``; yield ``(reduced post-state, probability)`` per outcome.

    Outcomes with vanishing probability come back as ``(None, 0.0)``.
    """
    idx = state.labels.index(label)
    rest = tuple(x for x in state.labels if x != label)
    n = len(state.labels)
    out = []
    for vec in basis:
        if isinstance(state, QubitState):
            t = state.amplitudes.reshape((2,) * n)
            r = np.tensordot(vec.conj(), t, axes=([0], [idx])).reshape(-1)
            prob = float(np.vdot(r, r).real)
            post = QubitState(r / np.sqrt(prob), rest) if prob > _BRANCH_EPS else None
        else:
            t = state.data.reshape((2,) * (2 * n))
            r = np.tensordot(vec.conj(), t, axes=([0], [idx]))
            r = np.tensordot(r, vec, axes=([n - 1 + idx], [0]))
            d = 2 ** (n - 1)
            r = r.reshape(d, d)
            prob = float(np.trace(r).real)
            post = DensityMatrix(r / prob, rest) if prob > _BRANCH_EPS else None
        out.append((post, prob if post is not None else 0.0))
    return out


def encode(state: State) -> list:
    """Bob's CNOT (3 controls 2), z-measurement of 2, and Alice's conditional flip of 1.

    Returns ``[(state on ("1", "3"), outcome bit, probability), ...]``.
    """
    if set(state.labels) != {"1", "2", "3"}:
        raise ValueError(f"encoding expects qubits 1, 2, 3; got {state.labels}")
    state = _evolve(state, pbs_cnot("3", "2"), ("3", "2"))
    branches = []
    for bit, (post, prob) in enumerate(_measure(state, "2", _Z_BASIS)):
        if post is None:
            continue
        if bit == 1:
            post = _evolve(post, hwp(np.pi / 4), ("1",))
        branches.append((post, bit, prob))
    return branches


def operate(state: State, varphi: float) -> State:
    """Alice applies ``rz(varphi)`` to qubit 1."""
    return _evolve(state, rz(varphi), ("1",))


def decode(state: State) -> list:
    """Alice's x-measurement of 1 and Bob's sigma_z fix (HWP at 0deg) on outcome ``-``.

    Returns ``[(state on ("3",), outcome bit, probability), ...]``.
    """
    branches = []
    for bit, (post, prob) in enumerate(_measure(state, "1", _X_BASIS)):
        if post is None:
            continue
        if bit == 1:
            post = _evolve(post, hwp(0.0), ("3",))
        branches.append((post, bit, prob))
    return branches


def _inject_noise(state: QubitState, config: RunConfig, steps: list) -> DensityMatrix:
    rho = state.dm()
    noise = config.noise
    if config.noise_placement == "photon_A":
        plan = [("1", noise.visibility)]
    elif config.noise_placement == "path_B":
        plan = [("2", noise.visibility)]
    else:
        plan = [("1", noise.p), ("2", noise.eta)]
    for label, v in plan:
        rho = apply_on(dephasing(v), rho, (label,))
        steps.append(Step("environment", f"dephase_{label}(v={v!r})"))
    return rho


def _draw(rng: np.random.Generator, branches: list):
    probs = np.array([b[2] for b in branches])
    k = int(np.searchsorted(np.cumsum(probs / probs.sum()), rng.random(), side="right"))
    return branches[min(k, len(branches) - 1)]


def _encoded_branches(config: RunConfig, steps: list) -> list:
    state = prepare_resource()
    steps.append(Step("source", "share_ebit"))
    state = prepare_target(state, config.theta, config.phi)
    steps.append(Step(BOB, "prepare_target"))
    if not config.noise.noiseless:
        state = _inject_noise(state, config, steps)

    steps.append(Step(BOB, "pbs_cnot_3_to_2"))
    enc = encode(state)
    if config.discard_d_branch:
        for post, bit, prob in enc:
            if bit == 1:
                steps.append(Step(BOB, "post_select_discard", bit, prob, (bit,)))
        kept = sum(prob for _, bit, prob in enc if bit == 0)
        enc = [(post, bit, prob / kept) for post, bit, prob in enc if bit == 0]
    return enc


def run(config: RunConfig) -> ProtocolTranscript:
    tr = ProtocolTranscript(config)
    steps, messages = tr.steps, tr.messages
    rng = np.random.default_rng(config.seed) if config.mode == "sample" else None

    enc = _encoded_branches(config, steps)
    if rng is not None:
        enc = [_draw(rng, enc)]

    for s13, m, p_m in enc:
        steps.append(Step(BOB, "measure_z_2", m, p_m, (m,)))
        messages.append(ClassicalMessage(BOB, ALICE, m, ENCODING, (m,)))
        if m == 1:
            steps.append(Step(ALICE, "hwp45_on_1", None, p_m, (m,)))
        s13 = operate(s13, config.varphi)
        steps.append(Step(ALICE, "rotate_1", None, p_m, (m,)))
        dec = decode(s13)
        if rng is not None:
            dec = [_draw(rng, dec)]
        for s3, d, p_d in dec:
            p = p_m * p_d
            steps.append(Step(ALICE, "measure_x_1", d, p, (m, d)))
            messages.append(ClassicalMessage(ALICE, BOB, d, DECODING, (m, d)))
            if d == 1:
                steps.append(Step(BOB, "hwp0_on_3", None, p, (m, d)))
            tr.branches.append(Branch(m, d, p, s3))

    total = sum(b.probability for b in tr.branches)
    rho = sum(b.probability * _as_dm(b.state).data for b in tr.branches) / total
    tr.final_state = DensityMatrix((rho + rho.conj().T) / 2, ("3",))
    return tr


def _as_dm(state: State) -> DensityMatrix:
    return state.dm() if isinstance(state, QubitState) else state


def ideal_output(theta: float, phi: float, varphi: float) -> QubitState:
    """``rz(varphi)|psi(theta, phi)>``, the state Bob should end up holding."""
    return QubitState(rz(varphi) @ ket(theta, phi).amplitudes, ("3",))


def resource_accounting(transcript: ProtocolTranscript) -> tuple[int, int, int]:
    """Return ``(ebits, cbits Bob->Alice, cbits Alice->Bob)`` consumed by one run."""
    ebits = sum(1 for s in transcript.steps if s.action == "share_ebit")
    if ebits != 1:
        raise TranscriptError(f"expected one shared ebit, found {ebits}")
    if not transcript.branches:
        raise TranscriptError("transcript has no completed branch")
    b_to_a = a_to_b = None
    for br in transcript.branches:
        enc = [m for m in transcript.messages if m.purpose == ENCODING and m.branch == (br.encode_bit,)]
        dec = [
            m
            for m in transcript.messages
            if m.purpose == DECODING and m.branch == (br.encode_bit, br.decode_bit)
        ]
        if len(enc) != 1 or len(dec) != 1:
            raise TranscriptError(f"branch {(br.encode_bit, br.decode_bit)} lacks its classical messages")
        if (enc[0].sender, enc[0].receiver) != (BOB, ALICE) or enc[0].bit != br.encode_bit:
            raise TranscriptError("malformed encoding message")
        if (dec[0].sender, dec[0].receiver) != (ALICE, BOB) or dec[0].bit != br.decode_bit:
            raise TranscriptError("malformed decoding message")
        b_to_a, a_to_b = len(enc), len(dec)
    return ebits, b_to_a, a_to_b


def run_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit seed for run ``index`` of a seeded batch."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1, np.uint64)[0])


def sample_outcomes(config: RunConfig, n_runs: int) -> np.ndarray:
    """Outcome bits ``(m, d)`` of ``n_runs`` sample-mode runs seeded by :func:`run_seed`.

    Row ``i`` equals the branch that ``run`` draws for
    ``replace(config, mode="sample", seed=run_seed(config.seed, i))``; the
    branch structure is computed once instead of per run.
    """
    if config.seed is None:
        raise ValueError("sampling requires a master seed")
    enc = _encoded_branches(config, [])
    dec = {m: decode(operate(s13, config.varphi)) for s13, m, _ in enc}
    out = np.empty((n_runs, 2), dtype=int)
    for i in range(n_runs):
        rng = np.random.default_rng(run_seed(config.seed, i))
        _, m, _ = _draw(rng, enc)
        _, d, _ = _draw(rng, dec[m])
        out[i] = m, d
    return out


PROBE_ANGLES = {
    "H": (0.0, 0.0),
    "V": (np.pi / 2, 0.0),
    "D": (np.pi / 4, 0.0),
    "R": (np.pi / 4, -np.pi / 2),
}


def probe_outputs(config: RunConfig) -> dict:
    """Branch-averaged qubit-3 output for each tomography probe fed through the protocol."""
    out = {}
    for label, (theta, phi) in PROBE_ANGLES.items():
        cfg = RunConfig(
            theta=theta,
            phi=phi,
            varphi=config.varphi,
            noise=config.noise,
            noise_placement=config.noise_placement,
            discard_d_branch=config.discard_d_branch,
        )
        out[label] = run(cfg).final_state.data
    return out
