import json
from dataclasses import replace

import numpy as np
import pytest

from remote_rotation.channels import NoiseParams, apply, dephased_rotation
from remote_rotation.optics import POLARIZATIONS, prepare_resource, prepare_target, rz
from remote_rotation.protocol import (
    PROBE_ANGLES,
    ClassicalMessage,
    RunConfig,
    TranscriptError,
    complex_from_json,
    decode,
    encode,
    ideal_output,
    operate,
    probe_outputs,
    resource_accounting,
    run,
    run_seed,
    sample_outcomes,
)
from remote_rotation.qmath import SZ, QubitState, bloch_vector, equal_up_to_phase, ket, phase_distance

EXPERIMENT = NoiseParams(0.85, 0.92)


def encoded_oracle(theta, phi):
    """alpha|00> + beta|11> on (1, 3), written out directly."""
    return np.array([np.cos(theta), 0, 0, np.exp(1j * phi) * np.sin(theta)])


def joint_state(theta, phi):
    return prepare_target(prepare_resource(), theta, phi)


class TestEncode:
    def test_pole(self):
        for s13, bit, prob in encode(joint_state(0, 0)):
            assert prob == pytest.approx(0.5)
            np.testing.assert_allclose(s13.amplitudes, [1, 0, 0, 0], atol=1e-15)

    def test_plus_gives_bell(self):
        for s13, _, _ in encode(joint_state(np.pi / 4, 0)):
            np.testing.assert_allclose(s13.amplitudes, np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-15)

    def test_random_targets(self, rng):
        for _ in range(50):
            theta, phi = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)
            branches = encode(joint_state(theta, phi))
            assert sorted(b[1] for b in branches) == [0, 1]
            for s13, _, prob in branches:
                assert s13.labels == ("1", "3")
                assert prob == pytest.approx(0.5, abs=1e-12)
                np.testing.assert_allclose(s13.amplitudes, encoded_oracle(theta, phi), atol=1e-12)

    def test_rejects_wrong_register(self):
        with pytest.raises(ValueError):
            encode(ket(0, 0))


class TestOperate:
    def test_zero_angle(self):
        s = QubitState(encoded_oracle(0.3, 0.4), ("1", "3"))
        np.testing.assert_allclose(operate(s, 0.0).amplitudes, s.amplitudes)

    def test_experiment_angle(self):
        s = QubitState(encoded_oracle(np.pi / 4, 0), ("1", "3"))
        out = operate(s, 2 * np.pi / 3).amplitudes
        expect = np.array([np.exp(1j * np.pi / 3), 0, 0, np.exp(-1j * np.pi / 3)]) / np.sqrt(2)
        np.testing.assert_allclose(out, expect, atol=1e-15)

    def test_pi_flips_relative_sign(self):
        a, b = np.cos(0.3), np.sin(0.3)
        out = operate(QubitState(np.array([a, 0, 0, b]), ("1", "3")), np.pi).amplitudes
        np.testing.assert_allclose(out, [1j * a, 0, 0, -1j * b], atol=1e-15)


class TestDecode:
    def test_experiment_angle_on_plus(self):
        s = operate(QubitState(encoded_oracle(np.pi / 4, 0), ("1", "3")), 2 * np.pi / 3)
        for s3, _, prob in decode(s):
            assert prob == pytest.approx(0.5)
            assert equal_up_to_phase(s3, rz(2 * np.pi / 3) @ ket(np.pi / 4, 0).amplitudes)

    def test_identity_teleported(self, rng):
        theta, phi = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)
        s = operate(QubitState(encoded_oracle(theta, phi), ("1", "3")), 0.0)
        for s3, _, _ in decode(s):
            assert equal_up_to_phase(s3, ket(theta, phi))

    def test_pole(self):
        for s3, _, _ in decode(QubitState(np.array([1, 0, 0, 0]), ("1", "3"))):
            assert equal_up_to_phase(s3.amplitudes, [1, 0])

    def test_correction_commutes(self, rng):
        for varphi in rng.uniform(0, 2 * np.pi, 10):
            np.testing.assert_array_equal(SZ @ rz(varphi) @ SZ, rz(varphi))


class TestRun:
    def test_noiseless_branches_agree(self, rng):
        for _ in range(200):
            theta, phi, varphi = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi), rng.uniform(0, 2 * np.pi)
            tr = run(RunConfig(theta, phi, varphi))
            target = ideal_output(theta, phi, varphi)
            assert len(tr.branches) == 4
            assert sum(b.probability for b in tr.branches) == pytest.approx(1.0, abs=1e-9)
            for b in tr.branches:
                assert phase_distance(b.state, target) < 1e-9

    def test_diagonal_input_experiment_angle(self):
        tr = run(RunConfig(np.pi / 4, 0.0, 2 * np.pi / 3))
        # rz oracle on |D>: coherence 0.5 e^{i 2pi/3}, so (x, y) = (cos 120, -sin 120)
        oracle = rz(2 * np.pi / 3) @ POLARIZATIONS["D"]
        rho = np.outer(oracle, oracle.conj())
        expect = [2 * rho[0, 1].real, -2 * rho[0, 1].imag, 0.0]
        np.testing.assert_allclose(expect, [-0.5, -np.sqrt(3) / 2, 0], atol=1e-15)
        np.testing.assert_allclose(bloch_vector(tr.final_state).as_array(), expect, atol=1e-12)

    def test_zero_angle_returns_input(self, rng):
        theta, phi = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)
        tr = run(RunConfig(theta, phi, 0.0))
        np.testing.assert_allclose(tr.final_state.data, ket(theta, phi).dm().data, atol=1e-12)

    def test_noisy_diagonal_input(self):
        vp = 2 * np.pi / 3
        tr = run(RunConfig(np.pi / 4, 0.0, vp, EXPERIMENT))
        off = 0.391 * np.exp(1j * vp)
        np.testing.assert_allclose(tr.final_state.data, [[0.5, off], [np.conj(off), 0.5]], atol=1e-12)

    def test_matches_channel(self, rng):
        for _ in range(100):
            theta, phi, varphi = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi), rng.uniform(0, 2 * np.pi)
            params = NoiseParams(rng.uniform(), rng.uniform())
            tr = run(RunConfig(theta, phi, varphi, params))
            expect = apply(dephased_rotation(varphi, params), ket(theta, phi).dm().data)
            np.testing.assert_allclose(tr.final_state.data, expect, atol=1e-9)
            assert sum(b.probability for b in tr.branches) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("placement", ["photon_A", "path_B"])
    def test_noise_placement_equivalence(self, rng, placement):
        for _ in range(30):
            cfg = RunConfig(
                rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi), rng.uniform(0, 2 * np.pi),
                NoiseParams(rng.uniform(), rng.uniform()),
            )
            a = run(cfg).final_state.data
            b = run(replace(cfg, noise_placement=placement)).final_state.data
            np.testing.assert_allclose(a, b, atol=1e-9)

    def test_discard_branch(self, rng):
        cfg = RunConfig(0.3, 0.7, 1.1, EXPERIMENT, discard_d_branch=True)
        tr = run(cfg)
        assert {b.encode_bit for b in tr.branches} == {0}
        assert sum(b.probability for b in tr.branches) == pytest.approx(1.0)
        assert any(s.action == "post_select_discard" for s in tr.steps)
        np.testing.assert_allclose(tr.final_state.data, run(replace(cfg, discard_d_branch=False)).final_state.data,
                                   atol=1e-12)

    def test_degenerate_poles(self):
        for theta in (0.0, np.pi / 2):
            tr = run(RunConfig(theta, 0.0, 1.0))
            for b in tr.branches:
                assert equal_up_to_phase(b.state, ket(theta, 0.0))


class TestSampling:
    def test_requires_seed(self):
        with pytest.raises(ValueError):
            RunConfig(mode="sample")

    def test_seed_range(self):
        with pytest.raises(ValueError):
            RunConfig(mode="sample", seed=2**64)

    def test_single_branch(self):
        tr = run(RunConfig(0.3, 0.1, 1.0, mode="sample", seed=5))
        assert len(tr.branches) == 1
        assert len(tr.messages) == 2
        assert equal_up_to_phase(tr.branches[0].state, ideal_output(0.3, 0.1, 1.0))

    def test_seed_determines_transcript(self):
        cfg = RunConfig(0.3, 0.1, 1.0, EXPERIMENT, mode="sample", seed=123456789)
        assert run(cfg).to_json() == run(cfg).to_json()

    def test_fast_path_matches_run(self):
        cfg = RunConfig(0.4, 0.2, 2.0, EXPERIMENT, seed=99)
        outcomes = sample_outcomes(cfg, 200)
        for i in range(200):
            tr = run(replace(cfg, mode="sample", seed=run_seed(cfg.seed, i)))
            b = tr.branches[0]
            assert (b.encode_bit, b.decode_bit) == tuple(outcomes[i])

    def test_branch_frequencies(self):
        n = 100_000
        outcomes = sample_outcomes(RunConfig(0.4, 0.2, 2.0, EXPERIMENT, seed=2024), n)
        counts = np.bincount(2 * outcomes[:, 0] + outcomes[:, 1], minlength=4)
        sigma = np.sqrt(n * 0.25 * 0.75)
        assert np.all(np.abs(counts - n / 4) < 4 * sigma)


class TestTranscript:
    def test_accounting(self, rng):
        for cfg in (
            RunConfig(0.3, 0.2, 1.0),
            RunConfig(0.3, 0.2, 1.0, EXPERIMENT),
            RunConfig(0.3, 0.2, 1.0, EXPERIMENT, mode="sample", seed=3),
        ):
            assert resource_accounting(run(cfg)) == (1, 1, 1)

    def test_missing_decode_message(self):
        tr = run(RunConfig(0.3, 0.2, 1.0))
        tr.messages = [m for m in tr.messages if m.purpose != "decoding_outcome" or m.branch != (0, 1)]
        with pytest.raises(TranscriptError):
            resource_accounting(tr)

    def test_wrong_direction(self):
        tr = run(RunConfig(0.3, 0.2, 1.0, mode="sample", seed=1))
        enc = tr.messages[0]
        tr.messages[0] = ClassicalMessage("Alice", "Bob", enc.bit, enc.purpose, enc.branch)
        with pytest.raises(TranscriptError):
            resource_accounting(tr)

    def test_json_layout(self):
        tr = run(RunConfig(0.3, 0.2, 1.0, EXPERIMENT))
        doc = json.loads(tr.to_json())
        assert set(doc) == {"config", "steps", "messages", "branches", "final_state"}
        np.testing.assert_allclose(complex_from_json(doc["final_state"]), tr.final_state.data)
        assert doc["messages"][0] == {"from": "Bob", "to": "Alice", "bit": 0, "purpose": "encoding_outcome",
                                      "branch": [0]}
        assert all("density" in b for b in doc["branches"])

    def test_pure_branches_store_amplitudes(self):
        doc = json.loads(run(RunConfig(0.3, 0.2, 1.0)).to_json())
        assert all("amplitudes" in b for b in doc["branches"])


def test_probe_outputs_match_polarizations():
    for label, (theta, phi) in PROBE_ANGLES.items():
        v = POLARIZATIONS[label]
        np.testing.assert_allclose(ket(theta, phi).amplitudes, v, atol=1e-15)
    outs = probe_outputs(RunConfig(varphi=0.5, noise=EXPERIMENT))
    for label, rho in outs.items():
        v = POLARIZATIONS[label]
        expect = apply(dephased_rotation(0.5, EXPERIMENT), np.outer(v, v.conj()))
        np.testing.assert_allclose(rho, expect, atol=1e-12)
