import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remote_rotation import optics
from remote_rotation.optics import (
    POLARIZATIONS,
    WaveplateSetting,
    com_plate_settings,
    hwp,
    pbs_cnot,
    prepare_resource,
    prepare_target,
    product_with_target,
    qwp,
    rz,
    target_plates,
    u_com_from_plates,
    waveplate,
)
from remote_rotation.qmath import SX, SZ, bloch_vector, equal_up_to_phase, is_unitary, ket, partial_trace

angles = st.floats(-4 * np.pi, 4 * np.pi, allow_nan=False)


class TestRz:
    def test_zero_is_identity(self):
        np.testing.assert_allclose(rz(0.0), np.eye(2))

    def test_pi_is_sigma_z(self):
        np.testing.assert_allclose(rz(np.pi), 1j * SZ, atol=1e-15)
        assert equal_up_to_phase(rz(np.pi), SZ)

    def test_rotates_azimuth(self):
        # exp(i varphi Z / 2) multiplies beta/alpha by exp(-i varphi)
        theta, phi, varphi = 0.4, 0.3, 2 * np.pi / 3
        out = rz(varphi) @ ket(theta, phi).amplitudes
        assert equal_up_to_phase(out, ket(theta, phi - varphi).amplitudes)
        b = bloch_vector(np.outer(out, out.conj()))
        assert b.azimuth == pytest.approx(phi - varphi, abs=1e-12)

    @given(a=angles, b=angles)
    @settings(max_examples=100, deadline=None)
    def test_group_law(self, a, b):
        np.testing.assert_allclose(rz(a) @ rz(b), rz(a + b), atol=1e-9)

    def test_commutes_with_sigma_z(self, rng):
        for varphi in rng.uniform(0, 2 * np.pi, 20):
            np.testing.assert_array_equal(SZ @ rz(varphi) @ SZ, rz(varphi))


class TestWaveplates:
    def test_hwp_45_is_sigma_x(self):
        assert equal_up_to_phase(hwp(np.pi / 4), SX)

    def test_hwp_0_is_sigma_z(self):
        assert equal_up_to_phase(hwp(0.0), SZ)

    def test_qwp_0(self):
        assert equal_up_to_phase(qwp(0.0), np.diag([1, 1j]))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            WaveplateSetting("full", 0.0)

    def test_random_settings_unitary(self, rng):
        for kind in ("half", "quarter"):
            for t in rng.uniform(-np.pi, np.pi, 500):
                assert is_unitary(waveplate(WaveplateSetting(kind, t)))


class TestComPlates:
    def test_identity(self):
        assert equal_up_to_phase(u_com_from_plates(0.0), np.eye(2))

    def test_experiment_angle(self):
        assert equal_up_to_phase(u_com_from_plates(2 * np.pi / 3), rz(2 * np.pi / 3))

    def test_pi_is_sigma_z(self):
        assert equal_up_to_phase(u_com_from_plates(np.pi), SZ)

    def test_uniform_sample(self, rng):
        for varphi in rng.uniform(0, 2 * np.pi, 100):
            u = u_com_from_plates(varphi)
            assert is_unitary(u)
            assert equal_up_to_phase(u, rz(varphi))

    def test_quarter_plates_at_45(self):
        first, middle, last = com_plate_settings(1.0)
        assert first.kind == last.kind == "quarter"
        assert first.axis_angle == last.axis_angle == pytest.approx(np.pi / 4)
        assert middle.kind == "half"

    def test_half_angle_setting_agrees_only_at_120_degrees(self):
        # A HWP at varphi/2 - 45deg between the quarter plates gives the
        # right rotation at 120deg (where -varphi == 2 varphi mod 2pi) only.
        def stack(h):
            return qwp(np.pi / 4) @ hwp(h) @ qwp(np.pi / 4)

        vp = 2 * np.pi / 3
        assert equal_up_to_phase(stack(vp / 2 - np.pi / 4), rz(vp))
        assert not equal_up_to_phase(stack(1.0 / 2 - np.pi / 4), rz(1.0))


class TestPbs:
    def basis(self, pol, path):
        v = np.zeros(4, dtype=complex)
        v[2 * pol + path] = 1
        return v

    def test_control_zero_passthrough(self):
        np.testing.assert_array_equal(pbs_cnot() @ self.basis(0, 0), self.basis(0, 0))
        np.testing.assert_array_equal(pbs_cnot() @ self.basis(0, 1), self.basis(0, 1))

    def test_v_flips_path(self):
        np.testing.assert_array_equal(pbs_cnot() @ self.basis(1, 0), self.basis(1, 1))
        np.testing.assert_array_equal(pbs_cnot() @ self.basis(1, 1), self.basis(1, 0))

    def test_linearity(self):
        a, b = 0.6, 0.8j
        out = pbs_cnot() @ (a * self.basis(0, 0) + b * self.basis(1, 0))
        np.testing.assert_allclose(out, a * self.basis(0, 0) + b * self.basis(1, 1))

    def test_involution(self):
        np.testing.assert_array_equal(pbs_cnot() @ pbs_cnot(), np.eye(4))
        assert is_unitary(pbs_cnot())

    def test_same_label(self):
        with pytest.raises(ValueError):
            pbs_cnot("3", "3")


class TestResource:
    def test_amplitudes(self):
        psi = prepare_resource()
        assert psi.labels == ("1", "2", "3")
        expect = np.zeros(8)
        expect[0b000] = expect[0b110] = 1 / np.sqrt(2)  # |H,u,H> and |V,d,H>
        np.testing.assert_allclose(psi.amplitudes, expect, atol=1e-15)

    def test_qubit_one_maximally_mixed(self):
        rho = partial_trace(prepare_resource().dm(), {"1"})
        np.testing.assert_allclose(rho.data, np.eye(2) / 2, atol=1e-15)

    def test_qubit_three_horizontal(self):
        rho = partial_trace(prepare_resource().dm(), {"3"})
        np.testing.assert_allclose(rho.data, np.diag([1, 0]), atol=1e-15)


class TestTarget:
    @pytest.mark.parametrize(
        "theta, phi, label",
        [(0, 0, "H"), (np.pi / 4, 0, "D"), (np.pi / 4, -np.pi / 2, "R")],
    )
    def test_named_states(self, theta, phi, label):
        psi = prepare_target(prepare_resource(), theta, phi)
        rho3 = partial_trace(psi.dm(), {"3"})
        v = POLARIZATIONS[label]
        np.testing.assert_allclose(rho3.data, np.outer(v, v.conj()), atol=1e-12)

    def test_global_state(self, rng):
        for _ in range(20):
            theta, phi = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)
            psi = prepare_target(prepare_resource(), theta, phi)
            np.testing.assert_allclose(psi.amplitudes, product_with_target(theta, phi).amplitudes, atol=1e-12)

    def test_plates_reach_target(self, rng):
        for _ in range(200):
            theta, phi = rng.uniform(0, np.pi / 2), rng.uniform(-np.pi, np.pi)
            h, q = target_plates(theta, phi)
            out = waveplate(q) @ waveplate(h) @ np.array([1, 0])
            assert equal_up_to_phase(out, ket(theta, phi).amplitudes)

    def test_requires_qubit_three(self):
        with pytest.raises(ValueError):
            prepare_target(optics.bell_phi_plus(), 0.1, 0.2)
