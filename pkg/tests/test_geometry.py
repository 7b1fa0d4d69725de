"""Steering vectors: closed-form values and finite-difference derivatives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import risjcas as rj
from risjcas.errors import DomainError

LAM = 0.1


def fd_vector(f, theta, h=1e-6):
    return (np.asarray(f(theta + h), dtype=complex)
            - np.asarray(f(theta - h), dtype=complex)) / (2 * h)


class TestUlaSteering:
    def test_broadside_all_ones(self):
        spec = rj.UlaSpec(4, LAM / 2, LAM)
        np.testing.assert_allclose(rj.ula_steering(spec, 0.0).entries, np.ones(4))

    def test_two_element_endfire(self):
        # half-wavelength pair at theta=pi/2: phases are -pi/2 and +pi/2
        spec = rj.UlaSpec(2, LAM / 2, LAM)
        got = rj.ula_steering(spec, np.pi / 2).entries
        want = np.array([np.exp(-1j * np.pi / 2), np.exp(1j * np.pi / 2)])
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_four_element_thirty_degrees(self):
        # frozen from a scalar-loop evaluation of the phase formula
        spec = rj.UlaSpec(4, LAM / 2, LAM)
        got = rj.ula_steering(spec, np.pi / 6).entries
        want = np.array([
            -0.707106781186547 - 0.707106781186548j,
            +0.707106781186548 - 0.707106781186547j,
            +0.707106781186548 + 0.707106781186547j,
            -0.707106781186547 + 0.707106781186548j,
        ])
        np.testing.assert_allclose(got, want, atol=1e-12)

    @given(theta=st.floats(-1.4, 1.4), n=st.integers(1, 16))
    @settings(max_examples=60, deadline=None)
    def test_unit_magnitude(self, theta, n):
        spec = rj.UlaSpec(n, LAM / 2, LAM)
        np.testing.assert_allclose(np.abs(rj.ula_steering(spec, theta).entries),
                                   1.0, atol=1e-12)

    def test_derivative_zero_at_endfire(self):
        spec = rj.UlaSpec(4, LAM / 2, LAM)
        got = rj.ula_steering_derivative(spec, np.pi / 2).entries
        np.testing.assert_allclose(got, 0.0, atol=1e-12)

    def test_single_element_derivative_is_zero(self):
        spec = rj.UlaSpec(1, LAM / 2, LAM)
        np.testing.assert_allclose(
            rj.ula_steering_derivative(spec, 0.7).entries, [0.0])

    @pytest.mark.parametrize("theta", [0.3, -0.9, 1.2])
    def test_derivative_matches_finite_difference(self, theta):
        spec = rj.UlaSpec(4, LAM / 2, LAM)
        analytic = rj.ula_steering_derivative(spec, theta).entries
        fd = fd_vector(lambda t: rj.ula_steering(spec, t).entries, theta)
        np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-9)


class TestUpaSteering:
    def test_boresight_all_ones(self):
        spec = rj.UpaSpec(3, LAM / 2, LAM)
        got = rj.upa_steering(spec, 0.0, 1.234).entries
        np.testing.assert_allclose(got, np.ones(9), atol=1e-12)

    def test_magnitude_is_sqrt_cos(self):
        spec = rj.UpaSpec(2, LAM / 2, LAM)
        got = rj.upa_steering(spec, np.pi / 3, 0.0).entries
        np.testing.assert_allclose(np.abs(got), np.sqrt(0.5), atol=1e-12)

    def test_matches_elementwise_evaluation(self):
        # direct double-loop over the (row, col) lattice
        spec = rj.UpaSpec(2, LAM / 2, LAM)
        theta, psi = np.pi / 5, np.pi / 7
        c = 2 * np.pi * spec.spacing / spec.wavelength
        want = np.empty(4, dtype=complex)
        for a in range(2):
            for b in range(2):
                phase = c * np.sin(theta) * (a * np.sin(psi) + b * np.cos(psi))
                want[a * 2 + b] = np.sqrt(abs(np.cos(theta))) * np.exp(1j * phase)
        got = rj.upa_steering(spec, theta, psi).entries
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_kronecker_structure(self):
        spec = rj.UpaSpec(3, LAM / 4, LAM)
        theta, psi = 0.6, -0.8
        c = 2 * np.pi * spec.spacing / spec.wavelength
        n = np.arange(3)
        left = np.exp(1j * c * n * np.sin(theta) * np.sin(psi))
        right = np.exp(1j * c * n * np.sin(theta) * np.cos(psi))
        want = np.sqrt(abs(np.cos(theta))) * np.kron(left, right)
        np.testing.assert_allclose(rj.upa_steering(spec, theta, psi).entries, want,
                                   atol=1e-12)

    @pytest.mark.parametrize("theta,psi", [(0.4, 0.9), (-0.7, 2.0), (1.1, -1.3)])
    def test_derivative_matches_finite_difference(self, theta, psi):
        spec = rj.UpaSpec(2, LAM / 2, LAM)
        analytic = rj.upa_steering_derivative(spec, theta, psi).entries
        fd = fd_vector(lambda t: rj.upa_steering(spec, t, psi).entries, theta)
        rel = np.max(np.abs(analytic - fd)) / np.max(np.abs(fd))
        assert rel <= 1e-6

    def test_derivative_at_boresight_has_no_amplitude_term(self):
        spec = rj.UpaSpec(3, LAM / 2, LAM)
        psi = 0.77
        got = rj.upa_steering_derivative(spec, 0.0, psi).entries
        c = 2 * np.pi * spec.spacing / spec.wavelength
        n = np.arange(3)
        ones = np.ones(3)
        dleft = 1j * c * n * np.sin(psi)
        dright = 1j * c * n * np.cos(psi)
        want = np.kron(dleft, ones) + np.kron(ones, dright)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_single_element_derivative(self):
        spec = rj.UpaSpec(1, LAM / 2, LAM)
        theta = 0.9
        got = rj.upa_steering_derivative(spec, theta, 0.3).entries
        want = -np.sin(theta) * np.cos(theta) / (2 * abs(np.cos(theta)) ** 1.5)
        np.testing.assert_allclose(got, [want], atol=1e-12)

    def test_endfire_rejected(self):
        spec = rj.UpaSpec(2, LAM / 2, LAM)
        with pytest.raises(DomainError):
            rj.upa_steering_derivative(spec, np.pi / 2, 0.0)


class TestSpecValidation:
    def test_bad_ula(self):
        with pytest.raises(DomainError):
            rj.UlaSpec(0, LAM / 2, LAM)
        with pytest.raises(DomainError):
            rj.UlaSpec(4, -1.0, LAM)

    def test_bad_upa(self):
        with pytest.raises(DomainError):
            rj.UpaSpec(2, LAM / 2, 0.0)

    def test_upa_element_count(self):
        assert rj.UpaSpec(5, LAM / 2, LAM).n_elements == 25
