"""Shared builders for randomized test systems."""

import numpy as np
import pytest

import risjcas as rj

WAVELENGTH = 0.1  # 3 GHz nominal


def random_channels(rng, nt=4, nr=4, m=4):
    def cplx(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    return rj.ChannelSet(
        h_br=cplx(m, nt), h_rb=cplx(nr, m), h_ru=cplx(m), h_bu=cplx(nt),
        h_si=cplx(nr, nt),
    )


def random_psd(rng, n, trace=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    r = a @ a.conj().T
    return r * (trace / np.real(np.trace(r)))


def random_upsilon(rng, m):
    return np.exp(1j * rng.uniform(-np.pi, np.pi, m))


def mono_scene(noise_sensing=0.01, noise_comm=0.05):
    return rj.SensingScene(
        mode="monostatic", gamma_bs=0.3 + 0.2j, gamma_ris=0.5 - 0.1j,
        noise_var_sensing=noise_sensing, noise_var_comm=noise_comm,
        angle_bs=0.3, angle_ris=-0.2, azimuth=0.4,
    )


def bi_scene(noise_sensing=0.01, noise_comm=0.05):
    return rj.SensingScene(
        mode="bistatic", gamma_bs=0.4 - 0.3j, gamma_ris=0.2 + 0.6j,
        noise_var_sensing=noise_sensing, noise_var_comm=noise_comm,
        angle_tx=2 * np.pi / 3, angle_rx=0.5, angle_ris=0.25,
        angle_rx_ris=-0.3, azimuth=0.15,
    )


@pytest.fixture(scope="session")
def bs_specs():
    tx = rj.UlaSpec(4, WAVELENGTH / 2, WAVELENGTH)
    rx = rj.UlaSpec(4, WAVELENGTH / 2, WAVELENGTH)
    return tx, rx


@pytest.fixture(scope="session")
def small_ris():
    return rj.UpaSpec(2, WAVELENGTH / 4, WAVELENGTH)


@pytest.fixture(scope="session")
def small_scattering(small_ris):
    return rj.scattering_from_coupling(rj.build_coupling_matrix(small_ris))
