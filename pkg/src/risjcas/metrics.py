"""Sensing and communication metrics and their analytic gradients.

Fisher information (FI) is evaluated on the diagonal of the information
matrix of the radar estimation vector; its trace is the sensing metric.
Mutual information (MI) is the log2(1 + SNR) rate of the single user.
Complex reflection/path coefficients enter the estimation vector as
(gamma, gamma*) pairs, which halves their information relative to a real
parameter; the closed forms below follow that convention and the tests
check them against a finite-difference score oracle.

Gradient convention: every gradient with respect to the phase-shift
matrix is scaled so its diagonal equals d f/d Re(upsilon_m)
+ j * d f/d Im(upsilon_m), i.e. exactly what a central finite difference
of the scalar objective reconstructs. All inverse factors are applied
through linear solves of the reflection operator, never explicit
inverses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .channels import ChannelSet, total_comm_channel
from .coupling import (
    CONVENTIONAL,
    PHYSICALLY_CONSISTENT,
    EffectiveReflection,
    PhaseShiftVector,
    ScatteringMatrix,
    as_upsilon_array,
    effective_reflection,
)
from .errors import ShapeError
from .geometry import (
    UlaSpec,
    UpaSpec,
    ula_steering,
    ula_steering_derivative,
    upa_steering,
    upa_steering_derivative,
)

MONOSTATIC = "monostatic"
BISTATIC = "bistatic"

# Residual imaginary part of a trace above this relative size indicates a
# broken input; below it the imaginary part is discarded as roundoff.
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class TransmitCovariance:
    """Hermitian PSD transmit covariance with an optional trace budget."""

    r: np.ndarray
    power_budget: Optional[float] = None

    def __post_init__(self):
        r = np.asarray(self.r, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ShapeError(f"covariance must be square, got {r.shape}")
        scale = max(1.0, float(np.linalg.norm(r)))
        if np.max(np.abs(r - r.conj().T)) > 1e-10 * scale:
            raise ShapeError("covariance is not Hermitian")
        min_eig = float(np.linalg.eigvalsh(r)[0]) if r.size else 0.0
        if min_eig < -1e-10 * scale:
            raise ShapeError(f"covariance is not PSD: min eigenvalue {min_eig:.3e}")
        if self.power_budget is not None:
            tr = float(np.real(np.trace(r)))
            if tr > self.power_budget + 1e-9:
                raise ShapeError(
                    f"trace {tr:.12f} exceeds power budget {self.power_budget:.12f}"
                )
        object.__setattr__(self, "r", r)

    @property
    def n_tx(self) -> int:
        return self.r.shape[0]


@dataclass(frozen=True)
class SensingScene:
    """Target geometry, reflection coefficients, and noise levels.

    Monostatic scenes use (angle_bs, angle_ris, azimuth); bistatic scenes
    use (angle_tx, angle_rx, angle_ris, angle_rx_ris, azimuth), all in
    radians. gamma_bs / gamma_ris are the complex reflection coefficients
    of the direct and RIS sensing paths. Noise variances are linear power.
    """

    mode: str
    gamma_bs: complex
    gamma_ris: complex
    noise_var_sensing: float
    noise_var_comm: float
    angle_bs: float = 0.0
    angle_ris: float = 0.0
    azimuth: float = 0.0
    angle_tx: float = 0.0
    angle_rx: float = 0.0
    angle_rx_ris: float = 0.0

    def __post_init__(self):
        if self.mode not in (MONOSTATIC, BISTATIC):
            raise ShapeError(f"unknown sensing mode: {self.mode!r}")
        if not (self.noise_var_sensing > 0 and self.noise_var_comm > 0):
            raise ShapeError("noise variances must be positive")


@dataclass(frozen=True)
class SensingMatrices:
    """Rank-1 sensing response matrices and their angle partials.

    bs_path is the direct BS-target-BS response (Nr, Nt); ris_path is the
    RIS-side response: (M, M) for monostatic, (Nr, M) for bistatic.
    The derivative tuples hold one matrix per estimated angle of that
    path (one for monostatic, two for bistatic).
    """

    mode: str
    bs_path: np.ndarray
    bs_path_derivs: Tuple[np.ndarray, ...]
    ris_path: np.ndarray
    ris_path_derivs: Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class FiSummary:
    """Diagonal of the Fisher information matrix; trace is its sum."""

    diag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        object.__setattr__(self, "diag", d)

    @property
    def trace(self) -> float:
        return float(np.sum(self.diag))


def _as_theta(theta: Union[EffectiveReflection, np.ndarray]) -> np.ndarray:
    return np.asarray(getattr(theta, "theta", theta), dtype=complex)


def _as_cov(r: Union[TransmitCovariance, np.ndarray]) -> np.ndarray:
    return np.asarray(getattr(r, "r", r), dtype=complex)


def _real_trace(value: complex, context: str) -> float:
    if abs(value) > 0 and abs(value.imag) > IMAG_TOL * abs(value):
        raise ShapeError(f"{context}: trace has non-negligible imaginary part {value.imag:.3e}")
    return float(value.real)


def _sandwich_trace(x: np.ndarray, rmat: np.ndarray, context: str) -> float:
    """Tr(X R X^H) summed over the (nonnegative) per-row quadratic forms.

    The imaginary residue is judged against the product scale
    ||X||_F^2 ||R||_F rather than the (possibly cancelled-to-tiny) result,
    which is the level float64 rounding actually reaches.
    """
    rows = np.einsum("ij,jk,ik->i", x, rmat, x.conj())
    scale = float(np.linalg.norm(x) ** 2 * np.linalg.norm(rmat))
    imag = float(np.sum(rows.imag))
    if scale > 0 and abs(imag) > IMAG_TOL * scale:
        raise ShapeError(f"{context}: trace has non-negligible imaginary part {imag:.3e}")
    return float(np.sum(rows.real))


def build_sensing_matrices(
    scene: SensingScene,
    tx_spec: UlaSpec,
    rx_spec: UlaSpec,
    ris_spec: UpaSpec,
) -> SensingMatrices:
    """Assemble the response matrices and angle partials for a scene."""
    if scene.mode == MONOSTATIC:
        a = ula_steering(tx_spec, scene.angle_bs).entries
        a_dot = ula_steering_derivative(tx_spec, scene.angle_bs).entries
        b = ula_steering(rx_spec, scene.angle_bs).entries
        b_dot = ula_steering_derivative(rx_spec, scene.angle_bs).entries
        a1 = np.outer(b, a)
        a1_dot = np.outer(b, a_dot) + np.outer(b_dot, a)
        bb = upa_steering(ris_spec, scene.angle_ris, scene.azimuth).entries
        bb_dot = upa_steering_derivative(ris_spec, scene.angle_ris, scene.azimuth).entries
        a2 = np.outer(bb, bb)
        a2_dot = np.outer(bb, bb_dot) + np.outer(bb_dot, bb)
        return SensingMatrices(MONOSTATIC, a1, (a1_dot,), a2, (a2_dot,))

    a_tx = ula_steering(tx_spec, scene.angle_tx).entries
    a_tx_dot = ula_steering_derivative(tx_spec, scene.angle_tx).entries
    b_rx = ula_steering(rx_spec, scene.angle_rx).entries
    b_rx_dot = ula_steering_derivative(rx_spec, scene.angle_rx).entries
    a3 = np.outer(b_rx, a_tx)
    a3_d1 = np.outer(b_rx, a_tx_dot)
    a3_d2 = np.outer(b_rx_dot, a_tx)
    b_ris = upa_steering(ris_spec, scene.angle_ris, scene.azimuth).entries
    b_ris_dot = upa_steering_derivative(ris_spec, scene.angle_ris, scene.azimuth).entries
    b4 = ula_steering(rx_spec, scene.angle_rx_ris).entries
    b4_dot = ula_steering_derivative(rx_spec, scene.angle_rx_ris).entries
    a4 = np.outer(b4, b_ris)
    a4_d3 = np.outer(b4, b_ris_dot)
    a4_d4 = np.outer(b4_dot, b_ris)
    return SensingMatrices(BISTATIC, a3, (a3_d1, a3_d2), a4, (a4_d3, a4_d4))


def mutual_information(
    h_row: np.ndarray,
    r: Union[TransmitCovariance, np.ndarray],
    noise_var_comm: float,
) -> float:
    """MI = log2(1 + h^H R h / sigma_c^2), in bits; h_row is the row h^H."""
    if noise_var_comm <= 0:
        raise ShapeError("communication noise variance must be positive")
    h_row = np.asarray(h_row, dtype=complex)
    rmat = _as_cov(r)
    if rmat.shape != (h_row.shape[0], h_row.shape[0]):
        raise ShapeError(f"covariance {rmat.shape} does not match channel {h_row.shape}")
    snr = _real_trace(complex(h_row @ rmat @ h_row.conj()), "MI quadratic form")
    return float(np.log2(1.0 + max(snr, 0.0) / noise_var_comm))


def _ris_cascade_mono(mats: SensingMatrices, channels: ChannelSet,
                      theta_m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """H_rb Theta^T A2 Theta H_br for A2 and its derivative."""
    left = channels.h_rb @ theta_m.T
    right = theta_m @ channels.h_br
    return left @ mats.ris_path @ right, left @ mats.ris_path_derivs[0] @ right


def mono_fi_diag(
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    theta: Union[EffectiveReflection, np.ndarray],
    r: Union[TransmitCovariance, np.ndarray],
) -> FiSummary:
    """Six FI diagonal entries of the monostatic estimation vector.

    Order: (angle_bs, gamma_bs, gamma_bs*, angle_ris, gamma_ris,
    gamma_ris*). The two entries of each gamma pair are equal by
    construction, as are both members' closed forms.
    """
    if scene.mode != MONOSTATIC or mats.mode != MONOSTATIC:
        raise ShapeError("mono_fi_diag requires a monostatic scene")
    rmat = _as_cov(r)
    theta_m = _as_theta(theta)
    sig = scene.noise_var_sensing
    g1 = abs(scene.gamma_bs) ** 2
    g2 = abs(scene.gamma_ris) ** 2

    a1, a1_dot = mats.bs_path, mats.bs_path_derivs[0]
    m_a2, m_a2_dot = _ris_cascade_mono(mats, channels, theta_m)

    def sandwich(x):
        return _sandwich_trace(x, rmat, "FI term")

    f11 = 2.0 * g1 / sig * sandwich(a1_dot)
    f22 = sandwich(a1) / sig
    f44 = 2.0 * g2 / sig * sandwich(m_a2_dot)
    f55 = sandwich(m_a2) / sig
    diag = np.array([f11, f22, f22, f44, f55, f55])
    return FiSummary(np.maximum(diag, 0.0))


def bi_fi_diag(
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    theta: Union[EffectiveReflection, np.ndarray],
    r: Union[TransmitCovariance, np.ndarray],
) -> FiSummary:
    """Eight FI diagonal entries of the bistatic estimation vector.

    Order: (angle_tx, angle_rx, gamma_bs, gamma_bs*, angle_ris,
    angle_rx_ris, gamma_ris, gamma_ris*). The gamma-pair entries carry no
    reflection coefficient themselves.
    """
    if scene.mode != BISTATIC or mats.mode != BISTATIC:
        raise ShapeError("bi_fi_diag requires a bistatic scene")
    rmat = _as_cov(r)
    theta_m = _as_theta(theta)
    sig = scene.noise_var_sensing
    g_bs = abs(scene.gamma_bs) ** 2
    g_ris = abs(scene.gamma_ris) ** 2

    a3, (a3_d1, a3_d2) = mats.bs_path, mats.bs_path_derivs
    a4, (a4_d3, a4_d4) = mats.ris_path, mats.ris_path_derivs
    cascade = theta_m @ channels.h_br

    def sandwich(x):
        return _sandwich_trace(x, rmat, "FI term")

    f11 = 2.0 * g_bs / sig * sandwich(a3_d1)
    f22 = 2.0 * g_bs / sig * sandwich(a3_d2)
    f33 = sandwich(a3) / sig
    f55 = 2.0 * g_ris / sig * sandwich(a4_d3 @ cascade)
    f66 = 2.0 * g_ris / sig * sandwich(a4_d4 @ cascade)
    f77 = sandwich(a4 @ cascade) / sig
    diag = np.array([f11, f22, f33, f33, f55, f66, f77, f77])
    return FiSummary(np.maximum(diag, 0.0))


def fi_diag(scene, mats, channels, theta, r) -> FiSummary:
    """Dispatch on the scene's radar mode."""
    if scene.mode == MONOSTATIC:
        return mono_fi_diag(scene, mats, channels, theta, r)
    return bi_fi_diag(scene, mats, channels, theta, r)


def weighted_objective(alpha: float, fi: FiSummary, mi: float) -> float:
    """alpha * Tr(F) + (1 - alpha) * MI."""
    if not 0.0 <= alpha <= 1.0:
        raise ShapeError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * fi.trace + (1.0 - alpha) * mi


def fi_quadratic_form(
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    theta: Union[EffectiveReflection, np.ndarray],
) -> np.ndarray:
    """Hermitian C with Tr(F) = Re Tr(C R) for every covariance R.

    The FI trace is linear in the transmit covariance; C collects the
    sandwich matrices of every diagonal term.
    """
    theta_m = _as_theta(theta)
    sig = scene.noise_var_sensing
    if scene.mode == MONOSTATIC:
        g1 = abs(scene.gamma_bs) ** 2
        g2 = abs(scene.gamma_ris) ** 2
        a1, a1_dot = mats.bs_path, mats.bs_path_derivs[0]
        m_a2, m_a2_dot = _ris_cascade_mono(mats, channels, theta_m)
        c = (
            2.0 * g1 * a1_dot.conj().T @ a1_dot
            + 2.0 * a1.conj().T @ a1
            + 2.0 * g2 * m_a2_dot.conj().T @ m_a2_dot
            + 2.0 * m_a2.conj().T @ m_a2
        )
    else:
        g_bs = abs(scene.gamma_bs) ** 2
        g_ris = abs(scene.gamma_ris) ** 2
        a3, (a3_d1, a3_d2) = mats.bs_path, mats.bs_path_derivs
        a4, (a4_d3, a4_d4) = mats.ris_path, mats.ris_path_derivs
        cascade = theta_m @ channels.h_br
        t3 = a4_d3 @ cascade
        t4 = a4_d4 @ cascade
        t0 = a4 @ cascade
        c = (
            2.0 * g_bs * (a3_d1.conj().T @ a3_d1 + a3_d2.conj().T @ a3_d2)
            + 2.0 * a3.conj().T @ a3
            + 2.0 * g_ris * (t3.conj().T @ t3 + t4.conj().T @ t4)
            + 2.0 * t0.conj().T @ t0
        )
    return (c + c.conj().T) / (2.0 * sig)


def _theta_for(model: str, upsilon: np.ndarray,
               s: Union[ScatteringMatrix, np.ndarray, None]) -> np.ndarray:
    if model == CONVENTIONAL:
        return np.diag(upsilon)
    if s is None:
        raise ShapeError("physically consistent model needs a scattering matrix")
    return effective_reflection(upsilon, s, PHYSICALLY_CONSISTENT).theta


def grad_upsilon_fi(
    mode: str,
    model: str,
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    upsilon: Union[PhaseShiftVector, np.ndarray],
    s: Union[ScatteringMatrix, np.ndarray, None],
    r: Union[TransmitCovariance, np.ndarray],
) -> np.ndarray:
    """Gradient of Tr(F) with respect to the phase-shift matrix.

    Returns the full M x M matrix; the optimizer extracts its diagonal.
    See the module docstring for the scaling convention.
    """
    ups = as_upsilon_array(upsilon)
    rmat = _as_cov(r)
    sig = scene.noise_var_sensing
    p = channels.h_br @ rmat @ channels.h_br.conj().T
    if mode == MONOSTATIC:
        w = channels.h_rb.conj().T @ channels.h_rb
        parts = (
            (4.0 * abs(scene.gamma_ris) ** 2 / sig, mats.ris_path_derivs[0]),
            (4.0 / sig, mats.ris_path),
        )
        if model == CONVENTIONAL:
            return _grad_fi_mono_conv(ups, w, p, parts)
        theta_m = _theta_for(model, ups, s)
        return _grad_fi_mono_pc(ups, theta_m, w, p, parts)
    parts = (
        (4.0 * abs(scene.gamma_ris) ** 2 / sig, mats.ris_path_derivs[0]),
        (4.0 * abs(scene.gamma_ris) ** 2 / sig, mats.ris_path_derivs[1]),
        (4.0 / sig, mats.ris_path),
    )
    if model == CONVENTIONAL:
        ups_col = ups[:, None]
        g = np.zeros((ups.size, ups.size), dtype=complex)
        for coeff, a in parts:
            g += coeff * (a.conj().T @ a) @ (ups_col * p)
        return g
    theta_m = _theta_for(model, ups, s)
    th_h = theta_m.conj().T
    uinv_c = (1.0 / ups).conj()
    core = theta_m @ p @ th_h
    g = np.zeros((ups.size, ups.size), dtype=complex)
    for coeff, a in parts:
        x = th_h @ (a.conj().T @ a) @ core
        g += coeff * (uinv_c[:, None] * x * uinv_c[None, :])
    return g


def _grad_fi_mono_conv(ups, w, p, parts) -> np.ndarray:
    ups_col, ups_row = ups[:, None], ups[None, :]
    upsc_col, upsc_row = ups.conj()[:, None], ups.conj()[None, :]
    g = np.zeros((ups.size, ups.size), dtype=complex)
    for coeff, a in parts:
        # 'Ups A Ups P' and friends via row/column scaling of the diagonal factors
        k = (ups_col * a * ups_row) @ p
        x1 = a.conj().T @ (upsc_col * w * ups_row) @ (a * ups_row) @ p
        x2 = w @ k @ (upsc_col * a.conj().T)
        g += coeff * (x1 + x2)
    return g


def _grad_fi_mono_pc(ups, theta_m, w, p, parts) -> np.ndarray:
    th_t = theta_m.T
    th_h = theta_m.conj().T
    th_c = theta_m.conj()
    uinv_c = (1.0 / ups).conj()
    g = np.zeros((ups.size, ups.size), dtype=complex)
    for coeff, a in parts:
        k = th_t @ a @ theta_m @ p            # Theta^T A Theta P
        ah = a.conj().T
        x1 = th_h @ ah @ th_c @ w @ k @ th_h
        x2 = th_c @ w @ k @ th_h @ ah @ th_c
        g += coeff * (uinv_c[:, None] * (x1 + x2) * uinv_c[None, :])
    return g


def grad_upsilon_mi(
    model: str,
    channels: ChannelSet,
    upsilon: Union[PhaseShiftVector, np.ndarray],
    s: Union[ScatteringMatrix, np.ndarray, None],
    r: Union[TransmitCovariance, np.ndarray],
    noise_var_comm: float,
) -> np.ndarray:
    """Gradient of MI with respect to the phase-shift matrix (M x M)."""
    ups = as_upsilon_array(upsilon)
    rmat = _as_cov(r)
    theta_m = _theta_for(model, ups, s)
    h_row = total_comm_channel(channels.h_ru, theta_m, channels.h_br, channels.h_bu)
    snr = float(np.real(h_row @ rmat @ h_row.conj())) / noise_var_comm
    denom = noise_var_comm * np.log(2.0) * (1.0 + snr)
    back = h_row @ rmat @ channels.h_br.conj().T  # row h^H R H_br^H
    if model == CONVENTIONAL:
        u = channels.h_ru
        v = back
    else:
        th_h = theta_m.conj().T
        uinv_c = (1.0 / ups).conj()
        u = uinv_c * (th_h @ channels.h_ru)
        v = (back @ th_h) * uinv_c
    return (2.0 / denom) * np.outer(u, v)


def grad_rx_objective(
    alpha: float,
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    theta: Union[EffectiveReflection, np.ndarray],
    r: Union[TransmitCovariance, np.ndarray],
) -> np.ndarray:
    """Hermitian gradient of the weighted objective with respect to R.

    The FI part is constant in R (alpha-scaled sandwich sum); the MI part
    is the rank-1 matrix (1-alpha)/ln2 * h h^H / (sigma_c^2 + h^H R h).
    The directional derivative along a Hermitian H is Tr(G H).
    """
    rmat = _as_cov(r)
    theta_m = _as_theta(theta)
    c = alpha * fi_quadratic_form(scene, mats, channels, theta_m)
    h_row = total_comm_channel(channels.h_ru, theta_m, channels.h_br, channels.h_bu)
    quad = float(np.real(h_row @ rmat @ h_row.conj()))
    coeff = (1.0 - alpha) / (np.log(2.0) * (scene.noise_var_comm + quad))
    return c + coeff * np.outer(h_row.conj(), h_row)
