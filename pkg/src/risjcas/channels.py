"""Parametric propagation channels, the direct/cascaded communication links,
and the free-space self-interference matrix.

All generation is a pure function of (spec, seed): identical seeds give
bit-identical channels, which the experiment runner relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import GeometryError, ShapeError
from .geometry import UlaSpec, UpaSpec, ula_steering, upa_steering

SteeringFn = Callable[[float, float], np.ndarray]


@dataclass(frozen=True)
class MultipathSpec:
    """Parameters of one parametric multipath link.

    pathloss_ref_db is the path loss at 1 m reference distance (C0); the
    linear gain of the link is 10**(C0/10) * distance**(-exponent).
    """

    distance: float
    n_paths: int = 15
    pathloss_ref_db: float = -20.0
    pathloss_exponent: float = 2.2
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_paths < 1:
            raise ShapeError(f"need at least one path, got {self.n_paths}")
        if not (self.distance > 0):
            raise ShapeError(f"distance must be positive, got {self.distance}")

    @property
    def pathloss_linear(self) -> float:
        return 10.0 ** (self.pathloss_ref_db / 10.0) * self.distance ** (-self.pathloss_exponent)


@dataclass(frozen=True)
class GeometryLayout:
    """Explicit 3-D element positions (meters) for geometric channel terms."""

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    ris_position: Optional[np.ndarray] = None
    user_position: Optional[np.ndarray] = None
    target_position: Optional[np.ndarray] = None

    def __post_init__(self):
        tx = np.atleast_2d(np.asarray(self.tx_positions, dtype=float))
        rx = np.atleast_2d(np.asarray(self.rx_positions, dtype=float))
        if tx.shape[1] != 3 or rx.shape[1] != 3:
            raise ShapeError("element positions must be (n, 3) arrays")
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)

    def tx_rx_distances(self) -> np.ndarray:
        """Pairwise distances d(p, q), shape (n_rx, n_tx)."""
        diff = self.rx_positions[:, None, :] - self.tx_positions[None, :, :]
        return np.linalg.norm(diff, axis=2)


def colocated_bs_layout(nt: int, nr: int, spacing: float,
                        row_offset: Optional[float] = None) -> GeometryLayout:
    """Co-located transmit/receive ULAs: two parallel rows one offset apart."""
    if row_offset is None:
        row_offset = spacing
    tx = np.zeros((nt, 3))
    tx[:, 0] = (np.arange(nt) - (nt - 1) / 2.0) * spacing
    rx = np.zeros((nr, 3))
    rx[:, 0] = (np.arange(nr) - (nr - 1) / 2.0) * spacing
    rx[:, 1] = row_offset
    return GeometryLayout(tx, rx)


def ula_steering_fn(spec: UlaSpec) -> SteeringFn:
    """Adapt a ULA to the (theta, psi) steering interface; psi is ignored."""
    return lambda theta, psi: ula_steering(spec, theta).entries


def upa_steering_fn(spec: UpaSpec) -> SteeringFn:
    return lambda theta, psi: upa_steering(spec, theta, psi).entries


def scalar_steering_fn() -> SteeringFn:
    """Single-antenna endpoint (a user terminal)."""
    return lambda theta, psi: np.ones(1, dtype=complex)


def generate_multipath_channel(
    tx_size: int,
    rx_size: int,
    tx_steering_fn: SteeringFn,
    rx_steering_fn: SteeringFn,
    spec: MultipathSpec,
) -> np.ndarray:
    """Sum-of-paths channel sqrt(rho/L) * sum_l beta_l * rx_l * tx_l^T.

    Path gains are standard complex Gaussian; elevation angles are uniform
    on (-pi/2, pi/2) and azimuths uniform on (-pi, pi), except the first
    path which is boresight so the single-path limit stays a deterministic
    rank-1 link. Deterministic given spec.rng_seed.
    """
    if tx_size < 1 or rx_size < 1:
        raise ShapeError("array sizes must be >= 1")
    rng = np.random.default_rng(spec.rng_seed)
    l_paths = spec.n_paths
    scale = np.sqrt(spec.pathloss_linear / l_paths)
    h = np.zeros((rx_size, tx_size), dtype=complex)
    for l in range(l_paths):
        if l == 0:
            tx_theta = tx_psi = rx_theta = rx_psi = 0.0
        else:
            tx_theta = rng.uniform(-np.pi / 2, np.pi / 2)
            tx_psi = rng.uniform(-np.pi, np.pi)
            rx_theta = rng.uniform(-np.pi / 2, np.pi / 2)
            rx_psi = rng.uniform(-np.pi, np.pi)
        beta = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
        tx_vec = np.asarray(tx_steering_fn(tx_theta, tx_psi))
        rx_vec = np.asarray(rx_steering_fn(rx_theta, rx_psi))
        if tx_vec.shape != (tx_size,) or rx_vec.shape != (rx_size,):
            raise ShapeError(
                f"steering sizes {rx_vec.shape}x{tx_vec.shape} do not match "
                f"({rx_size}, {tx_size})"
            )
        h += beta * np.outer(rx_vec, tx_vec)
    return scale * h


def self_interference_channel(layout: GeometryLayout, wavelength: float) -> np.ndarray:
    """Free-space transmit-to-receive leakage.

    Entry (p, q) is (lambda / (4*pi*d(p,q)))**2 * exp(-j*k*d(p,q)) with
    k = 2*pi/lambda. Raises GeometryError on coincident elements.
    """
    d = layout.tx_rx_distances()
    if np.any(d <= 0.0):
        raise GeometryError("transmit and receive elements coincide")
    amp = (wavelength / (4.0 * np.pi * d)) ** 2
    return amp * np.exp(-1j * 2.0 * np.pi / wavelength * d)


def total_comm_channel(
    h_ru: np.ndarray,
    theta: Union[np.ndarray, "object"],
    h_br: np.ndarray,
    h_bu: np.ndarray,
) -> np.ndarray:
    """Composed downlink row vector h^H = h_ru^H Theta H_br + h_bu^H."""
    theta_m = np.asarray(getattr(theta, "theta", theta), dtype=complex)
    h_ru = np.asarray(h_ru, dtype=complex)
    h_bu = np.asarray(h_bu, dtype=complex)
    h_br = np.asarray(h_br, dtype=complex)
    m = h_ru.shape[0]
    if theta_m.shape != (m, m):
        raise ShapeError(f"Theta shape {theta_m.shape} does not match M={m}")
    if h_br.ndim != 2 or h_br.shape[0] != m:
        raise ShapeError(f"H_br shape {h_br.shape} does not match M={m}")
    if h_bu.shape != (h_br.shape[1],):
        raise ShapeError(f"h_bu shape {h_bu.shape} does not match Nt={h_br.shape[1]}")
    return h_ru.conj() @ theta_m @ h_br + h_bu.conj()


@dataclass(frozen=True)
class ChannelSet:
    """All propagation terms of one system draw.

    Shapes: h_br (M, Nt), h_rb (Nr, M), h_ru (M,), h_bu (Nt,),
    h_si (Nr, Nt).
    """

    h_br: np.ndarray
    h_rb: np.ndarray
    h_ru: np.ndarray
    h_bu: np.ndarray
    h_si: np.ndarray

    def __post_init__(self):
        m, nt = np.asarray(self.h_br).shape
        nr = np.asarray(self.h_rb).shape[0]
        shapes = {
            "h_rb": (nr, m),
            "h_ru": (m,),
            "h_bu": (nt,),
            "h_si": (nr, nt),
        }
        for name, want in shapes.items():
            arr = np.asarray(getattr(self, name))
            if arr.shape != want:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {want}")
        for name in ("h_br", "h_rb", "h_ru", "h_bu", "h_si"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)

    @property
    def n_tx(self) -> int:
        return self.h_br.shape[1]

    @property
    def n_rx(self) -> int:
        return self.h_rb.shape[0]

    @property
    def n_ris(self) -> int:
        return self.h_br.shape[0]


def build_channel_set(
    tx_spec: UlaSpec,
    rx_spec: UlaSpec,
    ris_spec: UpaSpec,
    layout: GeometryLayout,
    br: MultipathSpec,
    ru: MultipathSpec,
    bu: MultipathSpec,
    seed: int = 0,
    reciprocal_ris_links: bool = False,
) -> ChannelSet:
    """Draw a full channel set from one master seed.

    Each link gets an independent stream derived from the master seed.
    With reciprocal_ris_links the RIS-to-receiver matrix is the transpose
    of the BS-to-RIS matrix restricted to the first Nr transmit elements
    instead of an independent draw.
    """
    streams = np.random.SeedSequence(seed).generate_state(4)
    nt, nr, m = tx_spec.n_elements, rx_spec.n_elements, ris_spec.n_elements

    h_br = generate_multipath_channel(
        nt, m, ula_steering_fn(tx_spec), upa_steering_fn(ris_spec),
        _reseed(br, streams[0]))
    if reciprocal_ris_links:
        if nr > nt:
            raise ShapeError("reciprocal RIS links require Nr <= Nt")
        h_rb = h_br.T[:nr, :].copy()
    else:
        h_rb = generate_multipath_channel(
            m, nr, upa_steering_fn(ris_spec), ula_steering_fn(rx_spec),
            _reseed(br, streams[1]))
    h_ru = generate_multipath_channel(
        m, 1, upa_steering_fn(ris_spec), scalar_steering_fn(),
        _reseed(ru, streams[2])).ravel()
    h_bu = generate_multipath_channel(
        nt, 1, ula_steering_fn(tx_spec), scalar_steering_fn(),
        _reseed(bu, streams[3])).ravel()
    h_si = self_interference_channel(layout, tx_spec.wavelength)
    return ChannelSet(h_br=h_br, h_rb=h_rb, h_ru=h_ru, h_bu=h_bu, h_si=h_si)


def _reseed(spec: MultipathSpec, seed) -> MultipathSpec:
    return MultipathSpec(
        distance=spec.distance,
        n_paths=spec.n_paths,
        pathloss_ref_db=spec.pathloss_ref_db,
        pathloss_exponent=spec.pathloss_exponent,
        rng_seed=int(seed),
    )


def save_channel_set(path, channels: ChannelSet, seed: Optional[int] = None,
                     spec_echo: Optional[dict] = None):
    """Self-describing binary dump (shapes + complex payload + seed echo)."""
    meta = dict(spec_echo or {})
    np.savez(
        path,
        h_br=channels.h_br, h_rb=channels.h_rb, h_ru=channels.h_ru,
        h_bu=channels.h_bu, h_si=channels.h_si,
        seed=-1 if seed is None else seed,
        spec_echo=np.array(repr(sorted(meta.items())), dtype=object),
    )


def load_channel_set(path) -> ChannelSet:
    data = np.load(path, allow_pickle=True)
    return ChannelSet(
        h_br=data["h_br"], h_rb=data["h_rb"], h_ru=data["h_ru"],
        h_bu=data["h_bu"], h_si=data["h_si"],
    )
