"""Array geometry: steering vectors and their analytic angle derivatives.

Two array types are supported: a uniform linear array (ULA) with phase
reference at the array center, and a square uniform planar array (UPA)
whose elements carry a cosine radiation pattern. Both provide closed-form
derivatives with respect to the elevation angle, which feed the sensing
matrices and their Fisher-information terms.

Angles are radians everywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

# Steering derivatives blow up where the cosine amplitude pattern is
# non-smooth; reject evaluation within this margin of |cos(theta)| = 0.
EPS_ANGLE = 1e-9


@dataclass(frozen=True)
class UlaSpec:
    """Uniform linear array: element count, spacing and carrier wavelength."""

    n_elements: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if self.n_elements < 1:
            raise DomainError(f"ULA needs at least one element, got {self.n_elements}")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise DomainError(f"ULA spacing must be positive, got {self.spacing}")
        if not (self.wavelength > 0 and np.isfinite(self.wavelength)):
            raise DomainError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def phase_factor(self) -> float:
        """Per-element phase constant k = 2*pi*spacing/wavelength."""
        return 2.0 * np.pi * self.spacing / self.wavelength


@dataclass(frozen=True)
class UpaSpec:
    """Square uniform planar array with side*side elements in the z=0 plane."""

    side: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if self.side < 1:
            raise DomainError(f"UPA side must be >= 1, got {self.side}")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise DomainError(f"UPA spacing must be positive, got {self.spacing}")
        if not (self.wavelength > 0 and np.isfinite(self.wavelength)):
            raise DomainError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def n_elements(self) -> int:
        return self.side * self.side


@dataclass(frozen=True)
class SteeringVector:
    """Complex array response, optionally tagged as a derivative.

    Attributes
    ----------
    entries : np.ndarray
        Complex response, one entry per element.
    derivative_of : str or None
        Name of the angle this vector is the derivative with respect to,
        or None for a plain response.
    """

    entries: np.ndarray
    derivative_of: Optional[str] = None

    def __array__(self, dtype=None):
        return np.asarray(self.entries, dtype=dtype)

    def __len__(self) -> int:
        return len(self.entries)


def _centered_indices(n: int) -> np.ndarray:
    # 0-based index i maps to i - (n-1)/2, symmetric about the array center
    return np.arange(n) - (n - 1) / 2.0


def ula_steering(spec: UlaSpec, theta: float) -> SteeringVector:
    """ULA response: entry i is exp(j*(i-(N-1)/2)*k*sin(theta)).

    Parameters
    ----------
    spec : UlaSpec
    theta : float
        Elevation angle in radians; broadside is theta = 0.
    """
    idx = _centered_indices(spec.n_elements)
    entries = np.exp(1j * idx * spec.phase_factor * np.sin(theta))
    return SteeringVector(entries)


def ula_steering_derivative(spec: UlaSpec, theta: float) -> SteeringVector:
    """Derivative of :func:`ula_steering` with respect to theta.

    Each entry carries its own centered index: entry i equals
    j*(i-(N-1)/2)*k*cos(theta) times the corresponding response entry.
    """
    idx = _centered_indices(spec.n_elements)
    base = ula_steering(spec, theta).entries
    entries = 1j * idx * spec.phase_factor * np.cos(theta) * base
    return SteeringVector(entries, derivative_of="theta")


def _upa_factors(spec: UpaSpec, theta: float, psi: float):
    """Kronecker factors of the UPA response, without the amplitude."""
    n = np.arange(spec.side)
    c = 2.0 * np.pi * spec.spacing / spec.wavelength
    st = np.sin(theta)
    # left factor progresses in sin(theta)*sin(psi), right in sin(theta)*cos(psi)
    left = np.exp(1j * c * n * st * np.sin(psi))
    right = np.exp(1j * c * n * st * np.cos(psi))
    return left, right, n, c


def upa_steering(spec: UpaSpec, theta: float, psi: float) -> SteeringVector:
    """UPA response with cosine element pattern.

    sqrt(|cos(theta)|) times the Kronecker product of two length-side
    phase progressions: the left factor in sin(theta)*sin(psi) and the
    right factor in sin(theta)*cos(psi). Length is side**2.
    """
    left, right, _, _ = _upa_factors(spec, theta, psi)
    amp = np.sqrt(np.abs(np.cos(theta)))
    return SteeringVector(amp * np.kron(left, right))


def upa_steering_derivative(spec: UpaSpec, theta: float, psi: float) -> SteeringVector:
    """Derivative of :func:`upa_steering` with respect to theta.

    Sum of the amplitude-derivative term and the two phase-derivative
    Kronecker terms. Raises :class:`DomainError` within ``EPS_ANGLE`` of
    |cos(theta)| = 0, where the amplitude factor is not differentiable.
    """
    ct = np.cos(theta)
    if np.abs(ct) < EPS_ANGLE:
        raise DomainError(
            f"UPA steering derivative undefined near endfire: |cos(theta)|={np.abs(ct):.3e}"
        )
    left, right, n, c = _upa_factors(spec, theta, psi)
    amp = np.sqrt(np.abs(ct))
    amp_dot = -np.sin(theta) * ct / (2.0 * np.abs(ct) ** 1.5)
    dleft = 1j * c * n * ct * np.sin(psi) * left
    dright = 1j * c * n * ct * np.cos(psi) * right
    entries = (
        amp_dot * np.kron(left, right)
        + amp * np.kron(dleft, right)
        + amp * np.kron(left, dright)
    )
    return SteeringVector(entries, derivative_of="theta")
