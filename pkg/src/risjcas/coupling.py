"""Mutual coupling of RIS elements and the effective reflection operator.

The coupling matrix of a planar array with cosine-pattern elements is the
normalized overlap of the element patterns over the upper hemisphere:

    B_mn = [ integral cos(t) * exp(j*k*(r_m - r_n).u(t,p)) dOmega ]
           / [ integral cos(t) dOmega ]

with u the unit direction vector, t in [0, pi/2] and p in [0, 2*pi). For
elements in the z = 0 plane the integral is real, so B is real symmetric
with unit diagonal. It is computed here with tensor-product Gauss-Legendre
quadrature; the exact value only depends on the element distance and
equals 2*J1(k*rho)/(k*rho), which the tests use as an independent check.

The scattering matrix follows from the spectral construction
S = U * sqrt(I - Lambda) * U^T where B = U * Lambda * U^H. Eigenvalues of
B are clipped into [0, 1] first: at sub-half-wavelength spacing the raw
overlap matrix genuinely has eigenvalues above 1 (oversampled aperture),
and the clip keeps S passive. The reconstruction residual
|| (I - S S^H) - B || is reported as a diagnostic, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import QuadratureError, ShapeError, SingularReflection
from .geometry import UpaSpec

PHYSICALLY_CONSISTENT = "physically_consistent"
CONVENTIONAL = "conventional"

UNIT_MODULUS_TOL = 1e-9
PASSIVITY_TOL = 1e-10
REFLECTION_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class PhaseShiftVector:
    """Unit-modulus reflection coefficients of the RIS elements."""

    upsilon: np.ndarray

    def __post_init__(self):
        ups = np.asarray(self.upsilon, dtype=complex)
        if ups.ndim != 1:
            raise ShapeError(f"phase shift vector must be 1-D, got shape {ups.shape}")
        if not np.all(np.isfinite(ups)):
            raise ShapeError("phase shift vector has non-finite entries")
        err = np.max(np.abs(np.abs(ups) - 1.0))
        if err > UNIT_MODULUS_TOL:
            raise ShapeError(f"phase shifts must be unit modulus, worst error {err:.3e}")
        object.__setattr__(self, "upsilon", ups)

    @property
    def n_elements(self) -> int:
        return self.upsilon.shape[0]


@dataclass(frozen=True)
class CouplingMatrix:
    """Embedded-pattern coupling matrix B (Hermitian, unit diagonal)."""

    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ShapeError(f"coupling matrix must be square, got {b.shape}")
        if np.max(np.abs(b - b.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(b))):
            raise ShapeError("coupling matrix is not Hermitian")
        if np.max(np.abs(np.diagonal(b) - 1.0)) > 1e-9:
            raise ShapeError("coupling matrix diagonal must be 1")
        object.__setattr__(self, "b", b)

    @property
    def n_elements(self) -> int:
        return self.b.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.b)


@dataclass(frozen=True)
class ScatteringMatrix:
    """Mutual-coupling scattering operator; always passive."""

    s: np.ndarray
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ShapeError(f"scattering matrix must be square, got {s.shape}")
        smax = np.linalg.norm(s, 2) if s.size else 0.0
        if smax > 1.0 + PASSIVITY_TOL:
            raise ShapeError(f"scattering matrix is not passive: sigma_max={smax:.12f}")
        object.__setattr__(self, "s", s)

    @property
    def n_elements(self) -> int:
        return self.s.shape[0]

    @classmethod
    def zero(cls, m: int) -> "ScatteringMatrix":
        """The no-coupling limit used by the conventional model."""
        return cls(np.zeros((m, m), dtype=complex))


@dataclass(frozen=True)
class EffectiveReflection:
    """Effective reflection operator Theta for a given model."""

    theta: np.ndarray
    model: str

    def __post_init__(self):
        if self.model not in (PHYSICALLY_CONSISTENT, CONVENTIONAL):
            raise ShapeError(f"unknown reflection model: {self.model!r}")
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=complex))


def as_upsilon_array(upsilon: Union[PhaseShiftVector, np.ndarray]) -> np.ndarray:
    """Accept either the validated wrapper or a raw complex vector.

    Raw vectors are allowed so that finite-difference checks can perturb
    entries off the unit circle.
    """
    if isinstance(upsilon, PhaseShiftVector):
        return upsilon.upsilon
    return np.asarray(upsilon, dtype=complex)


def _element_grid(side: int, spacing: float) -> np.ndarray:
    """Integer (row, col) lattice of the UPA, row-major like the steering kron."""
    a, b = np.divmod(np.arange(side * side), side)
    return np.stack([a, b], axis=1)  # row index a -> y, col index b -> x


def build_coupling_matrix(
    spec: UpaSpec,
    n_theta: int = 128,
    n_psi: Optional[int] = None,
) -> CouplingMatrix:
    """Quadrature construction of the coupling matrix for a UPA.

    Parameters
    ----------
    spec : UpaSpec
        Array layout (side, spacing, wavelength).
    n_theta : int
        Gauss-Legendre nodes in elevation (default 128).
    n_psi : int, optional
        Gauss-Legendre nodes in azimuth. Defaults to 128, automatically
        increased when the largest element separation makes the azimuth
        integrand oscillate faster than the default grid resolves.

    Raises
    ------
    QuadratureError
        If the grid fails the self-consistency check (the unnormalized
        self-overlap must equal pi to within 1e-6 relative).
    """
    k = 2.0 * np.pi / spec.wavelength
    side = spec.side
    grid = _element_grid(side, spec.spacing)
    rho_max = np.sqrt(2.0) * (side - 1) * spec.spacing
    if n_psi is None:
        n_psi = max(128, int(np.ceil(0.75 * k * rho_max)) + 32)
        n_psi += n_psi % 2

    xt, wt = leggauss(n_theta)
    theta = 0.25 * np.pi * (xt + 1.0)
    w_theta = 0.25 * np.pi * wt * np.cos(theta) * np.sin(theta)
    xp, wp = leggauss(n_psi)
    psi = np.pi * (xp + 1.0)
    w_psi = np.pi * wp

    norm = np.sum(w_theta) * np.sum(w_psi)  # unnormalized self-overlap
    if abs(norm / np.pi - 1.0) > 1e-6:
        raise QuadratureError(
            f"self-overlap check failed: got {norm:.9f}, expected pi={np.pi:.9f}"
        )

    # One integral per distinct element offset; canonical sign keeps the
    # conjugate pair identical so the assembled matrix is exactly symmetric.
    sin_t = np.sin(theta)
    cos_p, sin_p = np.cos(psi), np.sin(psi)
    values = {(0, 0): 1.0}
    deltas = set()
    for da in range(-(side - 1), side):
        for db in range(-(side - 1), side):
            if (da, db) == (0, 0):
                continue
            if (da, db) < (0, 0):
                da, db = -da, -db
            deltas.add((da, db))
    for da, db in sorted(deltas):
        dy, dx = da * spec.spacing, db * spec.spacing
        phase = k * np.outer(sin_t, dx * cos_p + dy * sin_p)
        # the exact integral is real for a planar array; drop the residue
        integral = np.einsum("t,p,tp->", w_theta, w_psi, np.cos(phase))
        values[(da, db)] = integral / norm

    m = spec.n_elements
    b = np.empty((m, m), dtype=float)
    for i in range(m):
        for j in range(i, m):
            da, db = int(grid[i, 0] - grid[j, 0]), int(grid[i, 1] - grid[j, 1])
            if (da, db) < (0, 0):
                da, db = -da, -db
            b[i, j] = b[j, i] = values[(da, db)]
    return CouplingMatrix(b)


def scattering_from_coupling(b: CouplingMatrix) -> ScatteringMatrix:
    """Spectral construction S = U * sqrt(I - Lambda) * U^T from B.

    Eigenvalues are clipped into [0, 1] before the square root; the
    principal (nonnegative) root is used. Diagnostics record how much
    clipping occurred and the residual of I - S S^H against B.
    """
    lam, u = np.linalg.eigh(b.b)
    lam_clipped = np.clip(lam, 0.0, 1.0)
    s = (u * np.sqrt(1.0 - lam_clipped)) @ u.T
    recon = np.eye(b.n_elements) - s @ s.conj().T
    diag = {
        "clip_low": float(np.sum(np.minimum(lam, 0.0))),
        "clip_high": float(np.sum(np.maximum(lam - 1.0, 0.0))),
        "reconstruction_residual": float(
            np.linalg.norm(recon - b.b) / max(np.linalg.norm(b.b), 1e-300)
        ),
    }
    return ScatteringMatrix(s, diagnostics=diag)


def effective_reflection(
    upsilon: Union[PhaseShiftVector, np.ndarray],
    s: Union[ScatteringMatrix, np.ndarray],
    model: str = PHYSICALLY_CONSISTENT,
) -> EffectiveReflection:
    """Effective reflection operator for the requested model.

    Physically consistent: solve (Diag(upsilon)^-1 - S) Theta = I; the
    operator is non-diagonal whenever S is nonzero. Conventional: the
    diagonal Diag(upsilon), i.e. the S = 0 limit.

    Raises
    ------
    SingularReflection
        If the linear solve is too ill-conditioned (residual above
        ``REFLECTION_RESIDUAL_TOL * M``); the caller should treat the
        candidate phase vector as infeasible.
    """
    ups = as_upsilon_array(upsilon)
    m = ups.shape[0]
    if model == CONVENTIONAL:
        return EffectiveReflection(np.diag(ups), CONVENTIONAL)
    smat = s.s if isinstance(s, ScatteringMatrix) else np.asarray(s, dtype=complex)
    if smat.shape != (m, m):
        raise ShapeError(f"scattering matrix shape {smat.shape} does not match M={m}")
    if np.any(ups == 0):
        raise SingularReflection("phase shift vector has a zero entry")
    d = np.diag(1.0 / ups) - smat
    try:
        theta = np.linalg.solve(d, np.eye(m, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SingularReflection(f"reflection solve failed: {exc}") from exc
    residual = np.linalg.norm(d @ theta - np.eye(m))
    if not np.isfinite(residual) or residual > REFLECTION_RESIDUAL_TOL * m:
        raise SingularReflection(
            f"reflection solve residual {residual:.3e} exceeds {REFLECTION_RESIDUAL_TOL * m:.1e}"
        )
    return EffectiveReflection(theta, PHYSICALLY_CONSISTENT)


def save_coupling_cache(path, spec: UpaSpec, b: CouplingMatrix, n_theta: int, n_psi: int):
    """Persist B with its construction header so large runs skip requadrature."""
    np.savez(
        path,
        b=b.b,
        side=spec.side,
        spacing=spec.spacing,
        wavelength=spec.wavelength,
        n_theta=n_theta,
        n_psi=n_psi,
    )


def load_coupling_cache(path, spec: UpaSpec) -> Optional[CouplingMatrix]:
    """Load a cached B if its header matches the requested spec, else None."""
    try:
        data = np.load(path)
    except (OSError, ValueError):
        return None
    if (
        int(data["side"]) != spec.side
        or float(data["spacing"]) != spec.spacing
        or float(data["wavelength"]) != spec.wavelength
    ):
        return None
    return CouplingMatrix(data["b"])


def coupling_for(spec: UpaSpec, cache_path=None, n_theta: int = 128,
                 n_psi: Optional[int] = None) -> CouplingMatrix:
    """Build B, consulting/writing the optional cache file."""
    if cache_path is not None:
        cached = load_coupling_cache(cache_path, spec)
        if cached is not None:
            return cached
    b = build_coupling_matrix(spec, n_theta=n_theta, n_psi=n_psi)
    if cache_path is not None:
        k = 2.0 * np.pi / spec.wavelength
        rho_max = np.sqrt(2.0) * (spec.side - 1) * spec.spacing
        actual_psi = n_psi or max(128, int(np.ceil(0.75 * k * rho_max)) + 32)
        save_coupling_cache(cache_path, spec, b, n_theta, actual_psi)
    return b
