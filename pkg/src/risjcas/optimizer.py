"""Alternating optimization of transmit covariance and RIS phases.

The covariance subproblem (concave in R over the PSD trace ball) is
solved with projected gradient ascent and an adaptive step; the phase
subproblem uses weight-averaged gradient ascent on the unit-modulus
vector: gradients are computed for every weight alpha on the grid,
averaged, the diagonal extracted, a step taken, and the result projected
back onto the unit circle per element.

With backtracking enabled the run is monotone: a phase step is only
accepted if it does not decrease the alpha-averaged objective, and each
covariance re-solve warm-starts from its previous point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .channels import ChannelSet, total_comm_channel
from .coupling import (
    CONVENTIONAL,
    PhaseShiftVector,
    ScatteringMatrix,
    as_upsilon_array,
    effective_reflection,
)
from .errors import EmptyInput, NumericalAbort, ShapeError, SingularReflection
from .metrics import (
    SensingMatrices,
    SensingScene,
    TransmitCovariance,
    fi_diag,
    fi_quadratic_form,
    grad_upsilon_fi,
    grad_upsilon_mi,
    mutual_information,
    weighted_objective,
)

DEFAULT_ALPHA_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of the alternating optimization loop."""

    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID
    step_size: float = 0.1
    outer_iters: int = 30
    inner_cov_iters: int = 150
    backtracking: bool = True
    backtrack_shrink: float = 0.5
    max_backtracks: int = 10
    objective_tol: float = 1e-6
    constraint_tol: float = 1e-9

    def __post_init__(self):
        grid = tuple(float(a) for a in self.alpha_grid)
        if len(grid) == 0:
            raise ShapeError("alpha grid must be nonempty")
        if any(not 0.0 <= a <= 1.0 for a in grid):
            raise ShapeError("alpha grid values must lie in [0, 1]")
        if list(grid) != sorted(set(grid)):
            raise ShapeError("alpha grid must be sorted and distinct")
        if not self.step_size > 0:
            raise ShapeError("step size must be positive")
        object.__setattr__(self, "alpha_grid", grid)


@dataclass(frozen=True)
class TraceRecord:
    """One optimizer trace row, suitable for direct CSV emission."""

    iteration: int
    alpha: float
    objective: float
    fi_trace: float
    mi: float
    step_size: float


@dataclass
class OptimizationResult:
    upsilon_final: PhaseShiftVector
    rx_per_alpha: List[TransmitCovariance]
    trajectory: List[float]
    pareto_points: List[Tuple[float, float, float]]  # (fi_trace, mi, alpha)
    trace_records: List[TraceRecord] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def project_unit_modulus(upsilon_raw: np.ndarray) -> PhaseShiftVector:
    """Elementwise projection v/|v|; exact zeros map to 1+0j."""
    raw = np.asarray(upsilon_raw, dtype=complex)
    mags = np.abs(raw)
    safe = np.where(mags == 0.0, 1.0, mags)
    # componentwise real division: complex division would square the
    # magnitude internally and underflow for subnormal inputs
    out = raw.real / safe + 1j * (raw.imag / safe)
    out[mags == 0.0] = 1.0 + 0.0j
    return PhaseShiftVector(out)


def _truncated_simplex(lam: np.ndarray, p: float) -> np.ndarray:
    """Euclidean projection of eigenvalues onto {x >= 0, sum(x) <= p}."""
    clipped = np.maximum(lam, 0.0)
    if clipped.sum() <= p:
        return clipped
    if p <= 0.0:
        return np.zeros_like(lam)
    # active sum constraint: standard sorted-threshold simplex projection
    u = np.sort(lam)[::-1]
    cssv = np.cumsum(u) - p
    j = np.arange(1, len(u) + 1)
    rho = np.nonzero(u - cssv / j > 0)[0][-1]
    tau = cssv[rho] / (rho + 1.0)
    return np.maximum(lam - tau, 0.0)


def project_psd_trace(r_raw: np.ndarray, p: float) -> TransmitCovariance:
    """Frobenius projection onto {R PSD, Tr(R) <= p}.

    The input is symmetrized, eigendecomposed, the eigenvalues projected
    onto the truncated simplex, and the matrix reassembled.
    """
    if p < 0:
        raise ShapeError(f"power budget must be nonnegative, got {p}")
    r = np.asarray(r_raw, dtype=complex)
    r = (r + r.conj().T) / 2.0
    lam, u = np.linalg.eigh(r)
    lam_proj = _truncated_simplex(lam, p)
    out = (u * lam_proj) @ u.conj().T
    out = (out + out.conj().T) / 2.0
    return TransmitCovariance(out, power_budget=p)


def average_gradient_over_weights(gradients: Sequence[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of the per-weight gradients."""
    if len(gradients) == 0:
        raise EmptyInput("no gradients to average")
    stack = np.stack([np.asarray(g, dtype=complex) for g in gradients])
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ShapeError("gradients must be same-shape square matrices")
    return stack.mean(axis=0)


def ascent_step(
    upsilon: Union[PhaseShiftVector, np.ndarray],
    g_avg: np.ndarray,
    mu: float,
) -> PhaseShiftVector:
    """Diagonal-extraction gradient step followed by unit-modulus projection."""
    ups = as_upsilon_array(upsilon)
    grad_diag = np.diagonal(np.asarray(g_avg, dtype=complex))
    if grad_diag.shape != ups.shape:
        raise ShapeError("gradient diagonal does not match phase vector length")
    return project_unit_modulus(ups + mu * grad_diag)


def solve_covariance(
    alpha: float,
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    theta,
    p: float,
    config: OptimizerConfig,
    r0: Optional[np.ndarray] = None,
    history: Optional[list] = None,
) -> TransmitCovariance:
    """Concave covariance subproblem on the PSD trace ball.

    Projected gradient ascent with an adaptive (grow on success, shrink on
    failure) step. The start is (p/Nt) I, or the warm start r0 if it
    scores higher, so the returned objective never falls below either.
    When a list is passed as ``history`` it receives the accepted
    objective value of every inner iteration.
    """
    nt = channels.n_tx
    if p <= 0.0:
        return TransmitCovariance(np.zeros((nt, nt), dtype=complex), power_budget=0.0)
    c_fi = fi_quadratic_form(scene, mats, channels, theta)
    h_row = total_comm_channel(channels.h_ru, theta, channels.h_br, channels.h_bu)
    sig_c = scene.noise_var_comm
    hh = np.outer(h_row.conj(), h_row)

    def objective(r: np.ndarray) -> float:
        fi_part = float(np.real(np.trace(c_fi @ r)))
        quad = float(np.real(h_row @ r @ h_row.conj()))
        return alpha * fi_part + (1.0 - alpha) * np.log2(1.0 + max(quad, 0.0) / sig_c)

    def gradient(r: np.ndarray) -> np.ndarray:
        quad = float(np.real(h_row @ r @ h_row.conj()))
        return alpha * c_fi + (1.0 - alpha) / (np.log(2.0) * (sig_c + quad)) * hh

    r = np.eye(nt, dtype=complex) * (p / nt)
    best = objective(r)
    if r0 is not None:
        warm = np.asarray(r0, dtype=complex)
        f_warm = objective(warm)
        if f_warm > best:
            r, best = warm.copy(), f_warm

    grad_norm = np.linalg.norm(gradient(r))
    step = p / grad_norm if grad_norm > 0 else 1.0
    stall = 0
    if history is not None:
        history.append(best)
    for _ in range(config.inner_cov_iters):
        g = gradient(r)
        improved = False
        for _ in range(30):
            cand = project_psd_trace(r + step * g, p).r
            f_cand = objective(cand)
            if f_cand >= best:
                improvement = f_cand - best
                r, best = cand, f_cand
                step *= 2.0
                improved = True
                break
            step *= 0.5
        if history is not None:
            history.append(best)
        if not improved:
            break
        if improvement < config.objective_tol * max(1.0, abs(best)):
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
    return project_psd_trace(r, p)


def _phase_objective(
    upsilon: np.ndarray,
    rx_list: Sequence[np.ndarray],
    model: str,
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    s,
    alpha_grid: Sequence[float],
):
    """Per-alpha (objective, fi, mi) at fixed covariances; may raise
    SingularReflection for an infeasible candidate."""
    theta = effective_reflection(upsilon, s, model)
    rows = []
    for alpha, r in zip(alpha_grid, rx_list):
        fi = fi_diag(scene, mats, channels, theta, r)
        h_row = total_comm_channel(channels.h_ru, theta, channels.h_br, channels.h_bu)
        mi = mutual_information(h_row, r, scene.noise_var_comm)
        rows.append((weighted_objective(alpha, fi, mi), fi.trace, mi))
    return theta, rows


def initial_phase_vector(m: int, s, model: str) -> PhaseShiftVector:
    """All-ones start; when dense coupling makes the all-ones reflection
    operator exactly singular (scattering eigenvalues at 1), back off by
    the smallest uniform rotation that is solvable again."""
    ones = PhaseShiftVector(np.ones(m, dtype=complex))
    if model == CONVENTIONAL:
        return ones
    candidates = [0.0, 1e-3, 1e-2, 0.1, np.pi / 4]
    for eps in candidates:
        candidate = PhaseShiftVector(np.full(m, np.exp(1j * eps)))
        try:
            effective_reflection(candidate, s, model)
            return candidate
        except SingularReflection:
            continue
    raise NumericalAbort("no feasible uniform initialization", {"m": m})


def alternating_optimize(
    mode: str,
    model: str,
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    s: Union[ScatteringMatrix, np.ndarray, None],
    config: OptimizerConfig,
    power: float,
) -> OptimizationResult:
    """Joint covariance/phase optimization over the weight grid.

    Every outer iteration solves the covariance for each alpha, averages
    the per-alpha gradients, and takes one projected phase step. The
    result carries the per-alpha covariances of the final phases and the
    (fi, mi, alpha) operating points they induce.
    """
    m = channels.n_ris
    alpha_grid = tuple(config.alpha_grid)
    s_eff = s if s is not None else ScatteringMatrix.zero(m)
    ups = initial_phase_vector(m, s_eff, model)

    rx_list: List[np.ndarray] = [None] * len(alpha_grid)
    trajectory: List[float] = []
    trace_records: List[TraceRecord] = []
    diagnostics = {"singular_candidates": 0, "no_move_iterations": 0}
    stall = 0
    theta = effective_reflection(ups, s_eff, model)

    for it in range(config.outer_iters):
        gradients = []
        for k, alpha in enumerate(alpha_grid):
            cov = solve_covariance(alpha, scene, mats, channels, theta, power, config,
                                   r0=rx_list[k])
            rx_list[k] = cov.r
            g_fi = grad_upsilon_fi(mode, model, scene, mats, channels, ups.upsilon,
                                   s_eff, cov.r)
            g_mi = grad_upsilon_mi(model, channels, ups.upsilon, s_eff, cov.r,
                                   scene.noise_var_comm)
            gradients.append(alpha * g_fi + (1.0 - alpha) * g_mi)

        _, rows = _phase_objective(ups.upsilon, rx_list, model, scene, mats,
                                   channels, s_eff, alpha_grid)
        current_avg = float(np.mean([row[0] for row in rows]))
        for alpha, row in zip(alpha_grid, rows):
            trace_records.append(TraceRecord(it, alpha, row[0], row[1], row[2],
                                             config.step_size))
        trajectory.append(current_avg)

        g_avg = average_gradient_over_weights(gradients)
        mu = config.step_size
        if config.backtracking:
            # trust-region style trial: near reflection resonances the raw
            # gradient spans many orders of magnitude, so scale the first
            # trial to a bounded phase move and let backtracking refine
            g_scale = float(np.max(np.abs(np.diagonal(g_avg))))
            if g_scale > 1.0:
                mu = config.step_size / g_scale
        accepted = None
        singular_tries = 0
        for _ in range(config.max_backtracks + 1):
            candidate = ascent_step(ups, g_avg, mu)
            try:
                cand_theta, cand_rows = _phase_objective(
                    candidate.upsilon, rx_list, model, scene, mats, channels,
                    s_eff, alpha_grid)
            except SingularReflection:
                diagnostics["singular_candidates"] += 1
                singular_tries += 1
                if singular_tries > config.max_backtracks:
                    raise NumericalAbort(
                        "phase update kept hitting singular reflection operators",
                        diagnostics)
                mu *= 0.5
                continue
            cand_avg = float(np.mean([row[0] for row in cand_rows]))
            if not config.backtracking or cand_avg >= current_avg - 1e-12:
                accepted = (candidate, cand_theta, cand_avg)
                break
            mu *= config.backtrack_shrink
        if accepted is None:
            diagnostics["no_move_iterations"] += 1
            new_avg = current_avg
        else:
            ups, theta, new_avg = accepted

        if abs(new_avg - current_avg) < config.objective_tol * max(1.0, abs(current_avg)):
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0

    # final covariances and operating points at the final phases
    final_rx: List[TransmitCovariance] = []
    pareto: List[Tuple[float, float, float]] = []
    for k, alpha in enumerate(alpha_grid):
        cov = solve_covariance(alpha, scene, mats, channels, theta, power, config,
                               r0=rx_list[k])
        final_rx.append(cov)
        fi = fi_diag(scene, mats, channels, theta, cov)
        h_row = total_comm_channel(channels.h_ru, theta, channels.h_br, channels.h_bu)
        mi = mutual_information(h_row, cov, scene.noise_var_comm)
        pareto.append((fi.trace, mi, alpha))
        trace_records.append(TraceRecord(config.outer_iters, alpha,
                                         weighted_objective(alpha, fi, mi),
                                         fi.trace, mi, config.step_size))
    _, rows = _phase_objective(ups.upsilon, [c.r for c in final_rx], model, scene,
                               mats, channels, s_eff, alpha_grid)
    trajectory.append(float(np.mean([row[0] for row in rows])))

    return OptimizationResult(
        upsilon_final=ups,
        rx_per_alpha=final_rx,
        trajectory=trajectory,
        pareto_points=pareto,
        trace_records=trace_records,
        diagnostics=diagnostics,
    )


def pareto_sweep(
    mode: str,
    model: str,
    scene: SensingScene,
    mats: SensingMatrices,
    channels: ChannelSet,
    s,
    config: OptimizerConfig,
    power: float,
) -> List[Tuple[float, float, float]]:
    """Run the optimizer and return (alpha, fi_trace, mi) per grid point."""
    result = alternating_optimize(mode, model, scene, mats, channels, s, config, power)
    return [(alpha, fi, mi) for fi, mi, alpha in result.pareto_points]
