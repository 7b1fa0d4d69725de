"""Projections, the covariance subproblem, and the alternating loop."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import risjcas as rj
from risjcas.errors import EmptyInput
from conftest import WAVELENGTH as LAM
from conftest import mono_scene, random_channels, random_psd, random_upsilon


class TestProjectUnitModulus:
    def test_magnitude_normalization(self):
        got = rj.project_unit_modulus(np.array([2.0 * np.exp(1j * np.pi / 4)]))
        np.testing.assert_allclose(got.upsilon, [np.exp(1j * np.pi / 4)], atol=1e-15)

    def test_idempotent_on_feasible_points(self):
        ups = np.exp(1j * np.linspace(-3, 3, 7))
        got = rj.project_unit_modulus(ups)
        np.testing.assert_allclose(got.upsilon, ups, atol=1e-12)

    def test_zero_maps_to_one(self):
        got = rj.project_unit_modulus(np.array([0.0 + 0.0j, 3.0j]))
        np.testing.assert_allclose(got.upsilon, [1.0, 1.0j], atol=1e-15)

    @given(arrays(np.complex128, 5,
                  elements=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                              allow_infinity=False)))
    @settings(max_examples=50, deadline=None)
    def test_always_unit_modulus(self, raw):
        got = rj.project_unit_modulus(raw)
        np.testing.assert_allclose(np.abs(got.upsilon), 1.0, atol=1e-12)


class TestProjectPsdTrace:
    def test_feasible_point_unchanged(self):
        rng = np.random.default_rng(0)
        r = random_psd(rng, 4, trace=0.8)
        got = rj.project_psd_trace(r, 1.0)
        np.testing.assert_allclose(got.r, r, atol=1e-12)

    def test_clip_then_saturate(self):
        # hand enumeration of the active sets for diag(3, -1), budget 2
        got = rj.project_psd_trace(np.diag([3.0, -1.0]), 2.0)
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(got.r)), [0.0, 2.0],
                                   atol=1e-12)

    def test_uniform_shift(self):
        got = rj.project_psd_trace(np.diag([2.0, 2.0]), 2.0)
        np.testing.assert_allclose(got.r, np.eye(2), atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        raw = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        once = rj.project_psd_trace(raw, 1.5)
        twice = rj.project_psd_trace(once.r, 1.5)
        np.testing.assert_allclose(twice.r, once.r, atol=1e-12)

    def test_zero_budget(self):
        got = rj.project_psd_trace(np.diag([1.0, 2.0]), 0.0)
        np.testing.assert_allclose(got.r, 0.0, atol=1e-15)

    def test_contraction_toward_feasible_points(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            x = (x + x.conj().T) / 2
            y = random_psd(rng, 3, trace=rng.uniform(0.1, 1.0))
            px = rj.project_psd_trace(x, 1.0).r
            assert (np.linalg.norm(px - y) <= np.linalg.norm(x - y) + 1e-12)


def _system(seed=0, m_side=2, noise_comm=0.05):
    rng = np.random.default_rng(seed)
    tx = rj.UlaSpec(4, LAM / 2, LAM)
    rx = rj.UlaSpec(4, LAM / 2, LAM)
    ris = rj.UpaSpec(m_side, LAM / 4, LAM)
    ch = random_channels(rng, m=ris.n_elements)
    scene = mono_scene(noise_comm=noise_comm)
    mats = rj.build_sensing_matrices(scene, tx, rx, ris)
    smat = rj.scattering_from_coupling(rj.build_coupling_matrix(ris))
    theta = rj.effective_reflection(random_upsilon(rng, ris.n_elements), smat,
                                    "physically_consistent")
    return rng, ch, scene, mats, smat, theta


class TestSolveCovariance:
    def test_mi_only_is_beamforming(self):
        rng, ch, scene, mats, smat, theta = _system(0)
        config = rj.OptimizerConfig(inner_cov_iters=200)
        p = 1.0
        cov = rj.solve_covariance(0.0, scene, mats, ch, theta, p, config)
        h_row = rj.total_comm_channel(ch.h_ru, theta, ch.h_br, ch.h_bu)
        achieved = float(np.real(h_row @ cov.r @ h_row.conj()))
        assert achieved >= 0.999 * p * np.linalg.norm(h_row) ** 2

    def test_fi_only_hits_top_eigenvalue(self):
        rng, ch, scene, mats, smat, theta = _system(1)
        config = rj.OptimizerConfig(inner_cov_iters=200)
        p = 2.0
        cov = rj.solve_covariance(1.0, scene, mats, ch, theta, p, config)
        c = rj.fi_quadratic_form(scene, mats, ch, theta)
        achieved = float(np.real(np.trace(c @ cov.r)))
        best = p * float(np.linalg.eigvalsh(c)[-1])
        assert achieved >= best - 1e-6 * best

    def test_zero_power(self):
        rng, ch, scene, mats, smat, theta = _system(2)
        cov = rj.solve_covariance(0.5, scene, mats, ch, theta, 0.0,
                                  rj.OptimizerConfig())
        np.testing.assert_allclose(cov.r, 0.0, atol=1e-15)

    def test_feasible_and_no_worse_than_uniform_start(self):
        rng, ch, scene, mats, smat, theta = _system(3)
        config = rj.OptimizerConfig()
        p = 1.0
        cov = rj.solve_covariance(0.4, scene, mats, ch, theta, p, config)
        assert np.real(np.trace(cov.r)) <= p + 1e-9
        assert np.linalg.eigvalsh(cov.r)[0] >= -1e-10

        def objective(rmat):
            fi = rj.fi_diag(scene, mats, ch, theta, rmat)
            h_row = rj.total_comm_channel(ch.h_ru, theta, ch.h_br, ch.h_bu)
            return rj.weighted_objective(
                0.4, fi, rj.mutual_information(h_row, rmat, scene.noise_var_comm))

        assert objective(cov.r) >= objective(np.eye(4) * (p / 4)) - 1e-12


class TestGradientAveragingAndStep:
    def test_single_gradient_is_identity(self):
        g = np.arange(9, dtype=complex).reshape(3, 3)
        np.testing.assert_array_equal(rj.average_gradient_over_weights([g]), g)

    def test_opposite_gradients_cancel(self):
        g = np.ones((2, 2), dtype=complex)
        np.testing.assert_allclose(rj.average_gradient_over_weights([g, -g]), 0.0)

    def test_mean_matches_loop(self):
        rng = np.random.default_rng(3)
        gs = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
              for _ in range(3)]
        want = np.zeros((3, 3), dtype=complex)
        for g in gs:
            want += g
        want /= 3
        np.testing.assert_allclose(rj.average_gradient_over_weights(gs), want,
                                   rtol=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            rj.average_gradient_over_weights([])

    def test_zero_gradient_keeps_phases(self):
        ups = np.exp(1j * np.array([0.4, -0.4]))
        got = rj.ascent_step(ups, np.zeros((2, 2)), 0.5)
        np.testing.assert_allclose(got.upsilon, ups, atol=1e-15)

    def test_zero_step_keeps_phases(self):
        ups = np.exp(1j * np.array([0.4, -0.4]))
        got = rj.ascent_step(ups, np.ones((2, 2)), 0.0)
        np.testing.assert_allclose(got.upsilon, ups, atol=1e-15)

    def test_unit_step_arithmetic(self):
        got = rj.ascent_step(np.array([1.0 + 0j]), np.array([[1.0j]]), 1.0)
        np.testing.assert_allclose(got.upsilon, [(1 + 1j) / np.sqrt(2)], atol=1e-15)


class TestAlternatingOptimize:
    def _run(self, model, seed=0, m_side=2, outer=6, backtracking=True,
             s=None, noise_comm=0.05):
        rng, ch, scene, mats, smat, _ = _system(seed, m_side=m_side,
                                                noise_comm=noise_comm)
        config = rj.OptimizerConfig(
            alpha_grid=(0.0, 0.5, 1.0), step_size=0.05, outer_iters=outer,
            inner_cov_iters=60, backtracking=backtracking)
        s_use = s if s is not None else (
            smat if model == "physically_consistent"
            else rj.ScatteringMatrix.zero(ch.n_ris))
        return rj.alternating_optimize("monostatic", model, scene, mats, ch,
                                       s_use, config, power=1.0)

    def test_monotone_trajectory_with_backtracking(self):
        result = self._run("physically_consistent", seed=1)
        traj = np.array(result.trajectory)
        assert np.all(np.diff(traj) >= -1e-9 * np.maximum(1.0, np.abs(traj[:-1])))

    def test_feasibility_invariants(self):
        result = self._run("conventional", seed=2)
        np.testing.assert_allclose(np.abs(result.upsilon_final.upsilon), 1.0,
                                   atol=1e-12)
        for cov in result.rx_per_alpha:
            assert np.real(np.trace(cov.r)) <= 1.0 + 1e-9
            assert np.linalg.eigvalsh(cov.r)[0] >= -1e-10

    def test_zero_outer_iterations_returns_start(self):
        result = self._run("conventional", seed=3, outer=0)
        np.testing.assert_allclose(result.upsilon_final.upsilon, 1.0, atol=1e-15)
        assert len(result.rx_per_alpha) == 3

    def test_zero_scattering_reproduces_conventional(self):
        res_conv = self._run("conventional", seed=4)
        res_pc = self._run("physically_consistent", seed=4,
                           s=rj.ScatteringMatrix.zero(4))
        a, b = np.array(res_conv.trajectory), np.array(res_pc.trajectory)
        np.testing.assert_allclose(a, b, atol=1e-9)
        np.testing.assert_allclose(res_conv.upsilon_final.upsilon,
                                   res_pc.upsilon_final.upsilon, atol=1e-9)

    def test_deterministic_rerun(self):
        a = self._run("physically_consistent", seed=5)
        b = self._run("physically_consistent", seed=5)
        assert np.array_equal(a.upsilon_final.upsilon, b.upsilon_final.upsilon)
        assert a.trajectory == b.trajectory

    def test_trace_records_cover_grid(self):
        result = self._run("conventional", seed=6, outer=2)
        alphas = sorted({rec.alpha for rec in result.trace_records})
        assert alphas == [0.0, 0.5, 1.0]


class TestParetoSweep:
    def test_point_count_matches_grid(self):
        rng, ch, scene, mats, smat, _ = _system(8)
        config = rj.OptimizerConfig(alpha_grid=tuple(np.round(np.linspace(0, 1, 11), 10)),
                                    step_size=0.05, outer_iters=2, inner_cov_iters=40)
        points = rj.pareto_sweep("monostatic", "conventional", scene, mats, ch,
                                 rj.ScatteringMatrix.zero(4), config, power=1.0)
        assert len(points) == 11

    def test_singleton_grid(self):
        rng, ch, scene, mats, smat, _ = _system(9)
        config = rj.OptimizerConfig(alpha_grid=(0.5,), step_size=0.05,
                                    outer_iters=2, inner_cov_iters=40)
        points = rj.pareto_sweep("monostatic", "conventional", scene, mats, ch,
                                 rj.ScatteringMatrix.zero(4), config, power=1.0)
        assert len(points) == 1

    def test_extreme_weights_order_mi(self):
        # MI at alpha=0 should not fall below MI at alpha=1 (majority vote)
        wins = 0
        for seed in range(20):
            rng, ch, scene, mats, smat, _ = _system(seed + 100)
            config = rj.OptimizerConfig(alpha_grid=(0.0, 1.0), step_size=0.05,
                                        outer_iters=3, inner_cov_iters=60)
            pts = rj.pareto_sweep("monostatic", "conventional", scene, mats, ch,
                                  rj.ScatteringMatrix.zero(4), config, power=1.0)
            mi = {alpha: mi for alpha, _, mi in pts}
            if mi[0.0] >= mi[1.0] - 1e-9:
                wins += 1
        assert wins > 10
