import numpy as np
import pytest
from conftest import random_theta, rel_err, wirtinger_fd

from modekit import dmd
from modekit.numerics import RankDeficiencyError, vandermonde
from modekit.workbench.synth import SynthConfig, gen_synthetic


def assert_same_set(actual, expected, atol):
    actual, expected = np.asarray(actual), np.asarray(expected)
    assert actual.shape == expected.shape
    gaps = np.abs(actual[:, None] - expected[None, :])
    assert np.all(gaps.min(axis=0) <= atol) and np.all(gaps.min(axis=1) <= atol), (actual, expected)


def linear_system_episode(rng, eigenvalues, p, tau):
    """Snapshots x_{t+1} = A x_t with A = S diag(eigenvalues) S^-1 (complex)."""
    r = len(eigenvalues)
    modes = rng.standard_normal((p, r)) + 1j * rng.standard_normal((p, r))
    amps = rng.standard_normal(r) + 1j * rng.standard_normal(r)
    return modes @ (amps[:, None] * vandermonde(eigenvalues, tau)), modes


class TestEpisode:
    def test_validation(self):
        with pytest.raises(ValueError):
            dmd.Episode(np.zeros((3, 1)), 1)
        with pytest.raises(ValueError):
            dmd.Episode(np.array([[1.0, np.inf]]), 1)

    def test_shape(self):
        ep = dmd.Episode(np.zeros((3, 5)), 2, "x")
        assert (ep.p, ep.tau) == (3, 5)


class TestExactDmd:
    def test_scalar_growth(self):
        x = np.array([[1.0, 2.0, 4.0, 8.0]])
        fit = dmd.exact_dmd(x, 1)
        np.testing.assert_allclose(fit.theta, [2.0])
        assert fit.modes.shape == (1, 1)

    def test_rotation(self):
        phi = np.pi / 4
        rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        x = np.empty((2, 10))
        x[:, 0] = [1.0, 0.3]
        for t in range(1, 10):
            x[:, t] = rot @ x[:, t - 1]
        theta = dmd.exact_dmd(x, 2).theta
        expected = np.linalg.eigvals(rot)
        assert_same_set(theta, expected, 1e-10)

    def test_noise_free_synthetic_recovery(self):
        episodes, truth = gen_synthetic(
            SynthConfig(n=2, tau=30, image_side=4, noise_sd=0.0, complex_output=True, seed=3),
            return_truth=True,
        )
        # episodes are x_t = l^t w (t from 1), so the eigenvalues are exactly l_d, l_c
        for i, ep in enumerate(episodes):
            fit = dmd.exact_dmd(ep, 2)
            expected = np.array([truth.lambda_d[i], truth.lambda_c[i]])
            assert_same_set(fit.theta, expected, 1e-8)
            recon = dmd.varpro_modes(ep, fit.theta) @ vandermonde(fit.theta, ep.tau)
            assert np.linalg.norm(recon - ep.snapshots) < 1e-10

    def test_linear_system_recovery(self, rng):
        eig = np.array([0.95 * np.exp(0.3j), 0.9 * np.exp(-1.1j), 0.7])
        x, _ = linear_system_episode(rng, eig, p=6, tau=20)
        fit = dmd.exact_dmd(x, 3)
        assert_same_set(fit.theta, eig, 1e-8)
        assert dmd.f_dmd(x, fit.theta) < 1e-10

    def test_amplitudes_reproduce_first_snapshot(self, rng):
        eig = np.array([0.9, 0.5j])
        x, _ = linear_system_episode(rng, eig, p=4, tau=8)
        fit = dmd.exact_dmd(x, 2)
        np.testing.assert_allclose(fit.modes @ fit.amplitudes, x[:, 0], atol=1e-10)

    def test_rank_error_names_achievable_rank(self):
        x = np.outer(np.ones(4), 0.9 ** np.arange(6))
        with pytest.raises(RankDeficiencyError) as info:
            dmd.exact_dmd(x, 2)
        assert info.value.achievable_rank == 1

    def test_r_out_of_range(self):
        with pytest.raises(ValueError):
            dmd.exact_dmd(np.ones((2, 3)), 3)


class TestVarpro:
    def test_exact_rank_one_model(self):
        w = np.array([1.0, -2.0, 0.5])
        theta = 0.8 * np.exp(0.4j)
        x = np.outer(w, [1, theta, theta**2])
        np.testing.assert_allclose(dmd.varpro_modes(x, [theta])[:, 0], w, atol=1e-12)

    def test_interpolation_case(self, rng):
        x = rng.standard_normal((3, 4))
        theta = random_theta(rng, 4)
        w = dmd.varpro_modes(x, theta)
        np.testing.assert_allclose(w, x @ np.linalg.inv(vandermonde(theta, 4)), atol=1e-10)
        assert dmd.f_dmd(x, theta) < 1e-20

    def test_optimality_under_perturbation(self, rng):
        x = rng.standard_normal((4, 9))
        theta = random_theta(rng, 2)
        v = vandermonde(theta, 9)
        w = dmd.varpro_modes(x, theta)
        best = np.linalg.norm(x - w @ v)
        for _ in range(100):
            e = 1e-3 * (rng.standard_normal(w.shape) + 1j * rng.standard_normal(w.shape))
            assert np.linalg.norm(x - (w + e) @ v) >= best


class TestFDmd:
    def test_zero_at_exact_model(self):
        episodes, truth = gen_synthetic(
            SynthConfig(n=2, tau=20, image_side=3, noise_sd=0.0, complex_output=True), return_truth=True
        )
        theta = [truth.lambda_d[0], truth.lambda_c[0]]
        assert dmd.f_dmd(episodes[0], theta) < 1e-12

    def test_column_least_squares_oracle(self, rng):
        x = rng.standard_normal((4, 8))
        theta = random_theta(rng, 2)
        v = vandermonde(theta, 8)
        # oracle: best W row by row via lstsq on V^T, then per-column residuals
        w = np.linalg.lstsq(v.T, x.T.astype(complex), rcond=None)[0].T
        resid = sum(np.linalg.norm(x[:, t] - w @ v[:, t]) ** 2 for t in range(8))
        assert abs(dmd.f_dmd(x, theta) - resid / 8) < 1e-12

    def test_permutation_invariant(self, rng):
        x = rng.standard_normal((5, 10))
        theta = random_theta(rng, 3)
        assert abs(dmd.f_dmd(x, theta) - dmd.f_dmd(x, theta[[2, 0, 1]])) < 1e-12

    def test_nonnegative(self, rng):
        for _ in range(10):
            assert dmd.f_dmd(rng.standard_normal((3, 6)), random_theta(rng, 2)) >= 0


class TestFDmdGrad:
    def test_stationary_at_exact_model(self):
        episodes, truth = gen_synthetic(
            SynthConfig(n=2, tau=20, image_side=3, noise_sd=0.0, complex_output=True), return_truth=True
        )
        theta = [truth.lambda_d[0], truth.lambda_c[0]]
        assert np.max(np.abs(dmd.f_dmd_grad(episodes[0], theta))) < 1e-8

    def test_interpolating_is_zero(self, rng):
        x = rng.standard_normal((3, 3))
        theta = random_theta(rng, 3)
        assert np.max(np.abs(dmd.f_dmd_grad(x, theta))) < 1e-10
        fd = wirtinger_fd(lambda t: dmd.f_dmd(x, t), theta)
        assert np.max(np.abs(fd)) < 1e-6

    @pytest.mark.parametrize("seed", range(20))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((5, 10))
        theta = random_theta(rng, 2)
        fd = wirtinger_fd(lambda t: dmd.f_dmd(x, t), theta)
        assert rel_err(dmd.f_dmd_grad(x, theta), fd) <= 1e-5


class TestReconstruct:
    def test_exact_model(self):
        w = np.array([[1.0, 0.0], [0.5, 1.0], [0.0, 2.0]])
        theta = np.array([0.9, 0.5])
        x = w @ vandermonde(theta, 6).real
        np.testing.assert_allclose(dmd.reconstruct(x, theta), x, atol=1e-10)

    def test_constant_mode_is_time_mean(self, rng):
        x = rng.standard_normal((3, 7))
        recon = dmd.reconstruct(x, [1.0])
        np.testing.assert_allclose(recon, np.repeat(x.mean(axis=1, keepdims=True), 7, axis=1), atol=1e-12)

    def test_residue_reported(self, rng):
        x = rng.standard_normal((3, 7))
        _, residue = dmd.reconstruct(x, [0.9 * np.exp(0.7j)], return_residue=True)
        assert residue > 0


class TestTemporalProfile:
    def test_constant(self):
        fit = dmd.DmdFit(np.array([1.0 + 0j]), np.ones((2, 1)), np.array([1.0 + 0j]))
        np.testing.assert_allclose(dmd.temporal_profile(fit, None, 0, 5), np.ones(5))

    def test_unit_circle(self):
        fit = dmd.DmdFit(np.array([np.exp(0.3j)]), np.ones((2, 1)), np.array([1.0 + 0j]))
        np.testing.assert_allclose(np.abs(dmd.temporal_profile(fit, None, 0, 50)), 1.0, rtol=1e-12)

    def test_decay(self):
        fit = dmd.DmdFit(np.array([0.9 * np.exp(1.1j)]), np.ones((2, 1)), np.array([1.0 + 0j]))
        prof = np.abs(dmd.temporal_profile(fit, None, 0, 30))
        np.testing.assert_allclose(prof, 0.9 ** np.arange(30), rtol=1e-12)


class TestSeparation:
    def test_nudges_coincident_pair(self):
        theta, nudges = dmd.separate_thetas([0.5, 0.5, 0.9])
        assert nudges == 1
        assert abs(theta[0] - theta[1]) >= dmd.DISTINCT_DELTA * (1 - 1e-9)

    def test_leaves_distinct_untouched(self):
        theta, nudges = dmd.separate_thetas([0.1, 0.2j])
        assert nudges == 0
        np.testing.assert_array_equal(theta, [0.1, 0.2j])
