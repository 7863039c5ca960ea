import math

import numpy as np
import pytest
from conftest import random_dataset, random_theta, rel_err

from modekit import dmd, kfd
from modekit import optimizer as opt
from modekit.dms_kernel import dms_basis
from modekit.workbench.synth import SynthConfig, gen_synthetic


def real_fd(func, vec, h=1e-6):
    out = np.zeros_like(vec)
    for k in range(vec.size):
        e = np.zeros_like(vec)
        e[k] = h
        out[k] = (func(vec + e) - func(vec - e)) / (2 * h)
    return out


def thetas_for(rng, dataset, r=2):
    return np.array([random_theta(rng, r) for _ in dataset])


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"r": 0}, {"r": 1, "alpha": -1}, {"r": 1, "epsilon": -1}, {"r": 1, "grad_tol": 0}, {"r": 1, "max_iters": -1}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            opt.FitConfig(**kwargs)


class TestPacking:
    def test_round_trip(self, rng):
        th = thetas_for(rng, range(3))
        np.testing.assert_array_equal(opt.unpack(opt.pack(th), th.shape), th)

    def test_wirtinger_to_real_on_modulus_squared(self, rng):
        th = thetas_for(rng, range(2))
        # f = sum |theta|^2: df/dtheta = conj(theta), real gradient = 2 [Re; Im]
        np.testing.assert_allclose(opt.wirtinger_to_real(th.conj()), 2 * opt.pack(th))


class TestObjective:
    def test_composition(self, rng):
        data = random_dataset(rng)
        th = thetas_for(rng, data)
        cfg = opt.FitConfig(r=2, alpha=0.7, epsilon=1e-3)
        total, f_dmd_mean, f_kfd_value = opt.objective(data, th, cfg)
        expected_dmd = np.mean([dmd.f_dmd(ep, t) for ep, t in zip(data, th)])
        gram = kfd.assemble_gram([dms_basis(ep, t) for ep, t in zip(data, th)], [ep.label for ep in data], False)
        assert f_dmd_mean == pytest.approx(expected_dmd, rel=1e-12)
        assert f_kfd_value == pytest.approx(kfd.f_kfd(gram), rel=1e-12)
        assert total == pytest.approx(expected_dmd / (f_kfd_value**0.7 + 1e-3), rel=1e-12)

    def test_alpha_zero_ignores_labels(self, rng):
        data = random_dataset(rng)
        th = thetas_for(rng, data)
        cfg = opt.FitConfig(r=2, alpha=0.0, epsilon=0.5)
        total, f_dmd_mean, _ = opt.objective(data, th, cfg)
        assert total == f_dmd_mean / 1.5

    def test_zero_denominator(self, rng):
        data = random_dataset(rng, n=2)
        th = thetas_for(rng, data)
        data[1] = dmd.Episode(data[0].snapshots, 2)
        th[1] = th[0]
        with pytest.raises(opt.ObjectiveError):
            opt.objective(data, th, opt.FitConfig(r=2, alpha=1.0, epsilon=0.0))

    def test_shape_checked(self, rng):
        data = random_dataset(rng)
        with pytest.raises(ValueError):
            opt.objective(data, np.ones((3, 2)), opt.FitConfig(r=2))


class TestGradient:
    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.6, 1.0])
    @pytest.mark.parametrize("seed", range(3))
    def test_real_finite_differences(self, alpha, seed):
        rng = np.random.default_rng(40 + seed)
        data = random_dataset(rng)
        th = thetas_for(rng, data)
        cfg = opt.FitConfig(r=2, alpha=alpha)
        analytic = opt.gradient(data, th, cfg)
        fd = real_fd(lambda v: opt.objective(data, opt.unpack(v, th.shape), cfg)[0], opt.pack(th))
        assert rel_err(analytic, fd) <= 1e-5

    def test_alpha_zero_is_scaled_dmd_gradient(self, rng):
        data = random_dataset(rng)
        th = thetas_for(rng, data)
        cfg = opt.FitConfig(r=2, alpha=0.0, epsilon=1e-8)
        deriv = np.stack([dmd.f_dmd_grad(ep, t) for ep, t in zip(data, th)]) / len(data) / (1 + 1e-8)
        np.testing.assert_allclose(opt.gradient(data, th, cfg), opt.wirtinger_to_real(deriv), rtol=1e-10)


class TestFit:
    def test_max_iters_zero_returns_init(self, rng):
        data = random_dataset(rng)
        res = opt.fit(data, opt.FitConfig(r=2, alpha=0.5, max_iters=0))
        np.testing.assert_array_equal(res.thetas, res.init_thetas)
        assert not res.converged
        assert res.reason == "max_iters"
        assert res.objective_trace.shape == (1, 3)

    def test_trace_monotone(self, rng):
        data = random_dataset(rng)
        res = opt.fit(data, opt.FitConfig(r=2, alpha=0.6, max_iters=40))
        totals = res.objective_trace[:, 0]
        assert np.all(np.diff(totals) <= 0)
        assert res.iterations == len(totals) - 1

    def test_deterministic(self, rng):
        data = random_dataset(rng)
        cfg = opt.FitConfig(r=2, alpha=0.4, max_iters=25)
        a, b = opt.fit(data, cfg), opt.fit(data, cfg)
        np.testing.assert_array_equal(a.thetas, b.thetas)
        np.testing.assert_array_equal(a.objective_trace, b.objective_trace)

    def test_alpha_zero_matches_optimized_dmd(self, rng):
        data = random_dataset(rng)
        cfg = opt.FitConfig(r=2, alpha=0.0, max_iters=30)
        a, b = opt.fit(data, cfg), opt.fit_optimized_dmd(data, cfg)
        np.testing.assert_array_equal(a.thetas, b.thetas)
        np.testing.assert_array_equal(a.objective_trace, b.objective_trace)

    def test_noise_free_recovery(self):
        data, truth = gen_synthetic(
            SynthConfig(n=2, tau=25, image_side=4, noise_sd=0.0, complex_output=True, seed=5), return_truth=True
        )
        true = np.array([[truth.lambda_d[i], truth.lambda_c[i]] for i in range(2)])
        rng = np.random.default_rng(0)
        init = true + 0.02 * (rng.standard_normal(true.shape) + 1j * rng.standard_normal(true.shape))
        res = opt.fit_optimized_dmd(data, opt.FitConfig(r=2, max_iters=300, grad_tol=1e-12), init=init)
        assert res.final[1] < 1e-14
        for got, want in zip(res.thetas, true):
            assert np.max(np.min(np.abs(got[:, None] - want[None, :]), axis=0)) < 1e-6

    def test_reduces_objective_from_exact_dmd(self, rng):
        data = random_dataset(rng)
        res = opt.fit(data, opt.FitConfig(r=2, alpha=1.0, max_iters=30))
        assert res.objective_trace[-1, 0] < res.objective_trace[0, 0]
        assert len(res.modes) == len(data) and res.modes[0].shape == (6, 2)

    def test_single_class_rejected(self, rng):
        data = random_dataset(rng, labels=[1, 1, 1])
        with pytest.raises(kfd.ConfigurationError):
            opt.fit(data, opt.FitConfig(r=1))

    def test_optimized_dmd_single_class_reports_nan(self, rng):
        data = random_dataset(rng, labels=[1, 1])
        res = opt.fit_optimized_dmd(data, opt.FitConfig(r=1, max_iters=3))
        assert math.isnan(res.final[2])

    def test_rank_too_large(self, rng):
        data = random_dataset(rng, p=3)
        with pytest.raises(ValueError):
            opt.fit(data, opt.FitConfig(r=4))

    def test_mixed_dimensions(self, rng):
        data = random_dataset(rng)
        data[0] = dmd.Episode(np.ones((5, 12)), 1)
        with pytest.raises(ValueError):
            opt.fit(data, opt.FitConfig(r=1))

    def test_coincident_init_is_separated(self, rng):
        data = random_dataset(rng)
        init = np.full((4, 2), 0.9 + 0j)
        res = opt.fit(data, opt.FitConfig(r=2, alpha=0.5, max_iters=5), init=init)
        assert res.diagnostics["nudges"] >= 4
        assert np.all(np.isfinite(res.objective_trace))


class TestMinimize:
    def test_points_without_gradient_are_rejected(self):
        """Toy objective sum |theta|^2 whose derivative is undefined for |theta| < 1.5."""

        def value_only(th):
            return float(np.sum(np.abs(th) ** 2))

        def value_and_deriv(th):
            if np.any(np.abs(th) < 1.5):
                raise ValueError("undefined here")
            v = value_only(th)
            return (v, v, math.nan), th.conj()

        cfg = opt.FitConfig(r=1, max_iters=50)
        x, trace, _, reason, _, diag = opt.minimize(
            value_and_deriv, value_only, opt.pack(np.array([[2.0 + 0j]])), (1, 1), cfg
        )
        assert diag["rejected_points"] > 0
        assert np.all(np.diff(trace[:, 0]) <= 0)
        assert abs(opt.unpack(x, (1, 1))[0, 0]) >= 1.5
        assert reason in {"line_search", "step"}
