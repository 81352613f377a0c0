import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from miplgp.kernels import MaternKernel, pairwise_distances


def matern_via_bessel(dist, nu, lengthscale=1.0):
    """Reference Matern value from the modified-Bessel form, any nu > 0."""
    t = math.sqrt(2.0 * nu) * dist / lengthscale
    if t == 0.0:
        return 1.0
    return (2.0 ** (1.0 - nu) / gamma_fn(nu)) * t**nu * kv(nu, t)


class TestClosedForms:
    @pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
    def test_matches_bessel_reference(self, nu):
        kernel = MaternKernel(nu=nu)
        for dist in (0.05, 0.3, 1.0, 2.0, 7.5):
            expected = matern_via_bessel(dist, nu)
            got = kernel(np.array([0.0]), np.array([dist]))
            assert got == pytest.approx(expected, abs=1e-10)

    def test_unit_distance_values(self):
        # nu=0.5 at d=1: e^{-1}; nu=2.5 at d=1: (1+sqrt5+5/3)e^{-sqrt5}
        assert MaternKernel(nu=0.5)(np.zeros(1), np.ones(1)) == pytest.approx(
            0.36787944117144233, abs=1e-12
        )
        expected = (1.0 + math.sqrt(5.0) + 5.0 / 3.0) * math.exp(-math.sqrt(5.0))
        assert expected == pytest.approx(matern_via_bessel(1.0, 2.5), abs=1e-12)
        assert MaternKernel(nu=2.5)(np.zeros(1), np.ones(1)) == pytest.approx(
            expected, abs=1e-12
        )

    def test_zero_distance_gives_outputscale(self):
        x = np.array([1.0, -2.0, 3.0])
        for nu in (0.5, 1.5, 2.5):
            assert MaternKernel(nu=nu)(x, x) == 1.0
        scaled = MaternKernel(nu=2.5, log_outputscale=math.log(4.0))
        assert scaled(x, x) == pytest.approx(4.0, rel=1e-14)

    def test_lengthscale_stretches_distance(self):
        k_wide = MaternKernel(nu=1.5, log_lengthscale=math.log(2.0))
        k_unit = MaternKernel(nu=1.5)
        assert k_wide(np.zeros(1), np.array([2.0])) == pytest.approx(
            k_unit(np.zeros(1), np.array([1.0])), rel=1e-14
        )

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        x, z = rng.normal(size=3), rng.normal(size=3)
        kernel = MaternKernel(nu=2.5)
        assert kernel(x, z) == kernel(z, x)

    def test_decay_in_distance(self):
        dists = np.linspace(0.0, 10.0, 200)
        for nu in (0.5, 1.5, 2.5):
            values = MaternKernel(nu=nu).value_from_dists(dists)
            assert np.all(np.diff(values) <= 0)

    def test_rejects_unsupported_nu(self):
        with pytest.raises(ValueError):
            MaternKernel(nu=2.0)

    def test_rejects_non_finite_params(self):
        with pytest.raises(ValueError):
            MaternKernel(log_lengthscale=np.inf)

    def test_rejects_dim_mismatch(self):
        with pytest.raises(ValueError):
            MaternKernel()(np.zeros(2), np.zeros(3))


class TestGram:
    def test_single_point(self):
        gram = MaternKernel(log_outputscale=math.log(2.5)).gram(np.zeros((1, 3)))
        np.testing.assert_allclose(gram, [[2.5]], rtol=1e-14)

    def test_diagonal_is_exactly_outputscale(self):
        rng = np.random.default_rng(6)
        gram = MaternKernel().gram(rng.normal(size=(20, 4)))
        assert np.all(np.diag(gram) == 1.0)

    def test_symmetric_exactly(self):
        rng = np.random.default_rng(7)
        gram = MaternKernel(nu=1.5).gram(rng.normal(size=(15, 3)))
        assert np.array_equal(gram, gram.T)

    def test_duplicated_rows(self):
        X = np.array([[1.0, 2.0], [1.0, 2.0], [3.0, 4.0]])
        gram = MaternKernel().gram(X)
        assert gram[0, 1] == 1.0

    def test_jittered_gram_factorizes(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(100, 5))
        for nu in (0.5, 1.5, 2.5):
            gram = MaternKernel(nu=nu).gram(X)
            sla.cholesky(gram + 1e-6 * np.eye(100), lower=True)  # must not raise

    def test_cross_gram_matches_gram(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(10, 3))
        kernel = MaternKernel(nu=2.5)
        np.testing.assert_allclose(kernel.cross_gram(X, X), kernel.gram(X), atol=1e-14)

    def test_cross_gram_shape_and_entries(self):
        rng = np.random.default_rng(10)
        Xs, X = rng.normal(size=(4, 3)), rng.normal(size=(7, 3))
        kernel = MaternKernel()
        cross = kernel.cross_gram(Xs, X)
        assert cross.shape == (4, 7)
        assert cross[2, 5] == pytest.approx(kernel(Xs[2], X[5]), rel=1e-14)

    def test_cross_gram_rejects_dim_mismatch(self):
        with pytest.raises(ValueError):
            MaternKernel().cross_gram(np.zeros((2, 3)), np.zeros((2, 4)))

    def test_pairwise_distances_zero_diagonal(self):
        rng = np.random.default_rng(11)
        dists = pairwise_distances(rng.normal(size=(12, 4)))
        assert np.all(np.diag(dists) == 0.0)
        assert np.array_equal(dists, dists.T)


class TestGradients:
    def finite_difference(self, kernel, name, dists, h=1e-6):
        up = MaternKernel(**{**kernel_params(kernel), name: getattr(kernel, name) + h})
        down = MaternKernel(**{**kernel_params(kernel), name: getattr(kernel, name) - h})
        return (up.value_from_dists(dists) - down.value_from_dists(dists)) / (2.0 * h)

    @pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
    def test_lengthscale_gradient_matches_fd(self, nu):
        kernel = MaternKernel(
            nu=nu, log_lengthscale=0.3, log_outputscale=-0.2,
            train_lengthscale=True, train_outputscale=True,
        )
        dists = np.array([[0.0, 0.7, 2.3], [0.7, 0.0, 1.1], [2.3, 1.1, 0.0]])
        grads = kernel.grads_from_dists(dists)
        fd = self.finite_difference(kernel, "log_lengthscale", dists)
        np.testing.assert_allclose(grads["log_lengthscale"], fd, rtol=1e-5, atol=1e-10)

    def test_outputscale_gradient_is_kernel_value(self):
        kernel = MaternKernel(nu=2.5, log_outputscale=0.4, train_outputscale=True)
        dists = np.array([[0.0, 1.5], [1.5, 0.0]])
        grads = kernel.grads_from_dists(dists)
        np.testing.assert_allclose(
            grads["log_outputscale"], kernel.value_from_dists(dists), rtol=1e-14
        )

    def test_lengthscale_gradient_zero_at_origin(self):
        kernel = MaternKernel(nu=1.5, train_lengthscale=True)
        grads = kernel.grads_from_dists(np.array([[0.0]]))
        assert grads["log_lengthscale"][0, 0] == 0.0

    def test_frozen_parameters_have_no_gradients(self):
        grads = MaternKernel().grads_from_dists(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert grads == {}

    def test_trainable_names_follow_flags(self):
        assert MaternKernel().trainable_names() == ()
        assert MaternKernel(train_lengthscale=True).trainable_names() == ("log_lengthscale",)
        both = MaternKernel(train_lengthscale=True, train_outputscale=True)
        assert both.trainable_names() == ("log_lengthscale", "log_outputscale")


class TestWithUpdates:
    def test_adds_deltas_in_log_space(self):
        kernel = MaternKernel(log_lengthscale=0.5, log_outputscale=-1.0)
        updated = kernel.with_updates({"log_lengthscale": 0.25, "log_outputscale": 1.0})
        assert updated.log_lengthscale == pytest.approx(0.75)
        assert updated.log_outputscale == pytest.approx(0.0)
        assert kernel.log_lengthscale == 0.5  # original untouched

    def test_rejects_unknown_parameter(self):
        with pytest.raises(ValueError):
            MaternKernel().with_updates({"nu": 1.0})

    def test_positivity_preserved(self):
        kernel = MaternKernel().with_updates({"log_lengthscale": -50.0})
        assert kernel.lengthscale > 0


def kernel_params(kernel):
    return {
        "nu": kernel.nu,
        "log_lengthscale": kernel.log_lengthscale,
        "log_outputscale": kernel.log_outputscale,
        "train_lengthscale": kernel.train_lengthscale,
        "train_outputscale": kernel.train_outputscale,
    }
