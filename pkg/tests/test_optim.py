import math

import numpy as np
import pytest

from miplgp.optim import AdamOptimizer, cosine_lr


class TestCosineLr:
    def test_step_zero_returns_base(self):
        assert cosine_lr(0, 500, 0.1) == 0.1

    def test_midpoint_is_half(self):
        assert cosine_lr(250, 500, 0.1) == pytest.approx(0.05, rel=1e-12)

    def test_last_step_of_long_run(self):
        # 0.1 * (1 + cos(pi * 499/500)) / 2 == 0.1 * sin^2(pi/1000)
        expected = 0.1 * math.sin(math.pi / 1000.0) ** 2
        got = cosine_lr(499, 500, 0.1)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(9.8696e-7, rel=1e-4)

    def test_final_step_is_zero(self):
        assert cosine_lr(500, 500, 0.1) == pytest.approx(0.0, abs=1e-18)

    def test_monotone_decay(self):
        values = [cosine_lr(t, 100, 0.1) for t in range(101)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_rejects_step_outside_range(self):
        with pytest.raises(ValueError):
            cosine_lr(-1, 10, 0.1)
        with pytest.raises(ValueError):
            cosine_lr(11, 10, 0.1)

    def test_rejects_bad_total(self):
        with pytest.raises(ValueError):
            cosine_lr(0, 0, 0.1)


class TestAdam:
    def test_zero_gradient_gives_zero_delta(self):
        adam = AdamOptimizer(3)
        delta = adam.step(np.zeros(3), lr=0.1)
        assert np.all(delta == 0.0)

    def test_first_step_opposes_gradient_sign(self):
        adam = AdamOptimizer(2)
        delta = adam.step(np.array([5.0, -0.01]), lr=0.1)
        assert delta[0] < 0 and delta[1] > 0

    def test_constant_gradient_unit_step(self):
        # Under a constant gradient the bias-corrected update magnitude is
        # ~lr regardless of the gradient's scale.
        for g in (1e-6, 1.0, 1e6):
            adam = AdamOptimizer(1)
            for _ in range(1000):
                delta = adam.step(np.array([g]), lr=0.05)
            assert 0.9 * 0.05 <= abs(delta[0]) <= 0.05 + 1e-12

    def test_step_counter_advances(self):
        adam = AdamOptimizer(1)
        adam.step(np.array([1.0]), lr=0.1)
        adam.step(np.array([1.0]), lr=0.1)
        assert adam.t == 2

    def test_rejects_shape_mismatch(self):
        adam = AdamOptimizer(2)
        with pytest.raises(ValueError):
            adam.step(np.zeros(3), lr=0.1)

    def test_rejects_non_finite_gradient(self):
        adam = AdamOptimizer(1)
        with pytest.raises(ValueError):
            adam.step(np.array([np.nan]), lr=0.1)

    def test_rejects_bad_betas(self):
        with pytest.raises(ValueError):
            AdamOptimizer(1, beta1=1.0)
        with pytest.raises(ValueError):
            AdamOptimizer(1, beta2=-0.1)

    def test_zero_params_is_allowed(self):
        # Frozen kernels have no trainable parameters; the optimizer still exists.
        adam = AdamOptimizer(0)
        delta = adam.step(np.zeros(0), lr=0.1)
        assert delta.shape == (0,)
