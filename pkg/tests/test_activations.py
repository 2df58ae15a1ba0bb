"""Tests of the activation families and their derivative convention."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from eoc_lab.activations import ActivationSpec


class TestPiecewiseValues:
    def test_clipped_relu_below_threshold(self):
        assert ActivationSpec.crelu(1.0, 1.0).evaluate(0.5) == 0.0

    def test_clipped_relu_saturates(self):
        assert ActivationSpec.crelu(1.0, 1.0).evaluate(2.5) == 1.0

    def test_soft_threshold_negative_branch(self):
        assert ActivationSpec.cst(1.0, 1.0).evaluate(-1.5) == -0.5

    def test_zero_maps_to_zero(self):
        for spec in (ActivationSpec.relu(), ActivationSpec.crelu(0.7, 1.3), ActivationSpec.cst(0.7, 1.3)):
            assert spec.evaluate(0.0) == 0.0

    def test_relu_matches_numpy(self, rng):
        x = rng.normal(size=1000)
        assert_allclose(ActivationSpec.relu().evaluate(x), np.maximum(x, 0.0))


class TestDerivative:
    def test_linear_segment(self):
        spec = ActivationSpec.crelu(1.0, 1.0)
        assert spec.derivative(1.5) == 1.0

    def test_clipped_region(self):
        spec = ActivationSpec.crelu(1.0, 1.0)
        assert spec.derivative(3.0) == 0.0

    def test_negative_linear_segment(self):
        assert ActivationSpec.cst(1.0, 1.0).derivative(-1.2) == 1.0

    def test_zero_at_kinks(self):
        crelu = ActivationSpec.crelu(1.0, 1.0)
        assert crelu.derivative(1.0) == 0.0
        assert crelu.derivative(2.0) == 0.0
        cst = ActivationSpec.cst(0.5, 1.5)
        for kink in cst.kinks():
            assert cst.derivative(kink) == 0.0
        assert ActivationSpec.relu().derivative(0.0) == 0.0

    def test_matches_finite_differences_away_from_kinks(self, rng):
        specs = [ActivationSpec.relu(), ActivationSpec.crelu(0.8, 1.4), ActivationSpec.cst(0.6, 0.9)]
        h = 1e-6
        for spec in specs:
            x = rng.uniform(-4.0, 4.0, size=4000)
            margin = np.min(np.abs(x[:, None] - np.array(spec.kinks())[None, :]), axis=1)
            x = x[margin > 1e-3]
            fd = (spec.evaluate(x + h) - spec.evaluate(x - h)) / (2.0 * h)
            assert_allclose(spec.derivative(x), fd, atol=1e-8)


class TestShapeProperties:
    def test_clipped_relu_bounded_and_monotone(self, rng):
        spec = ActivationSpec.crelu(0.9, 1.7)
        x = np.sort(rng.uniform(-6.0, 6.0, size=5000))
        y = spec.evaluate(x)
        assert np.all(np.abs(y) <= spec.m)
        assert np.all(np.diff(y) >= 0.0)

    def test_soft_threshold_odd(self, rng):
        spec = ActivationSpec.cst(0.8, 1.1)
        x = rng.uniform(-5.0, 5.0, size=5000)
        assert_allclose(spec.evaluate(-x), -spec.evaluate(x), atol=0.0)

    def test_sparsity_identity_monte_carlo(self):
        """P(output = 0) matches the Gaussian-law prediction within 3 SE."""
        cases = [
            (ActivationSpec.crelu(1.04, 1.2), 1.0),
            (ActivationSpec.crelu(0.84, 2.0), 2.0),
            (ActivationSpec.cst(1.44, 1.0), 1.0),
            (ActivationSpec.cst(0.84, 1.5), 0.5),
        ]
        n = 1_000_000
        for i, (spec, q) in enumerate(cases):
            rng = np.random.default_rng(500 + i)
            z = np.sqrt(q) * rng.standard_normal(n)
            frac = float(np.mean(spec.evaluate(z) == 0.0))
            p = spec.zero_probability(q)
            se = np.sqrt(p * (1.0 - p) / n)
            assert abs(frac - p) <= 3.0 * se


class TestSpecValidation:
    def test_relu_ignores_shape_parameters(self):
        spec = ActivationSpec("relu", 3.0, 7.0)
        assert spec.tau == 0.0 and spec.m == np.inf

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            ActivationSpec("crelu", -0.5, 1.0)
        with pytest.raises(ValueError):
            ActivationSpec("cst", 0.5, 0.0)
        with pytest.raises(ValueError):
            ActivationSpec("softplus", 0.5, 1.0)

    def test_json_roundtrip(self):
        for spec in (ActivationSpec.relu(), ActivationSpec.crelu(0.3, 2.0), ActivationSpec.cst(1.1, 0.4)):
            assert ActivationSpec.from_dict(spec.to_dict()) == spec
