"""
Unit tests for the neurons module.

This module contains tests for the spike nonlinearity, the surrogate
gradients and the leaky integrate-and-fire dynamics.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iskra.core.autograd import Tensor, numerical_gradient
from iskra.core.neurons import (
    LIFNode,
    MembraneState,
    ResetMode,
    SpikeTensor,
    SurrogateConfig,
    SurrogateKind,
    heaviside_spike,
    is_binary,
    lif_step,
    spike_fn,
    surrogate_derivative,
    surrogate_primitive,
    validate_neuron_constants,
)
from iskra.exceptions import ConfigurationError, DimensionError

ALL_SURROGATES = [SurrogateConfig(kind) for kind in SurrogateKind]


class TestHeaviside:
    """Tests for heaviside_spike()."""

    def test_threshold_is_inclusive(self):
        """Test that zero maps to a spike."""
        np.testing.assert_array_equal(heaviside_spike([-1.0, 0.0, 2.0]), [0, 1, 1])

    def test_integer_input_gives_float32(self):
        """Test the dtype of non-floating input."""
        assert heaviside_spike([1, -1]).dtype == np.float32

    @given(arrays(np.float64, 8, elements=st.floats(-1e6, 1e6)))
    def test_always_binary(self, x):
        """Test that the output is binary for any finite input."""
        assert is_binary(heaviside_spike(x))


class TestSurrogateConfig:
    """Tests for SurrogateConfig validation."""

    def test_defaults(self):
        """Test the default sigmoid surrogate."""
        cfg = SurrogateConfig()
        assert cfg.kind is SurrogateKind.SIGMOID
        assert cfg.width == 4.0

    def test_kind_from_string(self):
        """Test that string kinds are converted."""
        assert SurrogateConfig("arctan").kind is SurrogateKind.ARCTAN

    def test_unknown_kind(self):
        """Test that an unknown kind raises ConfigurationError."""
        with pytest.raises(ConfigurationError):
            SurrogateConfig("triangle")

    @pytest.mark.parametrize("width", [0.0, -1.0, float("nan")])
    def test_bad_width(self, width):
        """Test that non-positive widths are rejected."""
        with pytest.raises(ConfigurationError) as exc_info:
            SurrogateConfig(width=width)
        assert exc_info.value.field == "width"


class TestSurrogateDerivative:
    """Tests for surrogate_derivative() and surrogate_primitive()."""

    @pytest.mark.parametrize("cfg", ALL_SURROGATES)
    def test_peak_at_zero_and_symmetric(self, cfg):
        """Test symmetry and the maximum at the threshold."""
        x = np.linspace(-2, 2, 41)
        d = surrogate_derivative(x, cfg)
        np.testing.assert_allclose(d, d[::-1])
        assert d[20] == d.max()
        assert np.all(d >= 0)

    @pytest.mark.parametrize("cfg", ALL_SURROGATES)
    def test_integrates_to_one(self, cfg):
        """Test that the primitive climbs from 0 to 1."""
        x = np.array([-1e4, 1e4])
        low, high = surrogate_primitive(x, cfg)
        assert high - low == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize(
        "cfg", [SurrogateConfig("sigmoid"), SurrogateConfig("arctan")]
    )
    def test_matches_primitive(self, cfg):
        """Test that the derivative is the slope of the primitive."""
        x = np.linspace(-1, 1, 9)
        expected = numerical_gradient(
            lambda v: float(surrogate_primitive(v, cfg).sum()), x.copy(), eps=1e-6
        )
        np.testing.assert_allclose(surrogate_derivative(x, cfg), expected, atol=1e-6)

    def test_rejects_non_config(self):
        """Test that a plain number as config raises."""
        with pytest.raises(ConfigurationError):
            surrogate_derivative(np.zeros(2), 4.0)

    @pytest.mark.parametrize("kind", ["sigmoid", "arctan"])
    @pytest.mark.parametrize("width", [4.0, 8.0])
    def test_vanishes_far_from_threshold(self, kind, width):
        """Test the derivative at a hundred times the width."""
        cfg = SurrogateConfig(kind, width)
        x = np.array([-100.0 * width, 100.0 * width])
        assert np.all(surrogate_derivative(x, cfg) < 1e-6)

    def test_rectangular_zero_outside_window(self):
        """Test that the window surrogate is exactly zero beyond its edge."""
        cfg = SurrogateConfig("rectangular", 1.0)
        x = np.array([-10.0, -0.5, 0.5, 10.0])
        np.testing.assert_array_equal(surrogate_derivative(x, cfg), 0.0)
        assert surrogate_derivative(np.array([0.0]), cfg)[0] == 1.0


class TestSpikeFn:
    """Tests for the differentiable spike."""

    def test_forward_binary_backward_surrogate(self):
        """Test binary output with the surrogate as gradient."""
        cfg = SurrogateConfig()
        x = Tensor(np.array([-0.5, 0.0, 0.3]), requires_grad=True)
        out = spike_fn(x, cfg)
        np.testing.assert_array_equal(out.data, [0, 1, 1])
        out.sum().backward()
        np.testing.assert_allclose(x.grad, surrogate_derivative(x.data, cfg))


class TestNeuronConstants:
    """Tests for validate_neuron_constants()."""

    @pytest.mark.parametrize(
        "threshold,decay", [(0.0, 0.5), (-1.0, 0.5), (1.0, 0.0), (1.0, 1.5)]
    )
    def test_invalid(self, threshold, decay):
        """Test out-of-range constants."""
        with pytest.raises(ConfigurationError):
            validate_neuron_constants(threshold, decay)

    def test_decay_one_allowed(self):
        """Test that a non-leaky neuron is accepted."""
        validate_neuron_constants(1.0, 1.0)


class TestLifStep:
    """Tests for lif_step()."""

    def test_strong_input_fires_and_resets(self):
        """Test a supra-threshold input from rest."""
        state = MembraneState.zeros((1,))
        spikes, state = lif_step(state, np.float32([2.0]), SurrogateConfig())
        np.testing.assert_array_equal(spikes.data, [1.0])
        np.testing.assert_array_equal(state.potential.data, [0.0])

    def test_leaky_integration(self):
        """Test that sub-threshold inputs accumulate with decay."""
        state = MembraneState.zeros((1,))
        fired = []
        for _ in range(4):
            spikes, state = lif_step(state, np.float32([0.6]), SurrogateConfig())
            fired.append(float(spikes.data[0]))
        assert fired == [0.0, 0.0, 1.0, 0.0]
        assert state.potential.data[0] == pytest.approx(0.6)

    def test_soft_reset_keeps_residual(self):
        """Test that soft reset subtracts the threshold."""
        state = MembraneState.zeros((1,), reset_mode=ResetMode.SOFT_SUBTRACT)
        for _ in range(3):
            _, state = lif_step(state, np.float32([0.6]), SurrogateConfig())
        assert state.potential.data[0] == pytest.approx(0.05, abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(
        potential=arrays(np.float32, (6,), elements=st.floats(-4, 0.75, width=32)),
        decay=st.floats(0.05, 1.0),
    )
    def test_leak_never_grows_without_input(self, potential, decay):
        """Test that a silent membrane decays toward rest."""
        state = MembraneState(Tensor(potential), threshold=1.0, decay=decay)
        previous = np.abs(potential)
        for _ in range(8):
            spikes, state = lif_step(state, np.zeros(6, np.float32), SurrogateConfig())
            current = np.abs(state.potential.data)
            assert not np.any(spikes.data)
            assert np.all(current <= previous)
            previous = current

    def test_shape_mismatch(self):
        """Test that a mismatched input raises DimensionError."""
        with pytest.raises(DimensionError):
            lif_step(MembraneState.zeros((2,)), np.zeros(3), SurrogateConfig())

    def test_gradient_is_surrogate(self):
        """Test the gradient of one step with respect to its input."""
        cfg = SurrogateConfig()
        x = Tensor(np.array([0.8, 1.2]), requires_grad=True)
        spikes, _ = lif_step(MembraneState.zeros((2,), dtype=np.float64), x, cfg)
        spikes.sum().backward()
        np.testing.assert_allclose(x.grad, surrogate_derivative(x.data - 1.0, cfg))


class TestLIFNode:
    """Tests for the multi-step layer."""

    def test_output_shape(self):
        """Test that the time axis is preserved."""
        node = LIFNode()
        out = node(Tensor(np.ones((4, 2, 8), dtype=np.float32)))
        assert out.shape == (4, 2, 8)

    def test_membrane_resets_between_calls(self):
        """Test that repeated calls give identical spikes."""
        node = LIFNode()
        x = Tensor(np.full((3, 5), 0.6, dtype=np.float32))
        np.testing.assert_array_equal(node(x).data, node(x).data)

    @settings(max_examples=25, deadline=None)
    @given(arrays(np.float32, (3, 4), elements=st.floats(-5, 5, width=32)))
    def test_spikes_are_binary(self, x):
        """Test that any input produces binary spikes."""
        assert is_binary(LIFNode()(Tensor(x)).data)

    def test_invalid_decay(self):
        """Test that construction validates the constants."""
        with pytest.raises(ConfigurationError):
            LIFNode(decay=0.0)


class TestSpikeTensor:
    """Tests for the SpikeTensor wrapper."""

    def test_dimensions(self):
        """Test T, B, N and D accessors."""
        s = SpikeTensor(Tensor(np.zeros((2, 3, 4, 5))))
        assert (s.T, s.B, s.N, s.D) == (2, 3, 4, 5)

    def test_rejects_3d(self):
        """Test that a 3-D array raises DimensionError."""
        with pytest.raises(DimensionError):
            SpikeTensor(Tensor(np.zeros((2, 3, 4))))

    def test_rejects_non_binary(self):
        """Test that graded values raise ValueError."""
        with pytest.raises(ValueError):
            SpikeTensor(Tensor(np.full((1, 1, 1, 1), 0.5)))

    def test_from_unbatched(self):
        """Test wrapping a single image."""
        s = SpikeTensor.from_unbatched(np.ones((2, 4, 3)))
        assert s.data.shape == (2, 1, 4, 3)
