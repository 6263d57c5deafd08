"""
Unit tests for the masks module.

This module contains tests for magnitude pruning, mask bookkeeping and
random re-initialisation.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iskra.core.layers import Initializer, Linear, Module, PrunableParam
from iskra.exceptions import CheckpointError, ConfigurationError, SaturationError
from iskra.pruning.masks import (
    WeightMask,
    expected_sparsity,
    global_magnitude_mask,
    magnitude_prune,
    random_reinit,
    simulate_alive_counts,
)


def named(values, name="w", prunable=True) -> PrunableParam:
    return PrunableParam(np.asarray(values, dtype=np.float32), prunable, name=name)


class Pair(Module):
    def __init__(self, rng):
        self.a = Linear(4, 3, rng)
        self.b = Linear(3, 2, rng)


class TestMagnitudePrune:
    """Tests for magnitude_prune()."""

    def test_removes_smallest(self):
        """Test that the smallest magnitude goes first."""
        w = named([0.5, -0.1, 0.3, -0.7])
        mask = magnitude_prune([w], 0.25)
        np.testing.assert_array_equal(mask.masks["w"], [True, False, True, True])
        np.testing.assert_array_equal(w.data, [0.5, 0.0, 0.3, -0.7])

    def test_global_pools_tensors(self):
        """Test that global ranking may empty one tensor more than another."""
        small = named([0.01, 0.02], "small")
        large = named([1.0, 2.0], "large")
        mask = magnitude_prune([small, large], 0.5)
        assert mask.masks["small"].sum() == 0
        assert mask.masks["large"].sum() == 2

    def test_per_layer_scope(self):
        """Test that per-layer ranking prunes each tensor separately."""
        small = named([0.01, 0.02], "small")
        large = named([1.0, 2.0], "large")
        mask = magnitude_prune([small, large], 0.5, scope="per_layer")
        np.testing.assert_array_equal(mask.masks["small"], [False, True])
        np.testing.assert_array_equal(mask.masks["large"], [False, True])

    def test_skips_non_prunable(self):
        """Test that non-prunable parameters are untouched."""
        bias = named([0.0, 0.0], "bias", prunable=False)
        w = named([1.0, 2.0, 3.0, 4.0])
        mask = magnitude_prune([bias, w], 0.5)
        assert list(mask.masks) == ["w"]
        assert bias.mask is None

    def test_only_alive_weights_counted(self):
        """Test that the fraction applies to alive weights."""
        w = named([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
        magnitude_prune([w], 0.5)
        mask = magnitude_prune([w], 0.5)
        assert mask.alive == 2
        np.testing.assert_array_equal(np.flatnonzero(mask.masks["w"]), [6, 7])

    def test_ties_broken_by_position(self):
        """Test that equal magnitudes are removed in index order."""
        w = named([1.0, 1.0, 1.0, 1.0])
        mask = magnitude_prune([w], 0.5)
        np.testing.assert_array_equal(mask.masks["w"], [False, False, True, True])

    def test_module_input(self, rng):
        """Test pruning a module prunes its weights only."""
        model = Pair(rng)
        mask = magnitude_prune(model, 0.25)
        assert set(mask.masks) == {"a.weight", "b.weight"}
        assert mask.total == 18
        assert mask.alive == 18 - 4

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.5])
    def test_invalid_fraction(self, p):
        """Test that p outside (0, 1) raises ConfigurationError."""
        with pytest.raises(ConfigurationError):
            magnitude_prune([named([1.0, 2.0])], p)

    def test_invalid_scope(self):
        """Test that an unknown scope raises ConfigurationError."""
        with pytest.raises(ConfigurationError):
            magnitude_prune([named([1.0, 2.0])], 0.5, scope="per_head")

    def test_saturation(self):
        """Test that pruning an empty network raises SaturationError."""
        w = named([1.0, 2.0])
        w.set_mask([False, False])
        with pytest.raises(SaturationError):
            magnitude_prune([w], 0.5)

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(0, 2**16),
        p=st.floats(0.05, 0.9),
        rounds=st.integers(1, 4),
    )
    def test_masks_nested_and_counted(self, seed, p, rounds):
        """Test nesting and alive counts over repeated rounds."""
        gen = np.random.default_rng(seed)
        w = named(gen.normal(size=40))
        previous = WeightMask.from_params([w])
        expected = simulate_alive_counts(40, p, rounds)
        for k in range(1, rounds + 1):
            mask = magnitude_prune([w], p)
            assert mask.is_nested_in(previous)
            assert mask.alive == expected[k]
            previous = mask


class TestWeightMask:
    """Tests for WeightMask bookkeeping."""

    def test_from_params_defaults_to_ones(self):
        """Test that unmasked parameters give all-ones masks."""
        mask = WeightMask.from_params([named([1.0, 2.0, 3.0])])
        assert mask.alive == 3
        assert mask.sparsity == 0.0

    def test_from_params_names_unnamed(self):
        """Test that unnamed parameters get distinct positional keys."""
        first = PrunableParam(np.ones(3), prunable=True)
        second = PrunableParam(np.ones(2), prunable=True)
        mask = WeightMask.from_params([first, second])
        assert sorted(mask.masks) == ["param0", "param1"]
        assert mask.total == 5

    def test_from_params_duplicate_names(self):
        """Test that colliding names raise ConfigurationError."""
        with pytest.raises(ConfigurationError) as exc_info:
            WeightMask.from_params([named([1.0]), named([2.0, 3.0])])
        assert exc_info.value.field == "params"

    def test_hamming_distance(self):
        """Test the normalised disagreement."""
        a = WeightMask({"w": np.array([True, True, False, False])})
        b = WeightMask({"w": np.array([True, False, False, True])})
        assert a.hamming_distance(b) == 0.5

    def test_incompatible_masks(self):
        """Test that different names raise CheckpointError."""
        a = WeightMask({"w": np.ones(2, dtype=bool)})
        b = WeightMask({"v": np.ones(2, dtype=bool)})
        with pytest.raises(CheckpointError):
            a.is_nested_in(b)

    def test_shape_drift(self):
        """Test that different shapes raise CheckpointError."""
        a = WeightMask({"w": np.ones(2, dtype=bool)})
        b = WeightMask({"w": np.ones(3, dtype=bool)})
        with pytest.raises(CheckpointError):
            a.hamming_distance(b)

    def test_apply_unknown_name(self):
        """Test that masks for unknown parameters raise CheckpointError."""
        mask = WeightMask({"missing": np.ones(2, dtype=bool)})
        with pytest.raises(CheckpointError):
            mask.apply([named([1.0, 2.0])])

    def test_copy_is_independent(self):
        """Test that copies do not share arrays."""
        mask = WeightMask({"w": np.ones(2, dtype=bool)})
        clone = mask.copy()
        clone.masks["w"][0] = False
        assert mask.alive == 2


class TestGlobalMagnitudeMask:
    """Tests for global_magnitude_mask()."""

    def test_keeps_largest(self):
        """Test the one-shot mask."""
        weights = {"a": np.array([0.1, -3.0]), "b": np.array([[2.0, 0.2]])}
        mask = global_magnitude_mask(weights, 2)
        np.testing.assert_array_equal(mask.masks["a"], [False, True])
        np.testing.assert_array_equal(mask.masks["b"], [[True, False]])

    def test_decreasing_counts_are_nested(self, rng):
        """Test nesting across target counts."""
        weights = {"a": rng.normal(size=20), "b": rng.normal(size=(3, 4))}
        wide = global_magnitude_mask(weights, 24)
        narrow = global_magnitude_mask(weights, 10)
        assert narrow.is_nested_in(wide)

    def test_invalid_count(self):
        """Test that a count beyond the total raises ConfigurationError."""
        with pytest.raises(ConfigurationError):
            global_magnitude_mask({"a": np.zeros(3)}, 4)

    def test_within_ranks_alive_only(self):
        """Test that weights dead in the enclosing mask stay dead."""
        within = WeightMask({"a": np.array([False, True, True, True])})
        weights = {"a": np.array([9.0, 1.0, 2.0, 3.0])}
        mask = global_magnitude_mask(weights, 2, within=within)
        np.testing.assert_array_equal(mask.masks["a"], [False, False, True, True])
        assert mask.is_nested_in(within)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**16), alive=st.integers(0, 20))
    def test_within_is_nested(self, seed, alive):
        """Test nesting for unrelated weights at any count."""
        rng = np.random.default_rng(seed)
        within = global_magnitude_mask({"a": rng.normal(size=(4, 6))}, 20)
        mask = global_magnitude_mask(
            {"a": rng.normal(size=(4, 6))}, alive, within=within
        )
        assert mask.alive == alive
        assert mask.is_nested_in(within)

    def test_within_count_too_large(self):
        """Test that more survivors than the enclosing mask raises."""
        within = WeightMask({"a": np.array([True, False, False])})
        with pytest.raises(ConfigurationError):
            global_magnitude_mask({"a": np.ones(3)}, 2, within=within)

    def test_within_name_mismatch(self):
        """Test that a mask over other parameters raises CheckpointError."""
        within = WeightMask({"b": np.ones(3, dtype=bool)})
        with pytest.raises(CheckpointError):
            global_magnitude_mask({"a": np.ones(3)}, 1, within=within)


class TestRandomReinit:
    """Tests for random_reinit()."""

    def test_redraws_and_keeps_mask(self, rng):
        """Test fresh values with pruned weights at zero."""
        w = PrunableParam(
            np.ones(6), True, Initializer("uniform", bound=0.5), name="w"
        )
        mask = magnitude_prune([w], 0.5)
        random_reinit([w], mask, rng)
        assert np.all(w.data[~mask.masks["w"]] == 0.0)
        assert np.all(np.abs(w.data) <= 0.5)
        assert not np.all(w.data[mask.masks["w"]] == 1.0)

    def test_module_constant_init(self, rng):
        """Test that biases are redrawn from their constant initializer."""
        model = Pair(rng)
        model.a.bias.data[:] = 3.0
        random_reinit(model, None, rng)
        np.testing.assert_array_equal(model.a.bias.data, 0.0)


class TestAnalytics:
    """Tests for expected_sparsity() and simulate_alive_counts()."""

    def test_expected_sparsity(self):
        """Test 1 - (1 - p)^k."""
        assert expected_sparsity(0.25, 2) == pytest.approx(0.4375)
        assert expected_sparsity(0.25, 0) == 0.0

    def test_expected_sparsity_negative_rounds(self):
        """Test that a negative round count raises."""
        with pytest.raises(ConfigurationError):
            expected_sparsity(0.25, -1)

    def test_simulated_counts(self):
        """Test floor-based removal per round."""
        assert simulate_alive_counts(16, 0.25, 2) == [16, 12, 9]
        assert simulate_alive_counts(12, 0.25, 1) == [12, 9]
