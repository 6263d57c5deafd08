"""
Unit tests for the selection module.

This module contains tests for token scoring, keep decisions, decision
composition, the selector registry and decision trace export.
"""

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iskra.core.autograd import Tensor
from iskra.exceptions import ConfigurationError, DimensionError, UsageError
from iskra.selection.selector import (
    ANNEAL_END,
    ANNEAL_START,
    SELECTORS,
    RandomTokenSelector,
    SelectionMode,
    SelectorConfig,
    SpikingTokenSelector,
    TemperatureSchedule,
    TokenDecision,
    TokenScore,
    TokenScorer,
    build_selector,
    compose_decision,
    export_decision_trace,
    gumbel_temperature,
    keep_counts,
    keep_schedule,
    sample_keep_decision,
    score_tokens,
    temporal_gap,
)


def spikes(rng, shape=(2, 2, 8, 6)) -> Tensor:
    return Tensor((rng.random(shape) < 0.4).astype(np.float32))


class TestSelectorConfig:
    """Tests for SelectorConfig validation."""

    @pytest.mark.parametrize("rho", [0.0, 1.01])
    def test_rho_range(self, rho):
        """Test that rho outside (0, 1] is rejected."""
        with pytest.raises(ConfigurationError):
            SelectorConfig(rho=rho)

    def test_temperature_must_be_positive(self):
        """Test the temperature check."""
        with pytest.raises(ConfigurationError):
            SelectorConfig(gumbel_temperature=0.0)

    def test_schedule_from_string(self):
        """Test that schedule names are converted."""
        cfg = SelectorConfig(temperature_schedule="linear_anneal")
        assert cfg.temperature_schedule is TemperatureSchedule.LINEAR_ANNEAL

    def test_unknown_schedule(self):
        """Test that an unknown schedule is rejected."""
        with pytest.raises(ConfigurationError):
            SelectorConfig(temperature_schedule="cosine")

    def test_to_dict(self):
        """Test that the schedule is serialised by value."""
        assert SelectorConfig().to_dict()["temperature_schedule"] == "constant"


class TestGumbelTemperature:
    """Tests for gumbel_temperature()."""

    def test_constant(self):
        """Test that the constant schedule ignores the epoch."""
        cfg = SelectorConfig(gumbel_temperature=0.7)
        assert gumbel_temperature(cfg, 9, 10) == 0.7

    def test_linear_anneal_endpoints(self):
        """Test the anneal from its start to its end value."""
        cfg = SelectorConfig(temperature_schedule="linear_anneal")
        assert gumbel_temperature(cfg, 0, 10) == ANNEAL_START
        assert gumbel_temperature(cfg, 9, 10) == pytest.approx(ANNEAL_END)
        assert gumbel_temperature(cfg, 3, 7) == pytest.approx(2.75)

    def test_single_epoch(self):
        """Test the anneal with one epoch."""
        cfg = SelectorConfig(temperature_schedule="linear_anneal")
        assert gumbel_temperature(cfg, 0, 1) == ANNEAL_END


class TestScoring:
    """Tests for temporal_gap() and score_tokens()."""

    def test_temporal_gap_is_rate(self):
        """Test that the gap is the firing rate over time."""
        x = np.zeros((4, 1, 2, 3), dtype=np.float32)
        x[:2, 0, 1] = 1.0
        np.testing.assert_allclose(temporal_gap(Tensor(x)).data[0, 1], [0.5] * 3)

    def test_temporal_gap_no_steps(self):
        """Test that an empty time axis raises DimensionError."""
        with pytest.raises(DimensionError):
            temporal_gap(Tensor(np.zeros((0, 2, 3))))

    def test_scores_are_row_stochastic(self, rng):
        """Test that keep and drop probabilities sum to one."""
        scorer = TokenScorer(6, 3, rng)
        score = score_tokens(temporal_gap(spikes(rng)), scorer)
        np.testing.assert_allclose(score.S.data.sum(axis=-1), 1.0, rtol=1e-5)
        assert score.keep_prob.shape == (2, 8)

    def test_unbatched_rates(self, rng):
        """Test that [N, D] rates are scored as one image."""
        scorer = TokenScorer(6, 3, rng)
        score = score_tokens(np.zeros((8, 6), dtype=np.float32), scorer)
        assert score.log_probs.shape == (1, 8, 2)

    def test_channel_mismatch(self, rng):
        """Test that a wrong channel count raises DimensionError."""
        scorer = TokenScorer(6, 3, rng)
        with pytest.raises(DimensionError):
            score_tokens(np.zeros((1, 8, 5)), scorer)

    def test_score_shape_checked(self):
        """Test that TokenScore requires a trailing axis of two."""
        with pytest.raises(DimensionError):
            TokenScore(Tensor(np.zeros((1, 4, 3))))


class TestKeepCounts:
    """Tests for keep_counts() and keep_schedule()."""

    def test_ceil(self):
        """Test ceiling of the kept fraction."""
        counts = keep_counts(0.7, np.array([64, 10, 1]))
        np.testing.assert_array_equal(counts, [45, 7, 1])

    def test_exact_products_not_rounded_up(self):
        """Test that an exact product is not inflated by float error."""
        np.testing.assert_array_equal(keep_counts(0.6, np.array([10])), [6])

    def test_schedule(self):
        """Test the cumulative schedule over three selectors."""
        assert keep_schedule(0.7, [2, 3, 4], 64) == [45, 32, 23]
        assert keep_schedule(0.5, [1, 2], 16) == [8, 4]

    def test_schedule_dense(self):
        """Test that rho = 1 keeps everything."""
        assert keep_schedule(1.0, [1, 2, 3], 64) == [64, 64, 64]

    def test_schedule_invalid_rho(self):
        """Test that a bad rho raises ConfigurationError."""
        with pytest.raises(ConfigurationError):
            keep_schedule(0.0, [1], 64)


class TestSampleKeepDecision:
    """Tests for sample_keep_decision()."""

    def test_eval_top_k(self):
        """Test that inference keeps the most likely tokens."""
        keep = np.array([[0.9, 0.1, 0.8, 0.3]])
        score = TokenScore.from_probabilities(np.stack([keep, 1 - keep], -1))
        decision = sample_keep_decision(score, SelectorConfig(rho=0.5), "eval")
        np.testing.assert_array_equal(decision.hard, [[1, 0, 1, 0]])

    def test_eval_ties_prefer_lower_index(self):
        """Test deterministic tie breaking."""
        keep = np.full((1, 4), 0.5)
        score = TokenScore.from_probabilities(np.stack([keep, 1 - keep], -1))
        decision = sample_keep_decision(score, SelectorConfig(rho=0.5), "eval")
        np.testing.assert_array_equal(decision.hard, [[1, 1, 0, 0]])

    def test_eval_respects_alive(self):
        """Test that dead tokens are never re-activated."""
        keep = np.array([[0.9, 0.8, 0.7, 0.6]])
        score = TokenScore.from_probabilities(np.stack([keep, 1 - keep], -1))
        alive = np.array([[0, 1, 1, 1]])
        decision = sample_keep_decision(
            score, SelectorConfig(rho=0.5), "eval", alive=alive
        )
        np.testing.assert_array_equal(decision.hard, [[0, 1, 1, 0]])

    def test_train_needs_rng(self):
        """Test that Gumbel sampling without a generator raises."""
        score = TokenScore.from_probabilities(np.full((1, 4, 2), 0.5))
        with pytest.raises(UsageError):
            sample_keep_decision(score, SelectorConfig(rho=0.5), "train")

    def test_train_forces_one_token(self):
        """Test that an image never loses every token in training."""
        keep = np.array([[1e-9, 2e-9, 1e-9]])
        score = TokenScore.from_probabilities(np.stack([keep, 1 - keep], -1))
        decision = sample_keep_decision(
            score, SelectorConfig(rho=0.5), "train", np.random.default_rng(0)
        )
        np.testing.assert_array_equal(decision.hard, [[0, 1, 0]])

    def test_train_straight_through(self, rng):
        """Test that keep equals hard and carries the soft gradient."""
        logits = Tensor(rng.normal(size=(1, 6, 2)), requires_grad=True)
        score = TokenScore(logits.log_softmax(axis=-1))
        decision = sample_keep_decision(score, SelectorConfig(rho=0.5), "train", rng)
        np.testing.assert_array_equal(decision.keep.data, decision.hard)
        decision.keep.sum().backward()
        assert logits.grad is not None

    def test_train_frequency_matches_probability(self):
        """Test that Gumbel sampling keeps a token at its keep probability."""
        draws = 10_000
        keep = np.tile([[0.7, 1.0 - 1e-6]], (draws, 1))
        score = TokenScore.from_probabilities(np.stack([keep, 1 - keep], -1))
        decision = sample_keep_decision(
            score, SelectorConfig(), "train", np.random.default_rng(11)
        )
        assert 0.68 <= decision.hard[:, 0].mean() <= 0.72

    def test_bad_temperature(self):
        """Test that a non-positive override raises ConfigurationError."""
        score = TokenScore.from_probabilities(np.full((1, 4, 2), 0.5))
        with pytest.raises(ConfigurationError):
            sample_keep_decision(
                score, SelectorConfig(), "train", np.random.default_rng(0), None, 0.0
            )

    def test_alive_shape_mismatch(self):
        """Test that a mismatched alive mask raises DimensionError."""
        score = TokenScore.from_probabilities(np.full((1, 4, 2), 0.5))
        with pytest.raises(DimensionError):
            sample_keep_decision(score, SelectorConfig(), "eval", alive=np.ones((1, 3)))

    @settings(max_examples=30, deadline=None)
    @given(
        rho=st.floats(0.05, 1.0),
        seed=st.integers(0, 2**16),
        tokens=st.integers(1, 12),
    )
    def test_eval_count_property(self, rho, seed, tokens):
        """Test that inference keeps exactly ceil(rho * alive) alive tokens."""
        gen = np.random.default_rng(seed)
        keep = gen.random((2, tokens))
        alive = (gen.random((2, tokens)) < 0.7).astype(np.float32)
        score = TokenScore.from_probabilities(np.stack([keep, 1 - keep], -1))
        decision = sample_keep_decision(
            score, SelectorConfig(rho=rho), "eval", alive=alive
        )
        np.testing.assert_array_equal(
            decision.kept_counts, keep_counts(rho, alive.sum(axis=1))
        )
        assert np.all(decision.hard <= alive)


class TestComposeDecision:
    """Tests for compose_decision()."""

    def test_hadamard(self):
        """Test elementwise product of two decisions."""
        a = TokenDecision.from_hard([1, 1, 0, 1])
        b = TokenDecision.from_hard([1, 0, 1, 1])
        composed = compose_decision(a, b)
        np.testing.assert_array_equal(composed.hard, [[1, 0, 0, 1]])
        assert len(composed.layer_history) == 1

    def test_keep_all_is_neutral(self):
        """Test that composing with keep_all changes nothing."""
        b = TokenDecision.from_hard([[1, 0], [0, 1]])
        composed = compose_decision(TokenDecision.keep_all(2, 2), b)
        np.testing.assert_array_equal(composed.hard, b.hard)

    def test_shape_mismatch(self):
        """Test that different token sets raise DimensionError."""
        with pytest.raises(DimensionError):
            compose_decision(TokenDecision.keep_all(1, 3), TokenDecision.keep_all(1, 4))


class TestSelectors:
    """Tests for the selector classes and registry."""

    def test_registry(self):
        """Test registered selector names."""
        assert set(SELECTORS) == {"spiking", "random"}

    def test_build_unknown(self, rng):
        """Test that an unknown kind raises ConfigurationError."""
        with pytest.raises(ConfigurationError):
            build_selector("oracle", 6, SelectorConfig(), rng)

    def test_spiking_selector(self, rng):
        """Test a learned selector application."""
        selector = build_selector("spiking", 6, SelectorConfig(rho=0.5), rng)
        assert isinstance(selector, SpikingTokenSelector)
        assert selector.name == "spiking"
        decision, score = selector.select(
            spikes(rng), np.ones((2, 8)), SelectionMode.EVAL
        )
        np.testing.assert_array_equal(decision.kept_counts, [4, 4])
        assert score.keep_prob.shape == (2, 8)

    def test_scorer_not_prunable(self, rng):
        """Test that scorer weights are excluded from pruning."""
        selector = SpikingTokenSelector(6, SelectorConfig(), rng)
        assert selector.prunable_parameters() == []

    def test_hidden_width(self, rng):
        """Test the configurable scorer width."""
        selector = SpikingTokenSelector(6, SelectorConfig(hidden_width=5), rng)
        assert selector.scorer.fc1.out_features == 5

    def test_random_selector(self, rng):
        """Test uniform random selection with the same budget."""
        selector = build_selector("random", 6, SelectorConfig(rho=0.5), rng)
        assert isinstance(selector, RandomTokenSelector)
        assert selector.parameters() == []
        decision, score = selector.select(
            spikes(rng), np.ones((2, 8)), SelectionMode.TRAIN, rng
        )
        np.testing.assert_array_equal(decision.kept_counts, [4, 4])
        np.testing.assert_allclose(score.keep_prob, 0.5)

    def test_random_selector_needs_rng(self, rng):
        """Test that random selection without a generator raises."""
        selector = RandomTokenSelector(SelectorConfig(rho=0.5))
        with pytest.raises(UsageError):
            selector.select(spikes(rng), np.ones((2, 8)), SelectionMode.EVAL)

    def test_repr(self):
        """Test string representation."""
        assert "rho=0.5" in repr(RandomTokenSelector(SelectorConfig(rho=0.5)))


class TestExportDecisionTrace:
    """Tests for export_decision_trace()."""

    def test_writes_rows(self, tmp_path):
        """Test header and one row per layer and token."""
        first = TokenDecision.from_hard([[1, 1, 0]])
        decision = compose_decision(
            compose_decision(TokenDecision.keep_all(1, 3), first),
            TokenDecision.from_hard([[1, 0, 1]]),
        )
        scores = [np.array([[0.9, 0.6, 0.1]]), np.array([[0.8, 0.2, 0.0]])]
        path = export_decision_trace(decision, scores, [2, 3], tmp_path / "d.csv")
        with open(path, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["layer", "token_index", "kept", "score"]
        assert rows[1] == ["2", "0", "1", "0.900000"]
        assert rows[5] == ["3", "1", "0", "0.200000"]
        assert len(rows) == 7

    def test_length_mismatch(self, tmp_path):
        """Test that inconsistent inputs raise DimensionError."""
        decision = TokenDecision.keep_all(1, 3)
        with pytest.raises(DimensionError):
            export_decision_trace(
                decision, [np.zeros((1, 3))], [1], tmp_path / "d.csv"
            )
