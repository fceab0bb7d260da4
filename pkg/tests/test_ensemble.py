"""Fusion rule, class weighting, and prediction algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gzsl_ensemble.ensemble import (
    ClassWeighting,
    EnsembleParams,
    apply_class_weighting,
    ensemble_score_matrix,
    ensemble_scores,
    predict,
    predict_weighted,
    weighted_predictions_for_betas,
)


@st.composite
def prob_vector_pairs(draw, min_classes=2, max_classes=8):
    c = draw(st.integers(min_classes, max_classes))
    def vec():
        raw = draw(st.lists(st.floats(0.01, 1.0), min_size=c, max_size=c))
        arr = np.array(raw)
        return arr / arr.sum()
    return vec(), vec()


@st.composite
def score_vector_with_partition(draw):
    c = draw(st.integers(2, 8))
    raw = draw(st.lists(st.floats(0.0, 1.0), min_size=c, max_size=c))
    n_unseen = draw(st.integers(1, c - 1))
    ids = draw(st.permutations(list(range(c))))
    unseen = frozenset(ids[:n_unseen])
    return np.array(raw), unseen, frozenset(range(c)) - unseen


class TestEnsembleScores:
    def test_agreement_pins_winner_and_averages_rest(self):
        p_dap = np.array([0.7, 0.2, 0.1])
        p_cyg = np.array([0.6, 0.3, 0.1])
        for alpha in (0.0, 0.3, 1.0):
            out = ensemble_scores(p_dap, p_cyg, alpha)
            assert out[0] == 1.0
            assert out[1] == pytest.approx(alpha * 0.3 + (1 - alpha) * 0.2)
            assert out[2] == pytest.approx(0.1)
            assert int(np.argmax(out)) == 0

    def test_disagreement_alpha_one_returns_cyg(self):
        p_dap = np.array([0.8, 0.2])
        p_cyg = np.array([0.1, 0.9])
        assert ensemble_scores(p_dap, p_cyg, 1.0).tolist() == p_cyg.tolist()

    def test_hand_weighted_average(self):
        out = ensemble_scores(np.array([0.8, 0.2]), np.array([0.1, 0.9]), 0.5)
        assert np.allclose(out, [0.45, 0.55])
        assert int(np.argmax(out)) == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            ensemble_scores(np.ones(3) / 3, np.ones(4) / 4, 0.5)

    @given(pair=prob_vector_pairs(), alpha=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]))
    @settings(max_examples=200, deadline=None)
    def test_agreement_branch_always_wins(self, pair, alpha):
        p_dap, p_cyg = pair
        if int(np.argmax(p_dap)) == int(np.argmax(p_cyg)):
            out = ensemble_scores(p_dap, p_cyg, alpha)
            assert int(np.argmax(out)) == int(np.argmax(p_dap))

    @given(pair=prob_vector_pairs())
    @settings(max_examples=200, deadline=None)
    def test_alpha_extremes_under_disagreement(self, pair):
        p_dap, p_cyg = pair
        if int(np.argmax(p_dap)) != int(np.argmax(p_cyg)):
            assert int(np.argmax(ensemble_scores(p_dap, p_cyg, 1.0))) == int(np.argmax(p_cyg))
            assert int(np.argmax(ensemble_scores(p_dap, p_cyg, 0.0))) == int(np.argmax(p_dap))

    def test_matrix_form_matches_vector_form(self):
        rng = np.random.default_rng(0)
        dap = rng.dirichlet(np.ones(5), size=40)
        cyg = rng.dirichlet(np.ones(5), size=40)
        for alpha in (0.0, 0.37, 1.0):
            fused = ensemble_score_matrix(dap, cyg, alpha)
            for i in range(40):
                assert np.array_equal(fused[i], ensemble_scores(dap[i], cyg[i], alpha))


class TestClassWeighting:
    def test_params_validation(self):
        with pytest.raises(ValueError):
            EnsembleParams(alpha=1.5)
        with pytest.raises(ValueError):
            ClassWeighting(beta=0.5, seen_set=frozenset({0}), unseen_set=frozenset({0, 1}))

    def test_half_beta_scales_uniformly(self):
        w = ClassWeighting(beta=0.5, seen_set=frozenset({0, 1}), unseen_set=frozenset({2}))
        scores = np.array([0.5, 0.3, 0.2])
        out = apply_class_weighting(scores, w)
        assert np.allclose(out, scores * 0.5)
        assert int(np.argmax(out)) == int(np.argmax(scores))

    def test_beta_one_zeroes_seen(self):
        w = ClassWeighting(beta=1.0, seen_set=frozenset({0, 2}), unseen_set=frozenset({1}))
        out = apply_class_weighting(np.array([0.5, 0.3, 0.2]), w)
        assert out[0] == 0.0 and out[2] == 0.0
        assert out[1] == 0.3

    def test_hand_flip(self):
        w = ClassWeighting(beta=0.7, seen_set=frozenset({0}), unseen_set=frozenset({1}))
        out = apply_class_weighting(np.array([0.6, 0.4]), w)
        assert np.allclose(out, [0.18, 0.28])
        assert predict(out) == 1

    def test_length_mismatch(self):
        w = ClassWeighting(beta=0.5, seen_set=frozenset({0}), unseen_set=frozenset({1}))
        with pytest.raises(ValueError, match="mismatch"):
            apply_class_weighting(np.ones(3), w)


class TestPredict:
    def test_plain_argmax(self):
        assert predict(np.array([0.0, 0.0, 5.0, 1.0])) == 2

    def test_all_equal_goes_to_zero(self):
        assert predict(np.ones(4)) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            predict(np.array([]))

    def test_degenerate_beta_one_prefers_unseen(self):
        # all unseen scores zero: beta=1 still must land in the unseen set
        w = ClassWeighting(beta=1.0, seen_set=frozenset({0, 1}), unseen_set=frozenset({2, 3}))
        assert predict_weighted(np.array([0.9, 0.8, 0.0, 0.0]), w) == 2

    def test_degenerate_beta_zero_prefers_seen(self):
        w = ClassWeighting(beta=0.0, seen_set=frozenset({2, 3}), unseen_set=frozenset({0, 1}))
        assert predict_weighted(np.array([0.9, 0.8, 0.0, 0.0]), w) == 2


class TestBetaSweepAlgebra:
    @given(case=score_vector_with_partition())
    @settings(max_examples=200, deadline=None)
    def test_single_switch_seen_to_unseen(self, case):
        scores, unseen, seen = case
        betas = np.linspace(0, 1, 41)
        preds = [predict_weighted(scores, ClassWeighting(beta=float(b), seen_set=seen, unseen_set=unseen))
                 for b in betas]
        kinds = [p in unseen for p in preds]
        switches = sum(1 for a, b in zip(kinds, kinds[1:]) if a != b)
        assert switches <= 1
        if switches == 1:
            assert not kinds[0] and kinds[-1]  # seen first, unseen after
        # within each regime the chosen class never changes
        for side in (False, True):
            chosen = {p for p, k in zip(preds, kinds) if k == side}
            assert len(chosen) <= 1

    @given(case=score_vector_with_partition())
    @settings(max_examples=100, deadline=None)
    def test_extremes_are_restricted(self, case):
        scores, unseen, seen = case
        assert predict_weighted(scores, ClassWeighting(beta=1.0, seen_set=seen, unseen_set=unseen)) in unseen
        assert predict_weighted(scores, ClassWeighting(beta=0.0, seen_set=seen, unseen_set=unseen)) in seen

    @given(case=score_vector_with_partition(), data=st.data())
    @settings(max_examples=200, deadline=None)
    def test_vectorized_path_matches_per_sample_rule(self, case, data):
        scores, unseen, seen = case
        c = scores.size
        mask = np.zeros(c, dtype=bool)
        mask[sorted(unseen)] = True
        betas = np.array([0.0, data.draw(st.floats(0.0, 1.0)), 0.5, 1.0])
        preds = weighted_predictions_for_betas(scores[None, :], mask, betas)
        for bi, beta in enumerate(betas):
            w = ClassWeighting(beta=float(beta), seen_set=seen, unseen_set=unseen)
            assert preds[bi, 0] == predict_weighted(scores, w)

    def test_vectorized_path_matches_on_random_matrices(self):
        rng = np.random.default_rng(1)
        scores = rng.random((50, 6))
        unseen = frozenset({1, 4})
        seen = frozenset(range(6)) - unseen
        mask = np.zeros(6, dtype=bool)
        mask[sorted(unseen)] = True
        betas = np.linspace(0, 1, 11)
        table = weighted_predictions_for_betas(scores, mask, betas)
        for bi, beta in enumerate(betas):
            w = ClassWeighting(beta=float(beta), seen_set=seen, unseen_set=unseen)
            for i in range(scores.shape[0]):
                assert table[bi, i] == predict_weighted(scores[i], w)
