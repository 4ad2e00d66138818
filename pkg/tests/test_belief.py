from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_bayes
from voiclarify.belief import (
    AnswerDistribution,
    AnswerLikelihood,
    BeliefState,
    answer_marginal,
    bayes_update,
    max_belief,
    normalize,
)
from voiclarify.errors import (
    AllZero,
    DimensionMismatch,
    MissingLikelihoodRow,
    NegativeWeight,
    NonFinite,
    ZeroEvidence,
)

NOISY = AnswerLikelihood({0: np.array([[0.9, 0.1], [0.2, 0.8]])})
SEPARATING = AnswerLikelihood({0: np.array([[1.0, 0.0], [0.0, 1.0]])})
FLAT = AnswerLikelihood({0: np.array([[0.5, 0.5], [0.5, 0.5]])})


class TestNormalize:
    def test_symmetric(self):
        assert np.allclose(normalize([2, 2]).probs, [0.5, 0.5])

    def test_identity(self):
        assert np.array_equal(normalize([1, 0, 0]).probs, [1, 0, 0])

    def test_division_oracle(self):
        out = normalize([0.54, 0.08]).probs
        assert out == pytest.approx([27 / 31, 4 / 31], abs=1e-12)
        assert round(out[0], 5) == 0.87097

    @pytest.mark.parametrize(
        "weights, error",
        [([0, 0], AllZero), ([1, -0.1], NegativeWeight), ([1, np.nan], NonFinite), ([np.inf, 1], NonFinite)],
    )
    def test_rejects(self, weights, error):
        with pytest.raises(error):
            normalize(weights)

    @given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30).filter(lambda w: sum(w) > 1e-300))
    def test_sums_to_one(self, w):
        assert abs(normalize(w).probs.sum() - 1) <= 1e-9


class TestBeliefState:
    def test_invariants_checked(self):
        with pytest.raises(ValueError):
            BeliefState(np.array([0.5, 0.6]))
        with pytest.raises(NegativeWeight):
            BeliefState(np.array([1.5, -0.5]))
        with pytest.raises(DimensionMismatch):
            BeliefState(np.array([]))

    def test_read_only(self):
        b = BeliefState.uniform(3)
        with pytest.raises(ValueError):
            b.probs[0] = 1.0

    def test_entropy(self):
        assert BeliefState.uniform(8).entropy() == pytest.approx(3.0)
        assert BeliefState.point_mass(4, 2).entropy() == 0.0


class TestBayesUpdate:
    def test_noisy_fixture(self):
        post = bayes_update(BeliefState(np.array([0.6, 0.4])), 0, 0, NOISY)
        expected = exact_bayes([Fraction(3, 5), Fraction(2, 5)], [Fraction(9, 10), Fraction(1, 5)])
        assert expected == [Fraction(27, 31), Fraction(4, 31)]
        assert post.probs == pytest.approx([float(x) for x in expected], abs=1e-12)
        assert post.turn == 1

    def test_point_mass_absorbing(self):
        post = bayes_update(BeliefState.point_mass(2, 0), 0, 0, NOISY)
        assert np.array_equal(post.probs, [1.0, 0.0])

    def test_uninformative(self):
        post = bayes_update(BeliefState(np.array([0.3, 0.7])), 0, 1, FLAT)
        assert post.probs == pytest.approx([0.3, 0.7], abs=1e-12)

    def test_zero_evidence(self):
        with pytest.raises(ZeroEvidence):
            bayes_update(BeliefState.point_mass(2, 0), 0, 1, SEPARATING)

    def test_missing_question(self):
        with pytest.raises(MissingLikelihoodRow):
            bayes_update(BeliefState.uniform(2), 7, 0, NOISY)

    def test_missing_row_in_support(self):
        partial = AnswerLikelihood({0: np.array([[0.9, 0.1], [np.nan, np.nan]])})
        with pytest.raises(MissingLikelihoodRow):
            bayes_update(BeliefState.uniform(2), 0, 0, partial)
        # outside the support the row is not needed
        assert np.array_equal(bayes_update(BeliefState.point_mass(2, 0), 0, 0, partial).probs, [1, 0])

    def test_does_not_mutate(self):
        b = BeliefState(np.array([0.6, 0.4]))
        bayes_update(b, 0, 0, NOISY)
        assert np.array_equal(b.probs, [0.6, 0.4])

    @settings(max_examples=200)
    @given(
        st.lists(st.floats(0.01, 10), min_size=2, max_size=6),
        st.floats(0.01, 100),
        st.data(),
    )
    def test_rescaling_invariance(self, weights, scale, data):
        n = len(weights)
        col = data.draw(st.lists(st.floats(0.01, 1), min_size=n, max_size=n))
        L = AnswerLikelihood({0: np.column_stack([col, 1 - np.array(col)])})
        a = bayes_update(normalize(weights), 0, 0, L)
        b = bayes_update(normalize([w * scale for w in weights]), 0, 0, L)
        assert np.allclose(a.probs, b.probs, atol=1e-12)


class TestAnswerMarginal:
    def test_dot_product(self):
        m = answer_marginal(BeliefState(np.array([0.6, 0.4])), 0, NOISY)
        assert m[0] == pytest.approx(0.62, abs=1e-12)

    def test_symmetric_separating(self):
        assert answer_marginal(BeliefState.uniform(2), 0, SEPARATING).probs == pytest.approx([0.5, 0.5])

    def test_point_mass_row(self):
        assert answer_marginal(BeliefState.point_mass(2, 0), 0, NOISY).probs == pytest.approx([0.9, 0.1])

    def test_missing(self):
        with pytest.raises(MissingLikelihoodRow):
            answer_marginal(BeliefState.uniform(2), 3, NOISY)

    @given(st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda w: sum(w) > 0))
    def test_sums_to_one(self, w):
        L = AnswerLikelihood({0: np.array([[0.2, 0.3, 0.5], [1, 0, 0], [0.1, 0.1, 0.8]])})
        assert answer_marginal(normalize(w), 0, L).probs.sum() == pytest.approx(1, abs=1e-9)


class TestMaxBelief:
    def test_direct(self):
        assert max_belief(BeliefState(np.array([0.2, 0.5, 0.3]))) == (1, 0.5)

    def test_tie_lowest_id(self):
        for _ in range(3):
            assert max_belief(BeliefState(np.array([0.5, 0.5]))) == (0, 0.5)

    def test_from_update(self):
        idx, p = max_belief(bayes_update(BeliefState(np.array([0.6, 0.4])), 0, 0, NOISY))
        assert idx == 0 and round(p, 5) == 0.87097


def test_likelihood_validation():
    with pytest.raises(ValueError):
        AnswerLikelihood({0: np.array([[0.5, 0.6]])})
    with pytest.raises(ValueError):
        AnswerDistribution(np.array([0.3, 0.3]))


def test_stacked_pads_answers():
    L = AnswerLikelihood({0: np.array([[1.0, 0.0]]), 1: np.array([[0.2, 0.3, 0.5]])})
    s = L.stacked([1, 0])
    assert s.shape == (2, 1, 3)
    assert np.array_equal(s[1, 0], [1.0, 0.0, 0.0])
