"""Exact Bayesian backend: the task's own likelihood is the user model."""

from __future__ import annotations

from typing import Optional

from ..belief import AnswerLikelihood, BeliefState, bayes_update, max_belief
from ..engine import DialogueState
from ..errors import BackendUnavailable
from ..tasks.base import gen_questions


def exact_prior(task) -> BeliefState:
    return task.prior


def exact_posterior(b: BeliefState, q: int, y: int, task) -> BeliefState:
    return bayes_update(b, q, y, task.likelihood)


class ExactEstimator:
    """Drop-in backend whose beliefs are exact posteriors under the task model.

    ``m`` caps the number of candidates scored per turn (``None``: all unasked).
    """

    name = "exact"
    supports_exact_likelihood = True
    supports_verbalized_confidence = False
    supports_adaptive_prompting = False

    def __init__(self, m: Optional[int] = None):
        self.m = m

    def prior(self, task) -> BeliefState:
        return exact_prior(task)

    def posterior(self, state: DialogueState, q: int, y: int) -> BeliefState:
        return exact_posterior(state.belief, q, y, state.task)

    def candidate_questions(self, state: DialogueState) -> list[int]:
        return gen_questions(state.task, state.asked, self.m, state.belief)

    def answer_likelihood(self, state: DialogueState, questions) -> AnswerLikelihood:
        return state.task.likelihood

    def lookahead_update(self, state: DialogueState):
        return None

    def confidence(self, state: DialogueState) -> tuple[int, float]:
        return max_belief(state.belief)

    def adaptive_turn(self, state: DialogueState):
        raise BackendUnavailable("adaptive prompting needs the LLM backend")
