"""The interface every belief backend implements."""

from __future__ import annotations

from typing import Optional, Protocol

from ..belief import AnswerLikelihood, BeliefState
from ..engine import DialogueState, PolicyDecision, Updater


class Estimator(Protocol):
    name: str
    supports_exact_likelihood: bool
    supports_verbalized_confidence: bool
    supports_adaptive_prompting: bool

    def prior(self, task) -> BeliefState:
        """Belief before any question has been asked."""

    def posterior(self, state: DialogueState, q: int, y: int) -> BeliefState:
        """Belief after the user answered ``y`` to ``q`` in ``state``."""

    def candidate_questions(self, state: DialogueState) -> list[int]:
        """Unasked questions worth scoring this turn."""

    def answer_likelihood(self, state: DialogueState, questions: list[int]) -> AnswerLikelihood:
        """``p(y | q, theta)`` for each question in ``questions``."""

    def lookahead_update(self, state: DialogueState) -> Optional[Updater]:
        """Hypothetical-answer updater for VoI scoring; ``None`` means exact Bayes."""

    def confidence(self, state: DialogueState) -> tuple[int, float]:
        """Best hypothesis and the confidence attached to it, in [0, 1]."""

    def adaptive_turn(self, state: DialogueState) -> PolicyDecision:
        """Let the backend itself decide to ask or commit (LLM backends only)."""
