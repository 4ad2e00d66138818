"""Task containers shared by every benchmark environment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..belief import AnswerLikelihood, BeliefState, Hypothesis
from ..engine import UtilityMatrix
from ..errors import DimensionMismatch


@dataclass(frozen=True)
class Question:
    id: int
    text: str
    answer_labels: tuple[str, ...] = ("yes", "no")

    def __post_init__(self):
        if len(self.answer_labels) < 2:
            raise ValueError(f"question {self.id} needs at least two answers")


@dataclass(frozen=True, eq=False)
class TaskSpec:
    """A clarify-or-commit problem with a ground-truth user model.

    ``truth`` is set for generated tasks whose hidden state is part of the
    generated scenario (flight, shop); otherwise each episode samples the
    hidden state from ``prior``.
    """

    name: str
    hypotheses: tuple[Hypothesis, ...]
    actions: tuple[str, ...]
    utility: UtilityMatrix
    questions: tuple[Question, ...]
    likelihood: AnswerLikelihood
    prior: BeliefState
    initial_query: str
    k_max_default: int
    truth: Optional[int] = None
    kind: str = "generic"
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.hypotheses)
        if [h.id for h in self.hypotheses] != list(range(n)):
            raise ValueError("hypothesis ids must be dense 0..n-1")
        if len(self.prior) != n:
            raise DimensionMismatch("prior length differs from hypothesis count")
        if self.utility.values.shape != (n, len(self.actions)):
            raise DimensionMismatch(
                f"utility is {self.utility.values.shape}, expected {(n, len(self.actions))}"
            )
        for q in self.questions:
            table = self.likelihood.table(q.id)
            if table.shape != (n, len(q.answer_labels)):
                raise DimensionMismatch(f"likelihood for question {q.id} has shape {table.shape}")
            if np.isnan(table).any():
                raise DimensionMismatch(f"likelihood for question {q.id} is incomplete")
        if [q.id for q in self.questions] != list(range(len(self.questions))):
            raise ValueError("question ids must be dense 0..m-1")
        if self.truth is not None and not 0 <= self.truth < n:
            raise ValueError("truth out of range")

    @property
    def labels(self) -> list[str]:
        return [h.label for h in self.hypotheses]

    def sample_truth(self, rng: np.random.Generator) -> int:
        # always consume exactly one draw so answer streams line up across task kinds
        u = rng.random()
        if self.truth is not None:
            return self.truth
        cdf = np.cumsum(self.prior.probs)
        return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1))

    def simulate_answer(self, theta: int, q: int, rng: np.random.Generator) -> int:
        return simulate_answer(self, theta, q, rng)

    def terminal_utility(self, theta: int, a: int) -> float:
        return terminal_utility(self, theta, a)

    def with_utility(self, utility: UtilityMatrix, name: Optional[str] = None) -> "TaskSpec":
        return _replace(self, utility=utility, name=name or self.name)


def _replace(task: TaskSpec, **changes) -> TaskSpec:
    from dataclasses import replace

    return replace(task, **changes)


def simulate_answer(task: TaskSpec, theta: int, q: int, rng: np.random.Generator) -> int:
    """Draw the simulated user's answer from ``p(y | q, theta)``."""
    row = task.likelihood.row(q, theta)
    cdf = np.cumsum(row)
    u = rng.random()
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1))


def terminal_utility(task: TaskSpec, theta: int, a: int) -> float:
    return float(task.utility.values[theta, a])


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=-1)


def information_gains(task: TaskSpec, questions: Sequence[int], belief: BeliefState) -> np.ndarray:
    """Mutual information (bits) between the hidden state and each question's answer."""
    tables = task.likelihood.stacked(questions)  # (Q, n, Y)
    marginals = np.einsum("n,qny->qy", belief.probs, tables)
    return _entropy_rows(marginals) - _entropy_rows(tables) @ belief.probs


def expected_entropy_reduction(task: TaskSpec, q: int, belief: BeliefState) -> float:
    return float(information_gains(task, [q], belief)[0])


def gen_questions(
    task: TaskSpec,
    asked: Sequence[int] = (),
    m: Optional[int] = None,
    belief: Optional[BeliefState] = None,
) -> list[int]:
    """Up to ``m`` unasked questions, most informative first.

    The ordering is a pre-filter; the decision rule re-scores whatever it gets.
    Information values are rounded to 12 decimals so ties fall back to id order.
    """
    if m is not None and m < 1:
        raise ValueError("m must be >= 1")
    belief = task.prior if belief is None else belief
    done = set(asked)
    unasked = [q.id for q in task.questions if q.id not in done]
    if not unasked:
        return []
    gains = np.round(information_gains(task, unasked, belief), 12)
    order = sorted(range(len(unasked)), key=lambda i: (-gains[i], unasked[i]))
    ranked = [unasked[i] for i in order]
    return ranked if m is None else ranked[:m]
