"""Decision-theoretic core of the clarify-or-commit loop.

The quantities computed here:

* ``expected_utility(b, a)``   = sum_theta b(theta) U(theta, a)
* ``best_action_value(b)``     = max_a expected_utility(b, a)
* ``posterior_value(b, q)``    = sum_y p(y | q, b) * best_action_value(b_y)
* ``value_of_information``     = posterior_value - best_action_value
* ``net_voi``                  = value_of_information - c

``voi_step`` scores a candidate set and decides whether to ask or commit;
``run_policy`` drives a full dialogue against a simulated user.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .belief import (
    AnswerLikelihood,
    BeliefState,
    answer_marginal,
    bayes_update,
    max_belief,
)
from .errors import (
    DimensionMismatch,
    EmptyActionSet,
    EstimatorFailure,
    MissingLikelihoodRow,
    VoiError,
)

# ask only when the net gain clears floating-point noise
ASK_EPS = 1e-12

Updater = Callable[[BeliefState, int, int], BeliefState]


@dataclass(frozen=True, eq=False)
class UtilityMatrix:
    """``values[theta, a]``: utility of action ``a`` when the user's state is ``theta``."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch("utility matrix must be 2-d")
        if not np.all(np.isfinite(arr)):
            raise ValueError("utility matrix has non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_hypotheses(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def scaled(self, factor: float) -> "UtilityMatrix":
        return UtilityMatrix(self.values * factor)

    def __call__(self, theta: int, a: int) -> float:
        return float(self.values[theta, a])


@dataclass(frozen=True)
class CostModel:
    """Linear communication cost: each question costs ``per_question_cost``.

    ``question_cost`` optionally overrides the price of individual questions;
    the constant form is what the monotonicity guarantees rely on.
    """

    per_question_cost: float = 0.0
    question_cost: Optional[Callable[[int], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.per_question_cost >= 0:
            raise ValueError("per_question_cost must be >= 0")

    def for_question(self, q: int) -> float:
        if self.question_cost is None:
            return self.per_question_cost
        return float(self.question_cost(q))

    def total(self, asked: Sequence[int]) -> float:
        if self.question_cost is None:
            return len(asked) * self.per_question_cost
        return float(sum(self.for_question(q) for q in asked))


@dataclass(frozen=True)
class Clarify:
    question: int
    text: Optional[str] = None


@dataclass(frozen=True)
class Commit:
    action: int


PolicyDecision = Union[Clarify, Commit]


class QuestionScore(NamedTuple):
    # a named tuple rather than a dataclass: logs hold one per candidate per turn
    question: int
    voi: float
    net_voi: float


@dataclass(frozen=True)
class VoiReport:
    records: tuple[QuestionScore, ...]
    v_now: float
    chosen: PolicyDecision

    def to_dict(self) -> dict:
        kind = "clarify" if isinstance(self.chosen, Clarify) else "commit"
        target = self.chosen.question if isinstance(self.chosen, Clarify) else self.chosen.action
        return {
            "v_now": self.v_now,
            "chosen": [kind, target],
            "records": [[r.question, r.voi, r.net_voi] for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoiReport":
        kind, target = d["chosen"]
        chosen = Clarify(target) if kind == "clarify" else Commit(target)
        records = tuple(map(QuestionScore._make, d["records"]))
        return cls(records, float(d["v_now"]), chosen)


def _check_dims(b: BeliefState, U: UtilityMatrix):
    if U.n_hypotheses != len(b):
        raise DimensionMismatch(f"utility has {U.n_hypotheses} rows, belief has {len(b)} entries")


def expected_utility(b: BeliefState, a: int, U: UtilityMatrix) -> float:
    _check_dims(b, U)
    if not 0 <= a < U.n_actions:
        raise DimensionMismatch(f"action {a} out of range")
    return float(b.probs @ U.values[:, a])


def best_action_value(b: BeliefState, U: UtilityMatrix) -> tuple[int, float]:
    """Best action under ``b`` and its expected utility; lowest id wins ties."""
    _check_dims(b, U)
    if U.n_actions == 0:
        raise EmptyActionSet("task has no actions")
    eu = b.probs @ U.values
    a = int(np.argmax(eu))
    return a, float(eu[a])


def posterior_values(
    b: BeliefState, questions: Sequence[int], L: AnswerLikelihood, U: UtilityMatrix
) -> np.ndarray:
    """Exact-Bayes posterior value of several questions at once.

    Uses ``p(y) * V(b_y) = max_a sum_theta b(theta) p(y|theta) U(theta, a)``,
    so no posterior is materialized; answers with zero marginal add nothing.
    """
    _check_dims(b, U)
    if len(questions) == 0:
        return np.zeros(0)
    support = b.probs > 0
    tables = L.stacked(questions)
    if tables.shape[1] != len(b):
        raise DimensionMismatch(f"likelihood covers {tables.shape[1]} hypotheses, belief has {len(b)}")
    tables = tables[:, support]
    if np.isnan(tables).any():
        bad = [q for q, t in zip(questions, tables) if np.isnan(t).any()]
        raise MissingLikelihoodRow(f"questions {bad} lack rows for hypotheses in the belief support")
    joint = b.probs[support][None, :, None] * tables  # (Q, |support|, Y)
    values = np.einsum("qsy,sa->qya", joint, U.values[support])  # (Q, Y, A)
    best = values.max(axis=2)
    return np.where(joint.sum(axis=1) > 0, best, 0.0).sum(axis=1)


def posterior_value(
    b: BeliefState,
    q: int,
    L: AnswerLikelihood,
    U: UtilityMatrix,
    update: Optional[Updater] = None,
) -> float:
    """Expected value of acting after hearing the answer to ``q``.

    A custom ``update`` (e.g. an LLM re-estimate) replaces exact Bayes and
    forces the explicit per-answer loop.
    """
    if update is None:
        return float(posterior_values(b, [q], L, U)[0])
    _check_dims(b, U)
    marginal = answer_marginal(b, q, L)
    total = 0.0
    for y, p_y in enumerate(marginal.probs):
        if p_y <= 0:
            continue
        _, v = best_action_value(update(b, q, y), U)
        total += float(p_y) * v
    return total


def value_of_information(
    b: BeliefState,
    q: int,
    L: AnswerLikelihood,
    U: UtilityMatrix,
    update: Optional[Updater] = None,
) -> float:
    return posterior_value(b, q, L, U, update) - best_action_value(b, U)[1]


def mixture_residual(
    b: BeliefState, q: int, L: AnswerLikelihood, update: Optional[Updater] = None
) -> float:
    """Largest componentwise gap between ``sum_y p(y) b_y`` and ``b``.

    Zero (up to rounding) under exact Bayes; for model-estimated posteriors it
    measures how far the backend is from a coherent belief update.
    """
    update = update or (lambda belief, qq, y: bayes_update(belief, qq, y, L))
    marginal = answer_marginal(b, q, L)
    mixed = np.zeros(len(b))
    for y, p_y in enumerate(marginal.probs):
        if p_y > 0:
            mixed += p_y * update(b, q, y).probs
    return float(np.max(np.abs(mixed - b.probs)))


def net_voi(voi: float, cost: CostModel) -> float:
    return voi - cost.per_question_cost


def _argmax_stable(values: Sequence[float]) -> int:
    """Index of the maximum; near-ties (relative 1e-9) go to the earliest index."""
    best = 0
    for i in range(1, len(values)):
        a, b = values[i], values[best]
        if a - b > 1e-9 * max(abs(a), abs(b)) + 1e-15:
            best = i
    return best


def voi_step(
    b: BeliefState,
    candidates: Sequence[int],
    L: AnswerLikelihood,
    U: UtilityMatrix,
    cost: CostModel,
    update: Optional[Updater] = None,
) -> VoiReport:
    """Score every candidate and choose between asking and committing.

    Ties between questions are broken by candidate order, so passing the
    candidates sorted by id gives lowest-id tie-breaking.
    """
    best_a, v_now = best_action_value(b, U)
    if update is None:
        post = posterior_values(b, list(candidates), L, U)
    else:
        post = [posterior_value(b, q, L, U, update) for q in candidates]
    records = []
    for q, v in zip(candidates, post):
        voi = float(v) - v_now
        records.append(QuestionScore(int(q), voi, voi - cost.for_question(q)))
    if not records:
        return VoiReport((), v_now, Commit(best_a))
    i = _argmax_stable([r.net_voi for r in records])
    if records[i].net_voi <= ASK_EPS:
        chosen: PolicyDecision = Commit(best_a)
    else:
        chosen = Clarify(records[i].question)
    return VoiReport(tuple(records), v_now, chosen)


@dataclass
class DialogueState:
    """Everything a policy may look at when deciding the next move."""

    task: object
    estimator: object
    belief: BeliefState
    cost: CostModel
    k_max: int
    asked: tuple[int, ...] = ()
    answers: tuple[int, ...] = ()
    last_report: Optional[VoiReport] = None
    _candidates: Optional[list[int]] = field(default=None, repr=False)
    _likelihood: Optional[AnswerLikelihood] = field(default=None, repr=False)

    @property
    def turn(self) -> int:
        return len(self.asked)

    @property
    def history(self) -> list[tuple[int, int]]:
        return list(zip(self.asked, self.answers))

    def candidates(self) -> list[int]:
        if self._candidates is None:
            self._candidates = list(self.estimator.candidate_questions(self))
        return self._candidates

    def likelihood(self) -> AnswerLikelihood:
        if self._likelihood is None:
            self._likelihood = self.estimator.answer_likelihood(self, self.candidates())
        return self._likelihood

    def best_action(self) -> int:
        return best_action_value(self.belief, self.task.utility)[0]

    def score(self, cost: Optional[CostModel] = None) -> VoiReport:
        """Run ``voi_step`` on the current candidates and remember the report."""
        report = voi_step(
            self.belief,
            self.candidates(),
            self.likelihood(),
            self.task.utility,
            self.cost if cost is None else cost,
            self.estimator.lookahead_update(self),
        )
        self.last_report = report
        return report


Policy = Callable[[DialogueState], PolicyDecision]


def voi_policy(state: DialogueState) -> PolicyDecision:
    """Ask the question with the largest positive net VoI, else commit."""
    return state.score().chosen


def run_policy(
    policy: Policy,
    task,
    estimator,
    cost: CostModel,
    k_max: int,
    seed: int,
    policy_config: Optional[dict] = None,
    record_timing: bool = False,
    full_beliefs: bool = False,
):
    """Play one dialogue to completion and return its :class:`EpisodeLog`.

    The episode's random stream is ``np.random.default_rng(seed)``: one draw
    picks the hidden user state, then one draw per question answered. Two
    runs that ask the same questions therefore hear the same answers.
    """
    from .records import BeliefSnapshot, EpisodeLog, TurnRecord

    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    truth = task.sample_truth(rng)
    turns: list[TurnRecord] = []
    error = None
    state = None
    try:
        belief = estimator.prior(task)
        state = DialogueState(task, estimator, belief, cost, k_max)
        while True:
            if state.turn >= k_max:
                decision: PolicyDecision = Commit(state.best_action())
            else:
                decision = policy(state)
            if isinstance(decision, Commit):
                break
            q = decision.question
            if q in state.asked:
                raise VoiError(f"policy re-asked question {q}")
            y = task.simulate_answer(truth, q, rng)
            belief = estimator.posterior(state, q, y)
            turns.append(
                TurnRecord(
                    question=q,
                    answer=y,
                    belief=BeliefSnapshot.of(belief, full=full_beliefs),
                    report=state.last_report,
                )
            )
            state = DialogueState(
                task, estimator, belief, cost, k_max, state.asked + (q,), state.answers + (y,)
            )
    except EstimatorFailure as exc:
        error = f"{type(exc).__name__}: {exc}"

    asked = [t.question for t in turns]
    dialogue_cost = cost.total(asked)
    config = dict(policy_config or {"kind": getattr(policy, "__name__", "custom")})
    common = dict(
        task=task.name,
        policy=config,
        backend=getattr(estimator, "name", "unknown"),
        seed=int(seed),
        truth=int(truth),
        truth_label=task.hypotheses[truth].label,
        k_max=int(k_max),
        turns=tuple(turns),
        cost=float(cost.per_question_cost),
        wall_time=(time.perf_counter() - started) if record_timing else None,
    )
    if error is not None:
        return EpisodeLog(
            **common,
            final_action=None,
            final_action_label=None,
            raw_utility=0.0,
            net_utility=0.0 - dialogue_cost,
            commit_confidence=None,
            map_hypothesis=None,
            correct=False,
            failed=True,
            error=error,
        )
    action = decision.action
    raw = task.terminal_utility(truth, action)
    map_id, map_p = max_belief(state.belief)
    return EpisodeLog(
        **common,
        final_action=int(action),
        final_action_label=task.actions[action],
        raw_utility=raw,
        net_utility=raw - dialogue_cost,
        commit_confidence=map_p,
        map_hypothesis=map_id,
        correct=bool(raw >= task.utility.values[truth].max()),
    )


def run_voi_policy(task, estimator, cost: CostModel, k_max: int, seed: int, **kwargs):
    return run_policy(voi_policy, task, estimator, cost, k_max, seed, {"kind": "voi"}, **kwargs)
