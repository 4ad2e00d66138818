"""Flight preference elicitation with a discretized linear reward.

A user is a weight vector ``w`` in ``{-1, 0, +1}^8``; a flight is a feature
vector ``x`` in ``[0, 1]^8`` and the user's reward for it is ``w . x``. The
agent sees five rounds of choices among three flights, then must pick the
best of three held-out flights. All 3^8 = 6561 weight vectors are hypotheses,
and the prior is the (noisy) likelihood of the observed choices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..belief import AnswerLikelihood, Hypothesis, normalize
from ..engine import UtilityMatrix
from ..errors import AllZero, DegeneratePrior
from .base import Question, TaskSpec

FEATURES = (
    "price",
    "number of stops",
    "total duration",
    "departure time",
    "arrival time",
    "airline rating",
    "legroom",
    "checked baggage allowance",
)
STATES = ("lower", "higher", "none")
N_FEATURES = len(FEATURES)
N_SUPPORT = 5
N_OPTIONS = 3
_TIE_TOL = 1e-12

# rows of WEIGHTS are the hypotheses, in itertools.product order
WEIGHTS = np.array(list(itertools.product((-1, 0, 1), repeat=N_FEATURES)), dtype=np.int8)


def weight_label(w) -> str:
    return "".join({-1: "-", 0: "0", 1: "+"}[int(v)] for v in w)


def weight_index(w) -> int:
    idx = 0
    for v in w:
        idx = idx * 3 + (int(v) + 1)
    return idx


def state_of(weight: int) -> int:
    """Answer index for a feature weight: -1 -> lower, +1 -> higher, 0 -> none."""
    return {-1: 0, 1: 1, 0: 2}[int(weight)]


@dataclass(frozen=True)
class FlightScenario:
    latent_weights: tuple[int, ...]
    support_rounds: tuple[tuple[tuple[tuple[float, ...], ...], int], ...]
    holdout_options: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.latent_weights) != N_FEATURES or any(
            w not in (-1, 0, 1) for w in self.latent_weights
        ):
            raise ValueError("latent weights must be 8 values in {-1, 0, 1}")
        for options, chosen in self.support_rounds:
            _check_options(options)
            if chosen not in range(N_OPTIONS):
                raise ValueError("chosen index must be 0, 1 or 2")
        _check_options(self.holdout_options)

    def to_dict(self) -> dict:
        return {
            "latent_weights": list(self.latent_weights),
            "support_rounds": [
                {"options": [list(o) for o in options], "chosen": chosen}
                for options, chosen in self.support_rounds
            ],
            "holdout_options": [list(o) for o in self.holdout_options],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlightScenario":
        return cls(
            tuple(int(w) for w in d["latent_weights"]),
            tuple(
                (tuple(tuple(float(v) for v in o) for o in r["options"]), int(r["chosen"]))
                for r in d["support_rounds"]
            ),
            tuple(tuple(float(v) for v in o) for o in d["holdout_options"]),
        )


def _check_options(options):
    if len(options) != N_OPTIONS:
        raise ValueError("each round has exactly three options")
    for o in options:
        if len(o) != N_FEATURES or any(not 0 <= v <= 1 for v in o):
            raise ValueError("feature vectors have 8 entries in [0, 1]")


def _argmax_set(scores: np.ndarray) -> np.ndarray:
    """Boolean mask (..., 3) of options tied for the best score."""
    return scores >= scores.max(axis=-1, keepdims=True) - _TIE_TOL


def sample_scenario(rng: np.random.Generator, choice_noise: float) -> FlightScenario:
    while True:
        w = rng.integers(-1, 2, size=N_FEATURES)
        if np.any(w != 0):
            break
    rounds = []
    for _ in range(N_SUPPORT):
        options = rng.random((N_OPTIONS, N_FEATURES))
        best = int(np.argmax(options @ w))
        chosen = int(rng.integers(N_OPTIONS)) if rng.random() < choice_noise else best
        rounds.append((tuple(tuple(float(v) for v in o) for o in options), chosen))
    holdout = rng.random((N_OPTIONS, N_FEATURES))
    return FlightScenario(
        tuple(int(v) for v in w),
        tuple(rounds),
        tuple(tuple(float(v) for v in o) for o in holdout),
    )


def choice_likelihood(scenario: FlightScenario, choice_noise: float) -> np.ndarray:
    """Weight of each hypothesis given the observed support choices.

    A choice counts as consistent with ``w`` when it is among ``w``'s
    best-scoring options (the zero vector is indifferent, so consistent with
    anything); consistent rounds weigh ``1 - eps + eps/3``, others ``eps/3``.
    """
    weights = np.ones(len(WEIGHTS))
    W = WEIGHTS.astype(np.float64)
    for options, chosen in scenario.support_rounds:
        scores = W @ np.asarray(options).T  # (6561, 3)
        consistent = _argmax_set(scores)[:, chosen]
        weights *= np.where(consistent, 1 - choice_noise + choice_noise / 3, choice_noise / 3)
    return weights


def flight_task_from_scenario(
    scenario: FlightScenario,
    choice_noise: float = 0.05,
    answer_noise: float = 0.1,
    seed=None,
    k_max: int = 4,
) -> TaskSpec:
    if not (0 <= choice_noise < 0.5 and 0 <= answer_noise < 0.5):
        raise ValueError("noise levels must lie in [0, 0.5)")
    try:
        prior = normalize(choice_likelihood(scenario, choice_noise))
    except AllZero:
        raise DegeneratePrior("no weight vector is consistent with the observed choices") from None

    hypotheses = tuple(Hypothesis(i, weight_label(w)) for i, w in enumerate(WEIGHTS))
    questions = tuple(
        Question(
            j,
            f"For {name}, do you prefer lower values, higher values, or have no preference?",
            STATES,
        )
        for j, name in enumerate(FEATURES)
    )
    tables = {}
    off = answer_noise / (len(STATES) - 1)
    for j in range(N_FEATURES):
        table = np.full((len(WEIGHTS), len(STATES)), off)
        true_state = np.array([state_of(w) for w in WEIGHTS[:, j]])
        table[np.arange(len(WEIGHTS)), true_state] = 1 - answer_noise
        tables[j] = table

    rewards = WEIGHTS.astype(np.float64) @ np.asarray(scenario.holdout_options).T  # (6561, 3)
    lo = rewards.min(axis=1, keepdims=True)
    span = rewards.max(axis=1, keepdims=True) - lo
    flat = span[:, 0] <= _TIE_TOL
    utility = np.where(flat[:, None], 1.0, (rewards - lo) / np.where(flat[:, None], 1.0, span))

    manifest = {
        "kind": "flight",
        "seed": seed,
        "choice_noise": choice_noise,
        "answer_noise": answer_noise,
        "k_max": k_max,
        "scenario": scenario.to_dict(),
    }
    return TaskSpec(
        name="flight",
        hypotheses=hypotheses,
        actions=tuple(f"Flight {i + 1}" for i in range(N_OPTIONS)),
        utility=UtilityMatrix(utility),
        questions=questions,
        likelihood=AnswerLikelihood(tables),
        prior=prior,
        initial_query="Help me pick flights. My preferences are fixed; infer them and choose.",
        k_max_default=k_max,
        truth=weight_index(scenario.latent_weights),
        kind="flight",
        manifest=manifest,
    )


def make_flight_task(
    seed: int, choice_noise: float = 0.05, answer_noise: float = 0.1, k_max: int = 4
) -> TaskSpec:
    rng = np.random.default_rng([seed, 0xF1])
    scenario = sample_scenario(rng, choice_noise)
    return flight_task_from_scenario(scenario, choice_noise, answer_noise, seed=seed, k_max=k_max)

