"""Clarify-or-commit decisions driven by the value of information.

The core loop: keep a belief over what the user wants, score each candidate
question by how much its answer is expected to improve the best action,
subtract the cost of asking, and ask only while that net gain is positive.
"""

from .belief import (
    AnswerDistribution,
    AnswerLikelihood,
    BeliefState,
    Hypothesis,
    answer_marginal,
    bayes_update,
    max_belief,
    normalize,
)
from .engine import (
    Clarify,
    Commit,
    CostModel,
    DialogueState,
    UtilityMatrix,
    VoiReport,
    best_action_value,
    expected_utility,
    mixture_residual,
    net_voi,
    posterior_value,
    run_policy,
    run_voi_policy,
    value_of_information,
    voi_policy,
    voi_step,
)
from .policies import PolicyConfig, baseline_grid, build_policy
from .records import EpisodeLog, read_logs, write_logs

__version__ = "0.1.0"

__all__ = [
    "AnswerDistribution",
    "AnswerLikelihood",
    "BeliefState",
    "Clarify",
    "Commit",
    "CostModel",
    "DialogueState",
    "EpisodeLog",
    "Hypothesis",
    "PolicyConfig",
    "UtilityMatrix",
    "VoiReport",
    "answer_marginal",
    "baseline_grid",
    "bayes_update",
    "best_action_value",
    "build_policy",
    "expected_utility",
    "max_belief",
    "mixture_residual",
    "net_voi",
    "normalize",
    "posterior_value",
    "read_logs",
    "run_policy",
    "run_voi_policy",
    "value_of_information",
    "voi_policy",
    "voi_step",
    "write_logs",
]
