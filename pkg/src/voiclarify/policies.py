"""Clarify-or-commit policies: the VoI rule and the comparison baselines.

Every policy is a callable ``state -> PolicyDecision``. The fixed-round and
confidence baselines pick questions by VoI scored at zero cost, so they
differ from the VoI policy only in when they stop.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .engine import (
    Clarify,
    Commit,
    CostModel,
    DialogueState,
    Policy,
    PolicyDecision,
    _argmax_stable,
    voi_policy,
)

KINDS = ("no_question", "fixed_round", "confidence", "adaptive", "voi")
_FREE = CostModel(0.0)


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    k: Optional[int] = None
    tau: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; choose from {KINDS}")
        if (self.kind == "fixed_round") != (self.k is not None):
            raise ValueError("k is required for fixed_round and only for it")
        if (self.kind == "confidence") != (self.tau is not None):
            raise ValueError("tau is required for confidence and only for it")
        if self.k is not None and self.k < 0:
            raise ValueError("k must be >= 0")
        if self.tau is not None and not 0 <= self.tau <= 1:
            raise ValueError("tau must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.k is not None:
            d["k"] = self.k
        if self.tau is not None:
            d["tau"] = self.tau
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        return cls(d["kind"], d.get("k"), d.get("tau"))

    @property
    def label(self) -> str:
        from .records import policy_label

        return policy_label(self.to_dict())


def _most_valuable_question(state: DialogueState) -> Optional[int]:
    """Candidate with the highest VoI, asked regardless of its sign."""
    report = state.score(_FREE)
    if not report.records:
        return None
    best = report.records[_argmax_stable([r.voi for r in report.records])]
    state.last_report = replace(report, chosen=Clarify(best.question))
    return best.question


def no_question_policy(state: DialogueState) -> PolicyDecision:
    return Commit(state.best_action())


def fixed_round_policy(k: int) -> Policy:
    if k < 0:
        raise ValueError("k must be >= 0")

    def policy(state: DialogueState) -> PolicyDecision:
        if state.turn >= k:
            return Commit(state.best_action())
        q = _most_valuable_question(state)
        return Commit(state.best_action()) if q is None else Clarify(q)

    policy.__name__ = f"fixed_round_{k}"
    return policy


def confidence_threshold_policy(tau: float) -> Policy:
    def policy(state: DialogueState) -> PolicyDecision:
        _, confidence = state.estimator.confidence(state)
        if confidence >= tau:
            return Commit(state.best_action())
        q = _most_valuable_question(state)
        return Commit(state.best_action()) if q is None else Clarify(q)

    policy.__name__ = f"confidence_{tau}"
    return policy


def adaptive_prompt_policy(state: DialogueState) -> PolicyDecision:
    return state.estimator.adaptive_turn(state)


def build_policy(config: PolicyConfig) -> Policy:
    if config.kind == "no_question":
        return no_question_policy
    if config.kind == "fixed_round":
        return fixed_round_policy(config.k)
    if config.kind == "confidence":
        return confidence_threshold_policy(config.tau)
    if config.kind == "adaptive":
        return adaptive_prompt_policy
    return voi_policy


def baseline_grid(
    rounds=(0, 5, 10, 15, 20), taus=(0.5, 0.7, 0.9), include_no_question: bool = True
) -> list[PolicyConfig]:
    """The default nine-point baseline grid: no-question, fixed rounds, thresholds."""
    grid = [PolicyConfig("no_question")] if include_no_question else []
    grid += [PolicyConfig("fixed_round", k=k) for k in rounds]
    grid += [PolicyConfig("confidence", tau=t) for t in taus]
    return grid
