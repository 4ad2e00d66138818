"""Exact probability bookkeeping over a finite hypothesis set.

Beliefs are stored as read-only float64 vectors. Every operation here is a
pure function: inputs are never mutated and outputs are re-normalized so
rounding drift cannot accumulate across turns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AllZero,
    DimensionMismatch,
    MissingLikelihoodRow,
    NegativeWeight,
    NonFinite,
    ZeroEvidence,
)

TOL = 1e-9


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Hypothesis:
    id: int
    label: str


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Distribution over hypothesis ids ``0..n-1`` at a given dialogue turn."""

    probs: np.ndarray
    turn: int = 0

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise DimensionMismatch("belief must be a non-empty 1-d vector")
        if not np.all(np.isfinite(probs)):
            raise NonFinite("belief contains non-finite entries")
        if np.any(probs < 0):
            raise NegativeWeight("belief contains negative entries")
        if abs(probs.sum() - 1.0) > TOL:
            raise ValueError(f"belief sums to {probs.sum()!r}, not 1")
        if self.turn < 0:
            raise ValueError("turn must be >= 0")
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, BeliefState):
            return NotImplemented
        return self.turn == other.turn and np.array_equal(self.probs, other.probs)

    __hash__ = None

    @classmethod
    def uniform(cls, n: int) -> "BeliefState":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, index: int) -> "BeliefState":
        probs = np.zeros(n)
        probs[index] = 1.0
        return cls(probs)

    def with_turn(self, turn: int) -> "BeliefState":
        return BeliefState(self.probs, turn)

    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True, eq=False)
class AnswerDistribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > TOL:
            raise ValueError("answer distribution must be non-negative and sum to 1")
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, y: int) -> float:
        return float(self.probs[y])


@dataclass(frozen=True, eq=False)
class AnswerLikelihood:
    """Table of ``p(y | q, theta)``.

    ``tables[q]`` is an ``(n_hypotheses, n_answers(q))`` array whose rows sum
    to one. A row of NaNs marks a hypothesis for which the row is unknown
    (the LLM backend only fills rows it has asked about).
    """

    tables: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        checked = {}
        for q, table in self.tables.items():
            arr = _frozen(table)
            if arr.ndim != 2 or arr.shape[1] < 1:
                raise DimensionMismatch(f"likelihood for question {q} must be 2-d")
            known = ~np.isnan(arr).any(axis=1)
            rows = arr[known]
            if np.any(rows < 0) or not np.all(np.isfinite(rows)):
                raise ValueError(f"likelihood for question {q} has invalid entries")
            if rows.size and np.max(np.abs(rows.sum(axis=1) - 1.0)) > TOL:
                raise ValueError(f"likelihood rows for question {q} must sum to 1")
            checked[int(q)] = arr
        object.__setattr__(self, "tables", checked)

    def __contains__(self, q: int) -> bool:
        return q in self.tables

    def questions(self) -> list[int]:
        return sorted(self.tables)

    def table(self, q: int) -> np.ndarray:
        try:
            return self.tables[q]
        except KeyError:
            raise MissingLikelihoodRow(f"no likelihood for question {q}") from None

    def row(self, q: int, theta: int) -> np.ndarray:
        row = self.table(q)[theta]
        if np.isnan(row).any():
            raise MissingLikelihoodRow(f"no likelihood row for question {q}, hypothesis {theta}")
        return row

    def n_answers(self, q: int) -> int:
        return self.table(q).shape[1]

    @cached_property
    def _stack(self) -> tuple[dict, np.ndarray]:
        qs = self.questions()
        n = max((t.shape[0] for t in self.tables.values()), default=0)
        width = max((t.shape[1] for t in self.tables.values()), default=0)
        full = np.zeros((len(qs), n, width))
        for i, q in enumerate(qs):
            t = self.tables[q]
            full[i, : t.shape[0], : t.shape[1]] = t
        return {q: i for i, q in enumerate(qs)}, full

    def stacked(self, questions) -> np.ndarray:
        """``(len(questions), n_hypotheses, max_answers)`` array, zero-padded.

        NaN rows are carried through; callers restrict to the belief support.
        """
        index, full = self._stack
        try:
            return full[[index[q] for q in questions]]
        except KeyError as exc:
            raise MissingLikelihoodRow(f"no likelihood for question {exc.args[0]}") from None

    def merged(self, other: "AnswerLikelihood") -> "AnswerLikelihood":
        tables = dict(self.tables)
        tables.update(other.tables)
        return AnswerLikelihood(tables)


def normalize(weights: Sequence[float] | np.ndarray, turn: int = 0) -> BeliefState:
    """Scale non-negative weights into a belief state."""
    w = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise NonFinite("weights contain NaN or infinity")
    if np.any(w < 0):
        raise NegativeWeight("weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise AllZero("at least one weight must be positive")
    probs = w / total
    # second pass squeezes the residual rounding error of the first division
    probs = probs / probs.sum()
    return BeliefState(probs, turn)


def _checked_table(b: BeliefState, q: int, likelihood: AnswerLikelihood) -> np.ndarray:
    table = likelihood.table(q)
    if table.shape[0] != len(b):
        raise DimensionMismatch(
            f"likelihood for question {q} covers {table.shape[0]} hypotheses, belief has {len(b)}"
        )
    support = b.probs > 0
    if np.isnan(table[support]).any():
        raise MissingLikelihoodRow(f"question {q} lacks rows for hypotheses in the belief support")
    return table


def bayes_update(b: BeliefState, q: int, y: int, likelihood: AnswerLikelihood) -> BeliefState:
    """Posterior after observing answer ``y`` to question ``q``."""
    table = _checked_table(b, q, likelihood)
    if not 0 <= y < table.shape[1]:
        raise MissingLikelihoodRow(f"answer {y} is outside question {q}'s answer space")
    col = np.nan_to_num(table[:, y], nan=0.0)
    weights = b.probs * col
    if weights.sum() <= 0:
        raise ZeroEvidence(f"answer {y} to question {q} is impossible under the current belief")
    return normalize(weights, b.turn + 1)


def answer_marginal(b: BeliefState, q: int, likelihood: AnswerLikelihood) -> AnswerDistribution:
    """Predictive distribution ``p(y | q, b)`` of the user's answer."""
    table = _checked_table(b, q, likelihood)
    support = b.probs > 0
    probs = b.probs[support] @ table[support]
    return AnswerDistribution(probs / probs.sum())


def max_belief(b: BeliefState) -> tuple[int, float]:
    """Most probable hypothesis; ties go to the lowest id."""
    idx = int(np.argmax(b.probs))
    return idx, float(b.probs[idx])
