"""Episode log records and their line-delimited JSON persistence.

One episode per line. Every line carries ``schema_version``; readers refuse
lines written under a different version instead of guessing at the layout.

Fields of an episode record:

``schema_version``      integer, currently 1
``task``                task name (``animal``, ``medical``, ``flight``, ``shop``, ...)
``policy``              policy config: ``{"kind": ..., "k": ..., "tau": ...}``
``backend``             ``exact`` or ``llm``
``seed``                episode seed; fixes the hidden state and every simulated answer
``truth``/``truth_label``  hidden hypothesis id and label
``k_max``               question budget
``turns``               list of ``{question, answer, belief, report}``; ``belief`` holds the
                        top-5 ``[id, p]`` pairs, the entropy in bits, and optionally the
                        full vector; ``report`` is the VoI scoring for that turn or null
``final_action``/``final_action_label``  committed action (null if the episode failed)
``raw_utility``         U(truth, action)
``cost``                per-question cost c
``net_utility``         raw_utility - (number of turns) * c
``commit_confidence``   max belief probability at commit time
``map_hypothesis``      argmax of the belief at commit time
``correct``             whether the committed action is optimal for the hidden state
``failed``/``error``    backend failure flag and one-line diagnostic
``wall_time``           seconds, only when timing was requested (otherwise null)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import orjson

from .belief import BeliefState
from .engine import VoiReport
from .errors import SchemaVersionMismatch

SCHEMA_VERSION = 1
TOP_K = 5


@dataclass(frozen=True)
class BeliefSnapshot:
    top: tuple[tuple[int, float], ...]
    entropy: float
    probs: Optional[tuple[float, ...]] = None

    @classmethod
    def of(cls, b: BeliefState, full: bool = False) -> "BeliefSnapshot":
        order = np.argsort(-b.probs, kind="stable")[:TOP_K]
        top = tuple((int(i), float(b.probs[i])) for i in order)
        probs = tuple(float(p) for p in b.probs) if full else None
        return cls(top, b.entropy(), probs)

    def to_dict(self) -> dict:
        d = {"top": [list(t) for t in self.top], "entropy": self.entropy}
        if self.probs is not None:
            d["probs"] = list(self.probs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BeliefSnapshot":
        probs = d.get("probs")
        return cls(
            tuple((int(i), float(p)) for i, p in d["top"]),
            float(d["entropy"]),
            tuple(float(p) for p in probs) if probs is not None else None,
        )


@dataclass(frozen=True)
class TurnRecord:
    question: int
    answer: int
    belief: BeliefSnapshot
    report: Optional[VoiReport] = None

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "belief": self.belief.to_dict(),
            "report": self.report.to_dict() if self.report is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TurnRecord":
        report = d.get("report")
        return cls(
            int(d["question"]),
            int(d["answer"]),
            BeliefSnapshot.from_dict(d["belief"]),
            VoiReport.from_dict(report) if report is not None else None,
        )


@dataclass(frozen=True)
class EpisodeLog:
    task: str
    policy: dict
    backend: str
    seed: int
    truth: int
    truth_label: str
    k_max: int
    turns: tuple[TurnRecord, ...]
    final_action: Optional[int]
    final_action_label: Optional[str]
    raw_utility: float
    cost: float
    net_utility: float
    commit_confidence: Optional[float]
    map_hypothesis: Optional[int]
    correct: bool
    failed: bool = False
    error: Optional[str] = None
    wall_time: Optional[float] = None
    schema_version: int = field(default=SCHEMA_VERSION)

    @property
    def n_turns(self) -> int:
        return len(self.turns)

    @property
    def asked(self) -> list[int]:
        return [t.question for t in self.turns]

    @property
    def policy_label(self) -> str:
        return policy_label(self.policy)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["turns"] = [t.to_dict() for t in self.turns]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeLog":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"log schema version {version!r}, this build reads {SCHEMA_VERSION}"
            )
        d = dict(d)
        d["turns"] = tuple(TurnRecord.from_dict(t) for t in d["turns"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def policy_label(config: dict) -> str:
    kind = config.get("kind", "?")
    if kind == "fixed_round":
        return f"fixed_round(k={config['k']})"
    if kind == "confidence":
        return f"confidence(tau={config['tau']})"
    return kind


def write_logs(logs: Iterable[EpisodeLog], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(log.to_json())
            fh.write("\n")
    return path


def read_logs(path) -> list[EpisodeLog]:
    logs = []
    with Path(path).open("rb") as fh:
        for line in fh:
            if line.strip():
                logs.append(EpisodeLog.from_dict(orjson.loads(line)))
    return logs
