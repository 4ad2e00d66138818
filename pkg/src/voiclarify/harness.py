"""Episodes, cost sweeps, summary tables and calibration.

Sweeps pair every policy with the same episode seeds (common random
numbers): a given seed fixes the hidden user state and the answer stream,
so policy differences are not blurred by different simulated users.

Summary rows report means plus the standard error of the mean net utility.
A combined row for a composite task (``mixed20q``) scores one game of each
component, so its utility, cost and turn columns are sums of the component
means and its accuracy is the mean of the component accuracies.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .engine import CostModel, Policy, run_policy
from .policies import PolicyConfig, baseline_grid, build_policy
from .records import EpisodeLog, policy_label
from .tasks import SUBTASKS, build_task

DEFAULT_COSTS = (0.01, 0.02, 0.05, 0.10, 0.20)
DEFAULT_BIN_WIDTH = 0.2
COMPOSITES = {name: parts for name, parts in SUBTASKS.items() if len(parts) > 1}


def net_utility(raw: float, turns: int, c: float) -> float:
    if turns < 0 or c < 0:
        raise ValueError("turns and c must be non-negative")
    return raw - turns * c


def make_estimator(backend: str = "exact", llm_config=None, **kwargs):
    if backend == "exact":
        from .estimators.exact import ExactEstimator

        return ExactEstimator(**kwargs)
    if backend == "llm":
        from .estimators.client import ChatClient, LlmConfig
        from .estimators.llm import LlmEstimator

        return LlmEstimator(ChatClient(llm_config or LlmConfig()), **kwargs)
    raise ValueError(f"unknown backend {backend!r}; choose exact or llm")


def run_episode(
    policy: Union[PolicyConfig, Policy],
    task,
    estimator,
    cost: Union[float, CostModel],
    k_max: Optional[int] = None,
    seed: int = 0,
    **kwargs,
) -> EpisodeLog:
    """One clarify-or-commit dialogue; ``k_max`` defaults to the task's budget."""
    cost = cost if isinstance(cost, CostModel) else CostModel(float(cost))
    k_max = task.k_max_default if k_max is None else k_max
    if isinstance(policy, PolicyConfig):
        return run_policy(build_policy(policy), task, estimator, cost, k_max, seed, policy.to_dict(), **kwargs)
    return run_policy(policy, task, estimator, cost, k_max, seed, **kwargs)


# -- sweeps ----------------------------------------------------------------


def default_policies() -> tuple[PolicyConfig, ...]:
    return tuple(baseline_grid()) + (PolicyConfig("voi"),)


@dataclass(frozen=True)
class SweepConfig:
    tasks: tuple[str, ...] = ("mixed20q",)
    policies: tuple[PolicyConfig, ...] = field(default_factory=default_policies)
    costs: tuple[float, ...] = DEFAULT_COSTS
    seeds: tuple[int, ...] = tuple(range(200))
    k_max: Optional[int] = None
    backend: str = "exact"
    noise: Optional[float] = None

    def __post_init__(self):
        for name in ("tasks", "policies", "costs", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"sweep needs at least one entry in {name}")
        for t in self.tasks:
            if t not in SUBTASKS:
                raise ValueError(f"unknown task {t!r}")
        if any(c < 0 for c in self.costs):
            raise ValueError("costs must be non-negative")

    def to_dict(self) -> dict:
        return {
            "tasks": list(self.tasks),
            "policies": [p.to_dict() for p in self.policies],
            "costs": list(self.costs),
            "seeds": list(self.seeds),
            "k_max": self.k_max,
            "backend": self.backend,
            "noise": self.noise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        return cls(
            tasks=tuple(d["tasks"]),
            policies=tuple(PolicyConfig.from_dict(p) for p in d["policies"]),
            costs=tuple(float(c) for c in d["costs"]),
            seeds=tuple(int(s) for s in d["seeds"]),
            k_max=d.get("k_max"),
            backend=d.get("backend", "exact"),
            noise=d.get("noise"),
        )

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def cells(self) -> list[tuple[str, PolicyConfig, float]]:
        """(subtask, policy, cost) triples; composite tasks expand to their parts."""
        subtasks = []
        for t in self.tasks:
            for part in SUBTASKS[t]:
                if part not in subtasks:
                    subtasks.append(part)
        return [(t, p, c) for t in subtasks for p in self.policies for c in self.costs]


@dataclass(frozen=True)
class CellFailure:
    task: str
    policy: str
    cost: float
    error: str


@dataclass
class SweepResult:
    config: SweepConfig
    logs: list[EpisodeLog]
    rows: list["SummaryRow"]
    failures: list[CellFailure]

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()


def _run_cell(cell, config: SweepConfig, estimator=None) -> list[EpisodeLog]:
    task_name, policy, cost = cell
    estimator = estimator if estimator is not None else make_estimator(config.backend)
    logs = []
    for seed in config.seeds:
        task = build_task(task_name, seed, config.noise)
        logs.append(run_episode(policy, task, estimator, cost, config.k_max, seed))
    return logs


def _cell_job(args):
    cell, config = args
    try:
        return _run_cell(cell, config), None
    except Exception as exc:  # noqa: BLE001 - a failing cell must not sink the sweep
        return [], f"{type(exc).__name__}: {exc}"


def run_sweep(
    config: SweepConfig,
    workers: int = 1,
    estimator=None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> SweepResult:
    """Run every cell of the grid and aggregate.

    With ``workers > 1`` cells run in separate processes, each building its
    own backend; pass ``estimator`` to run in-process with a shared backend.
    """
    cells = config.cells()
    outcomes: list[tuple[list[EpisodeLog], Optional[str]]] = []
    if workers > 1 and estimator is None:
        with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1)) as pool:
            for i, out in enumerate(pool.map(_cell_job, [(c, config) for c in cells])):
                outcomes.append(out)
                if progress:
                    progress(i + 1, len(cells))
    else:
        for i, cell in enumerate(cells):
            try:
                outcomes.append((_run_cell(cell, config, estimator), None))
            except Exception as exc:  # noqa: BLE001
                outcomes.append(([], f"{type(exc).__name__}: {exc}"))
            if progress:
                progress(i + 1, len(cells))
    logs: list[EpisodeLog] = []
    failures = []
    for (task_name, policy, cost), (cell_logs, error) in zip(cells, outcomes):
        logs.extend(cell_logs)
        if error is not None:
            failures.append(CellFailure(task_name, policy.label, cost, error))
    return SweepResult(config, logs, summarize(logs), failures)


# -- aggregation -----------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    task: str
    policy: str
    kind: str
    param: Optional[float]
    cost: float
    episodes: int
    accuracy: float
    mean_turns: float
    mean_raw: float
    mean_net: float
    se_net: float
    failed: int = 0

    def __post_init__(self):
        if self.episodes <= 0:
            raise ValueError("a summary row needs at least one episode")


def _param(config: dict) -> Optional[float]:
    if config.get("kind") == "fixed_round":
        return float(config["k"])
    if config.get("kind") == "confidence":
        return float(config["tau"])
    return None


def _row(task: str, config: dict, cost: float, logs: Sequence[EpisodeLog]) -> SummaryRow:
    net = np.array([l.net_utility for l in logs])
    se = float(net.std(ddof=1) / math.sqrt(len(net))) if len(net) > 1 else 0.0
    return SummaryRow(
        task=task,
        policy=policy_label(config),
        kind=config.get("kind", "?"),
        param=_param(config),
        cost=cost,
        episodes=len(logs),
        accuracy=float(np.mean([l.correct for l in logs])),
        mean_turns=float(np.mean([l.n_turns for l in logs])),
        mean_raw=float(np.mean([l.raw_utility for l in logs])),
        mean_net=float(net.mean()),
        se_net=se,
        failed=sum(l.failed for l in logs),
    )


def _combined(task: str, parts: Sequence[SummaryRow]) -> SummaryRow:
    first = parts[0]
    return SummaryRow(
        task=task,
        policy=first.policy,
        kind=first.kind,
        param=first.param,
        cost=first.cost,
        episodes=min(p.episodes for p in parts),
        accuracy=float(np.mean([p.accuracy for p in parts])),
        mean_turns=float(sum(p.mean_turns for p in parts)),
        mean_raw=float(sum(p.mean_raw for p in parts)),
        mean_net=float(sum(p.mean_net for p in parts)),
        se_net=float(math.sqrt(sum(p.se_net**2 for p in parts))),
        failed=sum(p.failed for p in parts),
    )


def summarize(logs: Iterable[EpisodeLog], composites=COMPOSITES) -> list[SummaryRow]:
    """One row per (task, policy, cost), plus composite rows when every part is present.

    Rows are sorted, so the result does not depend on the order of ``logs``.
    """
    groups: dict[tuple, list[EpisodeLog]] = defaultdict(list)
    configs: dict[str, dict] = {}
    for log in logs:
        key = json.dumps(log.policy, sort_keys=True)
        configs[key] = log.policy
        groups[(log.task, key, log.cost)].append(log)
    rows = {k: _row(k[0], configs[k[1]], k[2], sorted(v, key=lambda l: l.seed)) for k, v in groups.items()}
    for name, parts in composites.items():
        for (task, key, cost) in list(rows):
            if task != parts[0]:
                continue
            members = [rows.get((p, key, cost)) for p in parts]
            if all(members):
                rows[(name, key, cost)] = _combined(name, members)
    return sorted(rows.values(), key=lambda r: (r.task, r.cost, r.kind, r.param if r.param is not None else -1.0))


@dataclass(frozen=True)
class BaselineComparison:
    """Best and second-best baseline at one cost level, against the VoI policy."""

    task: str
    cost: float
    best: str
    r_max: float
    second: str
    r_second: float
    r_voi: Optional[float]
    delta_max: Optional[float]
    delta_second: Optional[float]


def compare_baselines(rows: Sequence[SummaryRow], task: str) -> list[BaselineComparison]:
    out = []
    for cost in sorted({r.cost for r in rows if r.task == task}):
        at = [r for r in rows if r.task == task and r.cost == cost]
        baselines = sorted((r for r in at if r.kind != "voi"), key=lambda r: (-r.mean_net, r.policy))
        voi = next((r for r in at if r.kind == "voi"), None)
        if not baselines:
            continue
        best = baselines[0]
        second = baselines[1] if len(baselines) > 1 else baselines[0]
        r_voi = voi.mean_net if voi else None
        out.append(
            BaselineComparison(
                task,
                cost,
                best.policy,
                best.mean_net,
                second.policy,
                second.mean_net,
                r_voi,
                None if r_voi is None else r_voi - best.mean_net,
                None if r_voi is None else r_voi - second.mean_net,
            )
        )
    return out


def compare_all(rows: Sequence[SummaryRow]) -> list[BaselineComparison]:
    return [c for task in sorted({r.task for r in rows}) for c in compare_baselines(rows, task)]


def utility_curves(rows: Sequence[SummaryRow], task: str, cost: float) -> dict[str, list[tuple[float, float]]]:
    """(mean turns, mean net utility) points per policy family at one cost level."""
    curves: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for r in rows:
        if r.task == task and r.cost == cost:
            curves[r.kind].append((r.mean_turns, r.mean_net))
    return {k: sorted(v) for k, v in curves.items()}


# -- calibration -----------------------------------------------------------


@dataclass(frozen=True)
class CalibrationBin:
    lo: float
    hi: float
    count: int
    mean_confidence: Optional[float]
    accuracy: Optional[float]  # None marks an empty bin

    @property
    def gap(self) -> Optional[float]:
        if self.count == 0:
            return None
        return abs(self.accuracy - self.mean_confidence)


def calibration_report(logs: Iterable[EpisodeLog], bin_width: float = DEFAULT_BIN_WIDTH) -> list[CalibrationBin]:
    """Bin committed episodes by the top belief probability; score the argmax.

    Bins are ``[lo, hi)`` except the last, which also takes probability 1.
    Failed episodes carry no belief and are skipped.
    """
    if not 0 < bin_width <= 1:
        raise ValueError("bin_width must lie in (0, 1]")
    n_bins = int(round(1 / bin_width))
    if not math.isclose(n_bins * bin_width, 1.0):
        raise ValueError("bin_width must divide 1")
    conf = [[] for _ in range(n_bins)]
    hits = [[] for _ in range(n_bins)]
    for log in logs:
        if log.failed or log.commit_confidence is None:
            continue
        p = log.commit_confidence
        i = min(int(p / bin_width + 1e-12), n_bins - 1)
        conf[i].append(p)
        hits[i].append(log.map_hypothesis == log.truth)
    bins = []
    for i in range(n_bins):
        lo, hi = round(i * bin_width, 10), round((i + 1) * bin_width, 10)
        if conf[i]:
            bins.append(CalibrationBin(lo, hi, len(conf[i]), float(np.mean(conf[i])), float(np.mean(hits[i]))))
        else:
            bins.append(CalibrationBin(lo, hi, 0, None, None))
    return bins


# -- cost monotonicity check ------------------------------------------------


@dataclass(frozen=True)
class MonotonicityViolation:
    seed: int
    cheap_cost: float
    dear_cost: float
    cheap_questions: tuple[int, ...]
    dear_questions: tuple[int, ...]


def check_cost_monotonicity(
    task,
    estimator,
    costs: Sequence[float],
    seeds: Iterable[int],
    k_max: Optional[int] = None,
) -> list[MonotonicityViolation]:
    """Per seed, the questions asked at a higher cost must prefix those at a lower cost.

    Only meaningful for the VoI policy with a constant cost and an exact
    backend; returns the violations found (empty when the property holds).
    """
    ordered = sorted(costs)
    violations = []
    for seed in seeds:
        asked = {c: tuple(run_episode(PolicyConfig("voi"), task, estimator, c, k_max, seed).asked) for c in ordered}
        for cheap, dear in zip(ordered, ordered[1:]):
            a, b = asked[cheap], asked[dear]
            if a[: len(b)] != b:
                violations.append(MonotonicityViolation(seed, cheap, dear, a, b))
    return violations


# -- delimited output --------------------------------------------------------

SUMMARY_COLUMNS = ("task", "policy", "param", "cost", "episodes", "accuracy", "mean_turns", "mean_raw", "mean_net", "se_net", "failed")
COMPARISON_COLUMNS = ("task", "cost", "best", "r_max", "second", "r_second", "r_voi", "delta_max", "delta_second")
CALIBRATION_COLUMNS = ("lo", "hi", "count", "mean_confidence", "accuracy")


def _cell(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def format_table(records: Sequence, columns: Sequence[str], delimiter: str = "\t") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        d = asdict(rec)
        writer.writerow([_cell(d[c]) for c in columns])
    return buf.getvalue()
