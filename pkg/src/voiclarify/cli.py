"""``voiclarify`` command line.

Settings are layered: command-line flags override values from ``--config``
(a YAML file), which override the built-in defaults. API keys are read from
the environment only.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

import yaml

from .engine import Clarify, CostModel, DialogueState
from .errors import VoiError
from .policies import KINDS, PolicyConfig, baseline_grid, build_policy

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

# every flag the CLI accepts: name -> (argparse kwargs, subcommands that take it)
ALL = ("run", "sweep", "calibrate", "report", "play")
FLAGS = {
    "--config": (dict(help="YAML file with default settings; flags override it"), ALL),
    "--seed": (dict(type=int, help="single episode seed"), ALL),
    "--out": (dict(help="output file (run, calibrate) or directory (sweep, report)"), ALL),
    "--task": (dict(help="task: animal, medical, mixed20q, flight, shop, toy (sweep: comma list)"), ("run", "sweep", "play")),
    "--policy": (dict(help=f"policy kind, one of {', '.join(KINDS)} (sweep: comma list or 'grid')"), ("run", "sweep", "play")),
    "--k": (dict(help="question count for fixed_round (sweep: comma list)"), ("run", "sweep", "play")),
    "--tau": (dict(help="confidence threshold for confidence (sweep: comma list)"), ("run", "sweep", "play")),
    "--cost": (dict(help="per-question cost c (sweep: comma list)"), ("run", "sweep", "play")),
    "--k-max": (dict(type=int, help="question budget (default: the task's own)"), ("run", "sweep", "play")),
    "--seeds": (dict(help="episode seeds, e.g. '0-199' or '1,5,9'"), ("run", "sweep")),
    "--backend": (dict(choices=("exact", "llm"), help="belief backend"), ("run", "sweep", "play")),
    "--endpoint": (dict(help="chat-completions URL for the llm backend"), ("run", "sweep", "play")),
    "--model": (dict(help="model name for the llm backend"), ("run", "sweep", "play")),
    "--workers": (dict(type=int, help="parallel worker processes for sweeps"), ("sweep",)),
    "--logs": (dict(help="episode log file (JSONL) to read"), ("calibrate", "report")),
    "--bin-width": (dict(type=float, help="calibration bin width (default 0.2)"), ("calibrate", "report")),
}

DEFAULTS = {
    "task": "mixed20q",
    "policy": "voi",
    "cost": "0.05",
    "seeds": "0-99",
    "backend": "exact",
    "model": "gpt-4o",
    "workers": 1,
    "bin_width": 0.2,
}
SWEEP_COSTS = "0.01,0.02,0.05,0.1,0.2"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voiclarify", description="Value-of-information clarification experiments.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "run": "run one policy and write episode logs",
        "sweep": "run a policy x cost grid and write summary tables",
        "calibrate": "bin episode logs by belief confidence",
        "report": "turn episode logs into tables and figures",
        "play": "answer the agent's questions yourself",
    }
    for name in ALL:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        for flag, (kwargs, commands) in FLAGS.items():
            if name in commands:
                p.add_argument(flag, default=None, **kwargs)
    return parser


# -- settings --------------------------------------------------------------


def _settings(args: argparse.Namespace) -> dict:
    file_values = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file {path} does not exist")
        file_values = yaml.safe_load(path.read_text()) or {}
        if not isinstance(file_values, dict):
            raise UsageError("config file must hold a mapping")
        file_values = {k.replace("-", "_"): v for k, v in file_values.items()}
        known = {f.lstrip("-").replace("-", "_") for f in FLAGS}
        unknown = set(file_values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(DEFAULTS)
    merged.update(file_values)
    merged.update({k: v for k, v in vars(args).items() if v is not None and k != "command"})
    # per-command defaults that differ from the shared ones
    command_defaults = {"sweep": {"cost": SWEEP_COSTS, "policy": "grid"}, "play": {"task": "toy", "seeds": "0"}}
    for key, value in command_defaults.get(args.command, {}).items():
        if key not in file_values and getattr(args, key, None) is None:
            merged[key] = value
    if getattr(args, "seed", None) is not None and getattr(args, "seeds", None) is not None:
        raise UsageError("give either --seed or --seeds, not both")
    if merged.get("seed") is not None and getattr(args, "seeds", None) is None:
        merged["seeds"] = str(merged["seed"])
    llm_flags = getattr(args, "endpoint", None) or getattr(args, "model", None)
    if merged["backend"] == "exact" and llm_flags:
        raise UsageError("--endpoint and --model only apply to the llm backend")
    return merged


def _split(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def parse_seeds(value) -> list[int]:
    seeds = []
    try:
        for part in _split(value):
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise UsageError(f"cannot read seeds from {value!r}") from None
    if not seeds:
        raise UsageError("no seeds given")
    return seeds


def _floats(value, what: str) -> list[float]:
    try:
        return [float(v) for v in _split(value)]
    except ValueError:
        raise UsageError(f"cannot read {what} from {value!r}") from None


def _policy(s: dict) -> PolicyConfig:
    kind = s["policy"]
    if kind not in KINDS:
        raise UsageError(f"unknown policy {kind!r}; choose from {', '.join(KINDS)}")
    try:
        k = int(s["k"]) if kind == "fixed_round" and s.get("k") is not None else None
        tau = float(s["tau"]) if kind == "confidence" and s.get("tau") is not None else None
        return PolicyConfig(kind, k=k, tau=tau)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _sweep_policies(s: dict) -> list[PolicyConfig]:
    names = _split(s["policy"])
    try:
        rounds = [int(v) for v in _split(s["k"])] if s.get("k") is not None else [0, 5, 10, 15, 20]
    except ValueError:
        raise UsageError(f"cannot read k from {s['k']!r}") from None
    taus = _floats(s["tau"], "tau") if s.get("tau") is not None else [0.5, 0.7, 0.9]
    out: list[PolicyConfig] = []
    for name in names:
        if name == "grid":
            out += baseline_grid(rounds, taus) + [PolicyConfig("voi")]
        elif name == "fixed_round":
            out += [PolicyConfig("fixed_round", k=k) for k in rounds]
        elif name == "confidence":
            out += [PolicyConfig("confidence", tau=t) for t in taus]
        elif name in KINDS:
            out.append(PolicyConfig(name))
        else:
            raise UsageError(f"unknown policy {name!r}")
    return list(dict.fromkeys(out))


def _estimator(s: dict):
    from .harness import make_estimator

    if s["backend"] == "llm":
        from .estimators.client import LlmConfig

        cfg = LlmConfig(model=s["model"], **({"endpoint": s["endpoint"]} if s.get("endpoint") else {}))
        return make_estimator("llm", cfg)
    return make_estimator("exact")


def _check_task(name: str):
    from .tasks import SUBTASKS

    if name not in SUBTASKS:
        raise UsageError(f"unknown task {name!r}; choose from {', '.join(sorted(SUBTASKS))}")


# -- subcommands -------------------------------------------------------------


def cmd_run(s: dict, out: TextIO) -> int:
    from .harness import SUMMARY_COLUMNS, format_table, run_episode, summarize
    from .records import write_logs
    from .tasks import SUBTASKS, build_task

    _check_task(s["task"])
    policy = _policy(s)
    cost = _floats(s["cost"], "cost")
    if len(cost) != 1:
        raise UsageError("run takes a single --cost")
    seeds = parse_seeds(s["seeds"])
    estimator = _estimator(s)
    logs = []
    for part in SUBTASKS[s["task"]]:
        for seed in seeds:
            task = build_task(part, seed)
            logs.append(run_episode(policy, task, estimator, cost[0], s.get("k_max"), seed))
    if s.get("out"):
        write_logs(logs, s["out"])
    out.write(format_table(summarize(logs), SUMMARY_COLUMNS))
    return EXIT_OK


def cmd_sweep(s: dict, out: TextIO) -> int:
    from .harness import COMPARISON_COLUMNS, SUMMARY_COLUMNS, SweepConfig, compare_all, format_table, run_sweep
    from .records import write_logs

    tasks = _split(s["task"])
    for t in tasks:
        _check_task(t)
    config = SweepConfig(
        tasks=tuple(tasks),
        policies=tuple(_sweep_policies(s)),
        costs=tuple(_floats(s["cost"], "cost")),
        seeds=tuple(parse_seeds(s["seeds"])),
        k_max=s.get("k_max"),
        backend=s["backend"],
    )
    estimator = _estimator(s) if s["backend"] == "llm" else None
    result = run_sweep(config, workers=int(s["workers"]), estimator=estimator)
    summary = format_table(result.rows, SUMMARY_COLUMNS)
    comparison = format_table(compare_all(result.rows), COMPARISON_COLUMNS)
    if s.get("out"):
        root = Path(s["out"])
        root.mkdir(parents=True, exist_ok=True)
        write_logs(result.logs, root / "episodes.jsonl")
        (root / "summary.tsv").write_text(summary)
        (root / "comparison.tsv").write_text(comparison)
        (root / "config.yaml").write_text(
            f"# config hash {result.config_hash}\n" + yaml.safe_dump(config.to_dict(), sort_keys=True)
        )
    out.write(comparison)
    for f in result.failures:
        print(f"cell failed: {f.task} {f.policy} c={f.cost}: {f.error}", file=sys.stderr)
    return EXIT_OK if not result.failures else EXIT_RUNTIME


def _read(s: dict):
    from .records import read_logs

    if not s.get("logs"):
        raise UsageError("--logs is required")
    if not Path(s["logs"]).is_file():
        raise UsageError(f"log file {s['logs']} does not exist")
    return read_logs(s["logs"])


def cmd_calibrate(s: dict, out: TextIO) -> int:
    from .harness import CALIBRATION_COLUMNS, calibration_report, format_table

    logs = _read(s)
    text = ""
    for task in sorted({l.task for l in logs}):
        bins = calibration_report([l for l in logs if l.task == task], float(s["bin_width"]))
        text += f"# {task}\n" + format_table(bins, CALIBRATION_COLUMNS)
    if s.get("out"):
        Path(s["out"]).write_text(text)
    out.write(text)
    return EXIT_OK


def cmd_report(s: dict, out: TextIO) -> int:
    from . import plots
    from .harness import (
        CALIBRATION_COLUMNS,
        COMPARISON_COLUMNS,
        SUMMARY_COLUMNS,
        calibration_report,
        compare_all,
        format_table,
        summarize,
    )

    logs = _read(s)
    root = Path(s.get("out") or "report")
    root.mkdir(parents=True, exist_ok=True)
    rows = summarize(logs)
    tasks = sorted({r.task for r in rows})
    summary = format_table(rows, SUMMARY_COLUMNS)
    comparison = format_table(compare_all(rows), COMPARISON_COLUMNS)
    (root / "summary.tsv").write_text(summary)
    (root / "comparison.tsv").write_text(comparison)
    curve_lines = ["task\tcost\tpolicy\tkind\tmean_turns\tmean_net"]
    for r in rows:
        curve_lines.append(f"{r.task}\t{r.cost:.6f}\t{r.policy}\t{r.kind}\t{r.mean_turns:.6f}\t{r.mean_net:.6f}")
    (root / "curves.tsv").write_text("\n".join(curve_lines) + "\n")
    for task in tasks:
        for cost in sorted({r.cost for r in rows if r.task == task}):
            plots.utility_vs_turns(rows, task, cost, root / f"utility_{task}_c{cost:g}.png")
    calib = ""
    for task in sorted({l.task for l in logs}):
        bins = calibration_report([l for l in logs if l.task == task], float(s["bin_width"]))
        calib += f"# {task}\n" + format_table(bins, CALIBRATION_COLUMNS)
        plots.reliability_diagram(bins, task, root / f"calibration_{task}.png")
    (root / "calibration.tsv").write_text(calib)
    out.write(comparison)
    return EXIT_OK


def _read_answer(labels: Sequence[str], inp: TextIO, out: TextIO) -> int:
    firsts = [l[0].lower() for l in labels]
    shortcuts = {f: i for i, f in enumerate(firsts) if firsts.count(f) == 1}
    while True:
        line = inp.readline()
        if not line:
            raise VoiError("input ended before the dialogue finished")
        text = line.strip().lower()
        for i, label in enumerate(labels):
            if text == label.lower():
                return i
        if text in shortcuts:
            return shortcuts[text]
        if text.isdigit() and 1 <= int(text) <= len(labels):
            return int(text) - 1
        out.write(f"please answer one of: {', '.join(labels)}\n> ")
        out.flush()


def cmd_play(s: dict, out: TextIO, inp: TextIO) -> int:
    from .engine import best_action_value
    from .tasks import build_task

    name = s["task"]
    _check_task(name)
    if name == "mixed20q":
        raise UsageError("play one subtask at a time (animal or medical)")
    policy_cfg = _policy(s)
    cost = CostModel(_floats(s["cost"], "cost")[0])
    seed = parse_seeds(s["seeds"])[0]
    task = build_task(name, seed)
    estimator = _estimator(s)
    policy = build_policy(policy_cfg)
    k_max = s.get("k_max") or task.k_max_default
    out.write(f"{task.initial_query}\n")
    if task.kind == "attribute":
        out.write(f"Options: {', '.join(task.labels)}\n")
    belief = estimator.prior(task)
    state = DialogueState(task, estimator, belief, cost, k_max)
    while state.turn < k_max:
        decision = policy(state)
        if not isinstance(decision, Clarify):
            break
        q = task.questions[decision.question]
        labels = q.answer_labels
        out.write(f"Q{state.turn + 1}: {decision.text or q.text} [{' / '.join(labels)}]\n> ")
        out.flush()
        y = _read_answer(labels, inp, out)
        belief = estimator.posterior(state, q.id, y)
        state = DialogueState(task, estimator, belief, cost, k_max, state.asked + (q.id,), state.answers + (y,))
    action, value = best_action_value(state.belief, task.utility)
    spent = cost.total(state.asked)
    out.write(f"Decision: {task.actions[action]}\n")
    out.write(f"Questions asked: {state.turn}, expected utility {value:.4f}, cost {spent:.4f}, net {value - spent:.4f}\n")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None, stdin: TextIO = None, stdout: TextIO = None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(stdout)
            return EXIT_USAGE
        settings = _settings(args)
        if args.command == "play":
            return cmd_play(settings, stdout, stdin)
        handler = {"run": cmd_run, "sweep": cmd_sweep, "calibrate": cmd_calibrate, "report": cmd_report}[args.command]
        return handler(settings, stdout)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        print("run 'voiclarify COMMAND --help' for the list of flags", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except (VoiError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
