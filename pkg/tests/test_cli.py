import csv
import re
import io
import subprocess
import sys

import pytest

from voiclarify.cli import ALL, FLAGS, build_parser, main, parse_seeds, UsageError
from voiclarify.records import read_logs


def run(argv, stdin=""):
    out = io.StringIO()
    code = main(argv, stdin=io.StringIO(stdin), stdout=out)
    return code, out.getvalue()


def table(text):
    return list(csv.DictReader(io.StringIO(text), delimiter="\t"))


class TestHelp:
    @pytest.mark.parametrize("command", ALL)
    def test_help_lists_registry(self, command, capsys):
        assert run([command, "--help"])[0] == 0
        text = capsys.readouterr().out
        shown = set(re.findall(r"(?<![\w-])--[a-z][a-z-]*", text))
        for flag, (_, commands) in FLAGS.items():
            assert (flag in shown) == (command in commands), flag

    def test_parser_flags_are_registered(self):
        parser = build_parser()
        sub = next(a for a in parser._actions if a.dest == "command")
        for name, p in sub.choices.items():
            flags = {s for a in p._actions for s in a.option_strings if s.startswith("--") and s != "--help"}
            assert flags <= set(FLAGS), name

    def test_no_command(self):
        assert run([])[0] == 1


class TestExitCodes:
    def test_bad_flag(self):
        assert run(["run", "--bogus"])[0] == 1

    def test_unknown_task(self):
        assert run(["run", "--task", "chess"])[0] == 1

    def test_bad_seeds(self):
        assert run(["run", "--seeds", "a-b"])[0] == 1

    def test_llm_flags_with_exact(self):
        assert run(["run", "--task", "toy", "--endpoint", "http://x"])[0] == 1

    def test_seed_and_seeds(self):
        assert run(["run", "--seed", "1", "--seeds", "0-3"])[0] == 1

    def test_missing_logs(self, tmp_path):
        assert run(["calibrate", "--logs", str(tmp_path / "none.jsonl")])[0] == 1

    def test_runtime_failure(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"schema_version": 99}\n')
        assert run(["calibrate", "--logs", str(bad)])[0] == 2

    def test_fixed_round_needs_k(self):
        assert run(["run", "--task", "toy", "--policy", "fixed_round"])[0] == 1


def test_parse_seeds():
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("1,5,9") == [1, 5, 9]
    with pytest.raises(UsageError):
        parse_seeds("")


def test_run_writes_logs(tmp_path):
    path = tmp_path / "e.jsonl"
    code, out = run(["run", "--task", "medical", "--seeds", "0-4", "--cost", "0.05", "--out", str(path)])
    assert code == 0
    assert len(read_logs(path)) == 5
    (row,) = table(out)
    assert row["policy"] == "voi" and row["episodes"] == "5"


def test_fixed_zero_equals_no_question(tmp_path):
    argv = ["--task", "medical", "--seeds", "0-9", "--cost", "0.1"]
    _, sweep = run(["sweep", "--policy", "fixed_round", "--k", "0", "--out", str(tmp_path / "s")] + argv)
    _, single = run(["run", "--policy", "no_question"] + argv)
    a = table((tmp_path / "s" / "summary.tsv").read_text())[0]
    b = table(single)[0]
    cols = ("accuracy", "mean_turns", "mean_raw", "mean_net", "se_net")
    assert [a[c] for c in cols] == [b[c] for c in cols]


def test_sweep_and_report_agree(tmp_path):
    out = tmp_path / "s"
    code, comparison = run(["sweep", "--task", "mixed20q", "--seeds", "0-2", "--cost", "0.05,0.2", "--out", str(out)])
    assert code == 0
    assert (out / "config.yaml").read_text().startswith("# config hash ")
    rep = tmp_path / "r"
    assert run(["report", "--logs", str(out / "episodes.jsonl"), "--out", str(rep)])[0] == 0
    assert (rep / "summary.tsv").read_text() == (out / "summary.tsv").read_text()
    assert (rep / "comparison.tsv").read_text() == (out / "comparison.tsv").read_text() == comparison
    assert (rep / "utility_mixed20q_c0.05.png").stat().st_size > 0
    assert (rep / "calibration_animal.png").exists() and (rep / "curves.tsv").exists()


def test_sweep_is_reproducible(tmp_path):
    argv = ["sweep", "--task", "medical", "--seeds", "0-3", "--cost", "0.05"]
    run(argv + ["--out", str(tmp_path / "a")])
    run(argv + ["--out", str(tmp_path / "b"), "--workers", "2"])
    for name in ("summary.tsv", "config.yaml", "episodes.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_calibrate(tmp_path):
    path = tmp_path / "e.jsonl"
    run(["run", "--task", "animal", "--policy", "fixed_round", "--k", "10", "--seeds", "0-9", "--out", str(path)])
    code, out = run(["calibrate", "--logs", str(path)])
    assert code == 0 and out.startswith("# animal\nlo\thi\tcount")
    assert sum(int(r["count"]) for r in table(out.split("\n", 1)[1])) == 10


class TestConfig:
    def test_file_then_flag(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("task: medical\ncost: 0.2\nseeds: 0-1\n")
        _, out = run(["run", "--config", str(cfg)])
        row = table(out)[0]
        assert (row["task"], row["cost"], row["episodes"]) == ("medical", "0.200000", "2")
        _, out = run(["run", "--config", str(cfg), "--cost", "0.01"])
        assert table(out)[0]["cost"] == "0.010000"

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("colour: blue\n")
        assert run(["run", "--config", str(cfg)])[0] == 1

    def test_missing_file(self, tmp_path):
        assert run(["run", "--config", str(tmp_path / "no.yaml")])[0] == 1

    def test_bundled_example(self):
        from pathlib import Path

        example = Path(__file__).parent.parent / "configs" / "example.yaml"
        parser = build_parser()
        from voiclarify.cli import _settings

        s = _settings(parser.parse_args(["run", "--config", str(example)]))
        assert s["backend"] == "exact"


class TestPlay:
    def test_toy_dialogue(self):
        code, out = run(["play", "--cost", "0.1"], stdin="maybe\nyes\n")
        assert code == 0
        assert "Q1: Is it A? [yes / no]" in out
        assert "please answer one of: yes, no" in out
        assert "Decision: guess A" in out
        assert "Questions asked: 1, expected utility 1.0000, cost 0.1000, net 0.9000" in out

    def test_numbered_answer(self):
        _, out = run(["play", "--cost", "0.1"], stdin="2\n")
        assert "Decision: guess B" in out

    def test_high_cost_commits(self):
        _, out = run(["play", "--cost", "0.9"])
        assert "Questions asked: 0" in out

    def test_input_runs_out(self):
        assert run(["play", "--cost", "0.1"], stdin="")[0] == 2

    def test_mixed_rejected(self):
        assert run(["play", "--task", "mixed20q"])[0] == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "voiclarify.cli", "run", "--task", "toy", "--seeds", "0"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("task\tpolicy")
