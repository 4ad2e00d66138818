import json
import time

import pytest

from voiclarify.errors import SchemaVersionMismatch
from voiclarify.estimators.exact import ExactEstimator
from voiclarify.harness import run_episode
from voiclarify.policies import PolicyConfig
from voiclarify.records import SCHEMA_VERSION, EpisodeLog, read_logs, write_logs
from voiclarify.tasks import medical_task, make_flight_task

EST = ExactEstimator()


def episodes(n=5, policy=PolicyConfig("voi")):
    return [run_episode(policy, medical_task(), EST, 0.05, seed=s) for s in range(n)]


def test_round_trip(tmp_path):
    logs = episodes()
    path = write_logs(logs, tmp_path / "sub" / "e.jsonl")
    assert read_logs(path) == logs


def test_every_line_has_version(tmp_path):
    path = write_logs(episodes(3), tmp_path / "e.jsonl")
    for line in path.read_text().splitlines():
        assert json.loads(line)["schema_version"] == SCHEMA_VERSION


def test_version_mismatch(tmp_path):
    d = episodes(1)[0].to_dict()
    d["schema_version"] = SCHEMA_VERSION + 1
    path = tmp_path / "old.jsonl"
    path.write_text(json.dumps(d) + "\n")
    with pytest.raises(SchemaVersionMismatch):
        read_logs(path)


def test_missing_version_rejected():
    d = episodes(1)[0].to_dict()
    del d["schema_version"]
    with pytest.raises(SchemaVersionMismatch):
        EpisodeLog.from_dict(d)


def test_same_seed_byte_identical(tmp_path):
    a = write_logs(episodes(), tmp_path / "a.jsonl").read_bytes()
    b = write_logs(episodes(), tmp_path / "b.jsonl").read_bytes()
    assert a == b


def test_turn_fields():
    log = next(l for l in episodes() if l.n_turns)
    turn = log.to_dict()["turns"][0]
    assert set(turn) == {"question", "answer", "belief", "report"}
    assert len(turn["belief"]["top"]) == 5
    assert turn["report"]["records"]


def test_flight_log_has_fractional_utility():
    task = make_flight_task(3)
    log = run_episode(PolicyConfig("voi"), task, EST, 0.01)
    again = EpisodeLog.from_dict(json.loads(log.to_json()))
    assert again == log and 0.0 <= again.raw_utility <= 1.0


def test_blank_lines_ignored(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("\n" + episodes(1)[0].to_json() + "\n\n")
    assert len(read_logs(path)) == 1


@pytest.mark.slow
def test_ten_thousand_episodes_read_quickly(tmp_path):
    lines = [l.to_json() for l in episodes(20)]
    path = tmp_path / "big.jsonl"
    path.write_text("\n".join(lines[i % 20] for i in range(10_000)) + "\n")
    start = time.perf_counter()
    logs = read_logs(path)
    elapsed = time.perf_counter() - start
    assert len(logs) == 10_000 and elapsed < 5.0
