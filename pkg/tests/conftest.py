import json
import random
import socket

import httpx
import numpy as np
import pytest

from voiclarify.belief import AnswerLikelihood, BeliefState
from voiclarify.engine import UtilityMatrix


def random_instance(rng: random.Random, max_n=6, max_y=3, max_a=6):
    """Random (b, tables, U, q) with |Theta| <= 6, |Y| <= 3, |A| <= 6.

    Some entries are zeroed so point masses, zero-marginal answers and hard
    likelihoods all show up.
    """
    n = rng.randint(1, max_n)
    n_y = rng.randint(2, max_y)
    n_a = rng.randint(1, max_a)
    b = [rng.random() if rng.random() > 0.2 else 0.0 for _ in range(n)]
    if sum(b) == 0:
        b[rng.randrange(n)] = 1.0
    total = sum(b)
    b = [x / total for x in b]
    tables = {}
    for q in range(2):
        rows = []
        for _ in range(n):
            row = [rng.random() if rng.random() > 0.25 else 0.0 for _ in range(n_y)]
            if sum(row) == 0:
                row[rng.randrange(n_y)] = 1.0
            s = sum(row)
            rows.append([x / s for x in row])
        tables[q] = rows
    U = [[rng.uniform(-2, 5) for _ in range(n_a)] for _ in range(n)]
    return b, tables, U


def to_objects(b, tables, U):
    return (
        BeliefState(np.array(b) / np.sum(b)),
        AnswerLikelihood({q: np.array(t) for q, t in tables.items()}),
        UtilityMatrix(np.array(U)),
    )


class ScriptedEndpoint:
    """Fake chat-completions server: replies come from a script, in order.

    Each script entry is either a reply string, an int HTTP status, or a
    callable taking the parsed request body and returning a reply string.
    """

    def __init__(self, script=(), default=None):
        self.script = list(script)
        self.default = default
        self.requests = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        self.requests.append({"body": body, "headers": dict(request.headers)})
        if self.script:
            item = self.script.pop(0)
        elif self.default is not None:
            item = self.default
        else:
            raise AssertionError("fake endpoint ran out of scripted replies")
        if callable(item):
            item = item(body)
        if isinstance(item, int):
            return httpx.Response(item, json={"error": "scripted"})
        return httpx.Response(
            200,
            json={"choices": [{"message": {"role": "assistant", "content": item}}]},
            headers={"X-Request-ID": request.headers.get("X-Request-ID", "")},
        )

    def last_prompt(self) -> str:
        return self.requests[-1]["body"]["messages"][-1]["content"]


@pytest.fixture
def no_network(monkeypatch):
    """Fail loudly if anything tries to open a real socket."""

    def guard(*args, **kwargs):
        raise AssertionError("test attempted real network access")

    monkeypatch.setattr(socket.socket, "connect", guard)
    monkeypatch.setattr(socket, "create_connection", guard)


@pytest.fixture
def fake_client(no_network):
    from voiclarify.estimators.client import ChatClient, LlmConfig

    def make(script=(), default=None, **config):
        endpoint = ScriptedEndpoint(script, default)
        cfg = LlmConfig(endpoint="http://fake.invalid/v1/chat/completions", backoff=0.0, **config)
        return ChatClient(cfg, transport=httpx.MockTransport(endpoint)), endpoint

    return make
