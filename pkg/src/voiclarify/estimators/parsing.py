"""Parsers that turn free-text model replies into validated numbers.

Each parser either returns a well-formed value or raises a subclass of
:class:`~voiclarify.errors.ParseFailure`; callers decide whether to retry.
"""

from __future__ import annotations

import json
import math
import re
from typing import Iterable, Optional, Sequence

from ..errors import (
    ConfidenceOutOfRange,
    KeyMismatch,
    OutOfRangeSum,
    ParseFailure,
    UnknownLabel,
    ValueOutOfRange,
)

SUM_WINDOW = (0.9, 1.1)
ANSWER_WORDS = ("yes", "no", "maybe")


def first_json_object(text: str) -> str:
    """The first balanced ``{...}`` block in ``text`` (string literals respected)."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        start = text.find("{", start + 1)
    raise ParseFailure("reply contains no complete JSON object")


def _load_object(text: str) -> dict:
    block = first_json_object(text)
    try:
        obj = json.loads(block)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"invalid JSON object: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseFailure("expected a JSON object")
    return obj


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def parse_strict_json_distribution(text: str, expected_keys: Iterable[str]) -> dict[str, float]:
    """Key -> probability mapping whose keys are exactly ``expected_keys``.

    The result follows the order of ``expected_keys``. Values must be reals in
    [0, 1]; whether they sum to one is checked separately by
    :func:`renormalize_distribution`.
    """
    keys = list(expected_keys)
    obj = _load_object(text)
    if set(obj) != set(keys) or len(obj) != len(keys):
        missing = sorted(set(keys) - set(obj))
        extra = sorted(set(obj) - set(keys))
        raise KeyMismatch(f"missing keys {missing}, unexpected keys {extra}")
    out = {}
    for k in keys:
        v = obj[k]
        if not _is_real(v) or not 0.0 <= v <= 1.0:
            raise ValueOutOfRange(f"value for {k!r} is {v!r}, not a probability")
        out[k] = float(v)
    return out


def renormalize_distribution(mapping: dict[str, float], window=SUM_WINDOW) -> dict[str, float]:
    total = sum(mapping.values())
    lo, hi = window
    if not lo <= total <= hi:
        raise OutOfRangeSum(f"probabilities sum to {total:.4f}, outside [{lo}, {hi}]")
    return {k: v / total for k, v in mapping.items()}


def parse_confidence(text: str) -> tuple[str, float]:
    """``{"guess": ..., "confidence": n}`` with ``n`` in [1, 100] -> (guess, n / 100)."""
    obj = _load_object(text)
    guess = obj.get("guess")
    conf = obj.get("confidence")
    if not isinstance(guess, str) or not guess.strip():
        raise ParseFailure("reply lacks a string 'guess'")
    if isinstance(conf, str):
        try:
            conf = float(conf.strip().rstrip("%"))
        except ValueError:
            raise ParseFailure(f"confidence {conf!r} is not a number") from None
    if not _is_real(conf):
        raise ParseFailure("reply lacks a numeric 'confidence'")
    if not 1 <= conf <= 100:
        raise ConfidenceOutOfRange(f"confidence {conf} outside [1, 100]")
    return guess.strip(), float(conf) / 100.0


def normalize_label(text: str) -> str:
    text = re.sub(r"^\s*(?:[-*•]|\d+[.)])\s*", "", text)
    return re.sub(r"\s+", " ", text.strip().strip("*\"'`[]().").strip()).lower()


def match_label(text: str, labels: Sequence[str]) -> Optional[int]:
    """Index of the label equal to ``text`` up to case, spacing and decoration."""
    wanted = normalize_label(text)
    for i, label in enumerate(labels):
        if normalize_label(label) == wanted:
            return i
    # tolerate a leading article ("a lion", "the flu")
    stripped = re.sub(r"^(?:a|an|the)\s+", "", wanted)
    for i, label in enumerate(labels):
        if normalize_label(label) == stripped:
            return i
    return None


def parse_batch_answers(
    text: str, labels: Sequence[str], words: Sequence[str] = ANSWER_WORDS
) -> tuple[dict[int, str], list[str]]:
    """Read ``Name: Answer`` lines.

    Returns the answers found, keyed by label index, and the list of lines
    that looked like answers but could not be read. A line naming an
    unknown label raises :class:`UnknownLabel`.
    """
    answers: dict[int, str] = {}
    malformed: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if ":" not in line:
            malformed.append(line)
            continue
        name, _, value = line.rpartition(":")
        word = normalize_label(value).split(" ")[0] if value.strip() else ""
        idx = match_label(name, labels)
        if idx is None:
            if normalize_label(name) in {"question", "animals", "conditions", "answer"}:
                continue
            raise UnknownLabel(f"reply names unknown candidate {name.strip()!r}")
        if word not in words:
            malformed.append(line)
            continue
        answers[idx] = word
    return answers, malformed


def answer_distribution(word: str, eta: float) -> tuple[float, float]:
    """(p_yes, p_no) for a yes/no/maybe verdict with answer noise ``eta``."""
    if word == "yes":
        return 1.0 - eta, eta
    if word == "no":
        return eta, 1.0 - eta
    if word == "maybe":
        return 0.5, 0.5
    raise ParseFailure(f"unknown verdict {word!r}")


_GUESS = re.compile(r"my guess is\s*:?\s*(.+)", re.IGNORECASE)


def parse_adaptive_reply(text: str) -> tuple[str, str]:
    """Classify a free-form turn as ``("guess", label)`` or ``("question", text)``."""
    m = _GUESS.search(text)
    if m:
        guess = m.group(1).strip().splitlines()[0].strip().rstrip(".!")
        if guess:
            return "guess", normalize_label(guess)
    for line in text.splitlines():
        line = line.strip()
        if line.endswith("?"):
            return "question", re.sub(r"^(?:question\s*\d*\s*:|\d+[.)])\s*", "", line, flags=re.I)
    raise ParseFailure("reply is neither a question nor a guess")


def parse_numbered_questions(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        m = re.match(r"^\s*(?:\d+[.)]|[-*•])\s*(.+?)\s*$", line)
        if m:
            out.append(m.group(1))
    if not out:
        raise ParseFailure("reply contains no numbered questions")
    return out
