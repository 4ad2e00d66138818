"""LLM-backed belief estimation.

The model is asked for distributions, per-hypothesis answers and verbalized
confidence through the prompt templates in :mod:`.prompts`. Every reply is
validated before it reaches the decision engine; a reply that fails
validation is re-requested ``parse_retries`` times and then surfaces as a
:class:`~voiclarify.errors.ParseFailure`.

Beliefs are re-estimated from the full dialogue history at every turn, not
just from the latest answer.
"""

from __future__ import annotations

import difflib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from ..belief import AnswerDistribution, AnswerLikelihood, BeliefState, normalize
from ..engine import Clarify, Commit, DialogueState, PolicyDecision, best_action_value
from ..errors import AllZero, ParseFailure, UnknownLabel
from ..tasks.flight import FEATURES, N_FEATURES, STATES, WEIGHTS
from .client import ChatClient
from .parsing import (
    answer_distribution,
    match_label,
    parse_adaptive_reply,
    parse_batch_answers,
    parse_confidence,
    parse_numbered_questions,
    parse_strict_json_distribution,
    renormalize_distribution,
)
from .prompts import PromptTemplate, load_template

log = logging.getLogger(__name__)

DEFAULT_ETA = 0.05

# per task family: which template plays which role
TEMPLATES = {
    "animal": {
        "belief": "generic_belief",
        "confidence": "animal_confidence",
        "auto_stop": "animal_auto_stop",
        "questions": "animal_question_generation",
        "batch": "animal_batch_answer",
    },
    "medical": {
        "belief": "generic_belief",
        "confidence": "medical_confidence",
        "auto_stop": "medical_auto_stop",
        "questions": "medical_question_generation",
        "batch": "medical_batch_answer",
    },
    "flight": {
        "prior": "flight_prior",
        "posterior": "flight_posterior",
        "confidence": "generic_confidence",
        "auto_stop": "generic_auto_stop",
    },
    "generic": {
        "belief": "generic_belief",
        "confidence": "generic_confidence",
        "auto_stop": "generic_auto_stop",
    },
}


def _retrying(
    client: ChatClient, messages: list[dict], parse: Callable[[str], object], retries: int
):
    """Call the model until ``parse`` accepts the reply, at most ``retries + 1`` times."""
    convo = list(messages)
    for attempt in range(retries + 1):
        reply = client.complete(convo)
        try:
            return parse(reply)
        except ParseFailure as exc:
            log.info("unusable reply (attempt %d): %s", attempt + 1, exc)
            if attempt == retries:
                raise
            convo = list(messages) + [
                {"role": "assistant", "content": reply},
                {"role": "user", "content": f"That reply could not be used ({exc}). Answer again, following the requested format exactly."},
            ]


def llm_estimate_distribution(
    client: ChatClient,
    template: PromptTemplate,
    labels: Sequence[str],
    *,
    history: Sequence[dict] = (),
    parse_retries: int = 1,
    **slots,
) -> BeliefState:
    """Ask for a strict JSON distribution over ``labels`` and return it as a belief.

    Sums inside [0.9, 1.1] are renormalized; anything else is re-requested.
    ``history`` is prepended to the rendered template as prior chat turns.
    """
    slots.setdefault("states", json.dumps(list(labels)))

    def parse(text):
        mapping = renormalize_distribution(parse_strict_json_distribution(text, labels))
        try:
            return normalize([mapping[k] for k in labels])
        except AllZero:
            raise ParseFailure("every probability is zero") from None

    messages = list(history) + [template.message(**slots)]
    return _retrying(client, messages, parse, parse_retries)


def llm_answer_likelihood(
    client: ChatClient,
    template: PromptTemplate,
    question: str,
    labels: Sequence[str],
    eta: float = DEFAULT_ETA,
    parse_retries: int = 1,
) -> list[AnswerDistribution]:
    """(p_yes, p_no) for every hypothesis in ``labels``, from one batched prompt.

    Rows the model skipped or garbled are asked again (only those rows);
    still-missing rows after the retries raise :class:`ParseFailure`.
    """
    if not 0 <= eta < 0.5:
        raise ValueError("eta must lie in [0, 0.5)")
    found: dict[int, str] = {}
    pending = list(range(len(labels)))
    for attempt in range(parse_retries + 1):
        subset = [labels[i] for i in pending]
        prompt = template.render(question=question, candidate_list=", ".join(subset))
        reply = client.complete([{"role": template.role, "content": prompt}])
        answers, malformed = parse_batch_answers(reply, subset)
        for j, word in answers.items():
            found[pending[j]] = word
        pending = [i for i in range(len(labels)) if i not in found]
        if not pending:
            break
        log.info("batch answer missing %d rows (attempt %d); %d malformed lines", len(pending), attempt + 1, len(malformed))
    if pending:
        names = ", ".join(labels[i] for i in pending[:5])
        raise ParseFailure(f"no usable answer for {len(pending)} candidates ({names}...)")
    return [AnswerDistribution(np.array(answer_distribution(found[i], eta))) for i in range(len(labels))]


def llm_verbalized_confidence(
    client: ChatClient,
    template: PromptTemplate,
    answer_set: Sequence[str],
    *,
    history: Sequence[dict] = (),
    parse_retries: int = 1,
    **slots,
) -> tuple[str, float]:
    """The model's final guess (one of ``answer_set``) and its confidence in [0, 1]."""

    def parse(text):
        guess, conf = parse_confidence(text)
        idx = match_label(guess, answer_set)
        if idx is None:
            raise UnknownLabel(f"guess {guess!r} is not among the options")
        return answer_set[idx], conf

    slots.setdefault("answer_set", ", ".join(answer_set))
    messages = list(history) + [template.message(**slots)]
    return _retrying(client, messages, parse, parse_retries)


def closest_question(text: str, task, exclude: Sequence[int] = ()) -> Optional[int]:
    """Task question whose wording is closest to ``text`` (ties: lowest id)."""
    skip = set(exclude)
    best, best_score = None, -1.0
    wanted = text.lower().strip()
    for q in task.questions:
        if q.id in skip:
            continue
        score = difflib.SequenceMatcher(None, wanted, q.text.lower()).ratio()
        if score > best_score:
            best, best_score = q.id, score
    return best


def _family(task) -> str:
    if task.kind == "flight":
        return "flight"
    if task.name in ("animal", "medical"):
        return task.name
    return "generic"


def _option_text(option) -> str:
    return ", ".join(f"{name} {v:.2f}" for name, v in zip(FEATURES, option))


def _support_history(task) -> str:
    scenario = task.manifest["scenario"]
    lines = []
    for r, rnd in enumerate(scenario["support_rounds"], 1):
        lines.append(f"Round {r}:")
        for i, opt in enumerate(rnd["options"]):
            lines.append(f"  Flight {i + 1}: {_option_text(opt)}")
        lines.append(f"  User chose: Flight {rnd['chosen'] + 1}")
    return "\n".join(lines)


class LlmEstimator:
    """Belief backend that asks a chat model for every estimate.

    ``reestimate_lookahead`` controls VoI scoring: when true, each
    hypothetical answer triggers a fresh model estimate of the posterior;
    when false, hypothetical posteriors come from a Bayes update with the
    model-estimated answer likelihoods (far fewer calls).
    """

    name = "llm"
    supports_exact_likelihood = False
    supports_verbalized_confidence = True
    supports_adaptive_prompting = True

    def __init__(
        self,
        client: ChatClient,
        eta_hat: float = DEFAULT_ETA,
        m: int = 5,
        reestimate_lookahead: bool = True,
        parse_retries: int = 1,
    ):
        if m < 1:
            raise ValueError("m must be >= 1")
        self.client = client
        self.eta_hat = eta_hat
        self.m = m
        self.reestimate_lookahead = reestimate_lookahead
        self.parse_retries = parse_retries
        self._beliefs: dict = {}
        self._rows: dict = {}
        self._lock = threading.Lock()

    # -- dialogue rendering ------------------------------------------------

    @staticmethod
    def _qa_lines(task, asked, answers) -> str:
        if not asked:
            return "(no questions asked yet)"
        lines = []
        for q, y in zip(asked, answers):
            question = task.questions[q]
            lines.append(f"Q: {question.text}\nA: {question.answer_labels[y]}")
        return "\n".join(lines)

    @staticmethod
    def _transcript(task, asked, answers) -> list[dict]:
        msgs = [{"role": "user", "content": task.initial_query}]
        for q, y in zip(asked, answers):
            question = task.questions[q]
            msgs.append({"role": "assistant", "content": question.text})
            msgs.append({"role": "user", "content": question.answer_labels[y].capitalize()})
        return msgs

    def _template(self, task, role: str) -> PromptTemplate:
        return load_template(TEMPLATES[_family(task)][role])

    # -- beliefs -----------------------------------------------------------

    def _key(self, task, asked, answers):
        return (task.name, task.manifest.get("seed"), tuple(asked), tuple(answers))

    def _estimate(self, task, asked, answers) -> BeliefState:
        key = self._key(task, asked, answers)
        with self._lock:
            cached = self._beliefs.get(key)
        if cached is not None:
            return cached
        if _family(task) == "flight":
            belief = self._flight_belief(task, asked, answers)
        else:
            belief = llm_estimate_distribution(
                self.client,
                self._template(task, "belief"),
                task.labels,
                parse_retries=self.parse_retries,
                initial_query=task.initial_query,
                history_ctx=self._qa_lines(task, asked, answers),
                candidate_list=", ".join(task.labels),
            )
        with self._lock:
            self._beliefs[key] = belief
        return belief

    def _flight_belief(self, task, asked, answers) -> BeliefState:
        """Product of per-feature state distributions, lifted to weight vectors."""
        history_ctx = _support_history(task) + "\n" + self._qa_lines(task, asked, answers)
        holdout = task.manifest["scenario"]["holdout_options"]
        template = self._template(task, "posterior" if asked else "prior")

        def one(j):
            return llm_estimate_distribution(
                self.client,
                template,
                STATES,
                parse_retries=self.parse_retries,
                feature=FEATURES[j],
                history_ctx=history_ctx,
                option_a=_option_text(holdout[0]),
                option_b=_option_text(holdout[1]),
                option_c=_option_text(holdout[2]),
            ).probs

        with ThreadPoolExecutor(max_workers=self.client.config.max_concurrent) as pool:
            marginals = list(pool.map(one, range(N_FEATURES)))
        # WEIGHTS entries -1/0/+1 map to STATES indices 0/2/1
        state_index = np.where(WEIGHTS == -1, 0, np.where(WEIGHTS == 1, 1, 2))
        weights = np.ones(len(WEIGHTS))
        for j, dist in enumerate(marginals):
            weights *= dist[state_index[:, j]]
        try:
            return normalize(weights, len(asked))
        except AllZero:
            raise ParseFailure("feature distributions leave no weight vector possible") from None

    def prior(self, task) -> BeliefState:
        return self._estimate(task, (), ())

    def posterior(self, state: DialogueState, q: int, y: int) -> BeliefState:
        belief = self._estimate(state.task, state.asked + (q,), state.answers + (y,))
        return belief.with_turn(state.turn + 1)

    # -- questions and answer model ---------------------------------------

    def candidate_questions(self, state: DialogueState) -> list[int]:
        task = state.task
        unasked = [q.id for q in task.questions if q.id not in state.asked]
        if _family(task) not in ("animal", "medical") or not unasked:
            return unasked[: self.m]
        template = self._template(task, "questions")
        messages = [template.message(previous_qa=self._qa_lines(task, state.asked, state.answers))]
        proposals = _retrying(self.client, messages, parse_numbered_questions, self.parse_retries)
        chosen: list[int] = []
        for text in proposals:
            q = closest_question(text, task, exclude=list(state.asked) + chosen)
            if q is not None and q not in chosen:
                chosen.append(q)
            if len(chosen) == self.m:
                break
        return chosen

    def _question_rows(self, task, q: int, wanted: list[int]) -> dict[int, np.ndarray]:
        key = (task.name, q)
        with self._lock:
            known = dict(self._rows.get(key, {}))
        missing = [i for i in wanted if i not in known]
        if missing:
            dists = llm_answer_likelihood(
                self.client,
                self._template(task, "batch"),
                task.questions[q].text,
                [task.labels[i] for i in missing],
                self.eta_hat,
                self.parse_retries,
            )
            fresh = {i: d.probs for i, d in zip(missing, dists)}
            with self._lock:
                self._rows.setdefault(key, {}).update(fresh)
            known.update(fresh)
        return known

    def answer_likelihood(self, state: DialogueState, questions) -> AnswerLikelihood:
        task = state.task
        if _family(task) not in ("animal", "medical"):
            return task.likelihood
        support = [int(i) for i in np.flatnonzero(state.belief.probs > 0)]
        n = len(task.hypotheses)

        def table(q):
            rows = self._question_rows(task, q, support)
            t = np.full((n, 2), np.nan)
            for i, row in rows.items():
                t[i] = row
            return q, t

        questions = list(questions)
        with ThreadPoolExecutor(max_workers=self.client.config.max_concurrent) as pool:
            tables = dict(pool.map(table, questions))
        return AnswerLikelihood(tables)

    def lookahead_update(self, state: DialogueState):
        if not self.reestimate_lookahead:
            return None
        task, asked, answers = state.task, state.asked, state.answers

        def update(b: BeliefState, q: int, y: int) -> BeliefState:
            return self._estimate(task, asked + (q,), answers + (y,)).with_turn(b.turn + 1)

        return update

    # -- model-driven decisions -------------------------------------------

    @staticmethod
    def _answer_set(task) -> list[str]:
        # flight hypotheses are 6561 weight vectors; the model picks among flights instead
        return list(task.actions) if _family(task) == "flight" else task.labels

    def confidence(self, state: DialogueState) -> tuple[int, float]:
        task = state.task
        options = self._answer_set(task)
        guess, conf = llm_verbalized_confidence(
            self.client,
            self._template(task, "confidence"),
            options,
            history=self._transcript(task, state.asked, state.answers),
            parse_retries=self.parse_retries,
            initial_query=task.initial_query,
            history_ctx=self._qa_lines(task, state.asked, state.answers),
        )
        if _family(task) != "flight":
            return task.labels.index(guess), conf
        return int(np.argmax(state.belief.probs)), conf

    def adaptive_turn(self, state: DialogueState) -> PolicyDecision:
        """Let the model ask a free-form question or announce its guess.

        A free-form question is mapped to the closest unasked task question
        so the simulated user can answer it; a guess commits to the action
        that is best if the guessed hypothesis is true.
        """
        task = state.task
        template = self._template(task, "auto_stop")
        options = self._answer_set(task)
        messages = self._transcript(task, state.asked, state.answers) + [
            template.message(
                question_count=state.turn,
                remaining_questions=state.k_max - state.turn,
                answer_set=", ".join(options),
                initial_query=task.initial_query,
                history_ctx=self._qa_lines(task, state.asked, state.answers),
            )
        ]

        def parse(text):
            kind, value = parse_adaptive_reply(text)
            if kind == "guess":
                idx = match_label(value, options)
                if idx is None:
                    raise UnknownLabel(f"guess {value!r} is not among the options")
                if _family(task) == "flight":
                    return Commit(idx)
                return Commit(int(np.argmax(task.utility.values[idx])))
            q = closest_question(value, task, exclude=state.asked)
            if q is None:
                return Commit(best_action_value(state.belief, task.utility)[0])
            return Clarify(q, text=value)

        return _retrying(self.client, messages, parse, self.parse_retries)
