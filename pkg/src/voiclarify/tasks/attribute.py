"""Twenty-questions style tasks built from a hypothesis-by-attribute matrix.

Matrix files are UTF-8 CSV: the first row holds the attribute names (each
one phrased as a yes/no question), the first column holds hypothesis labels,
and every cell is ``0`` (no), ``0.5`` (maybe) or ``1`` (yes).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from ..belief import AnswerLikelihood, BeliefState, Hypothesis
from ..engine import UtilityMatrix
from ..errors import MalformedMatrix
from .base import Question, TaskSpec

ALLOWED_CELLS = (0.0, 0.5, 1.0)
DEFAULT_NOISE = 0.05


@dataclass(frozen=True, eq=False)
class AttributeMatrix:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.float64)
        if cells.shape != (len(self.rows), len(self.columns)):
            raise MalformedMatrix(
                f"cells are {cells.shape}, expected {(len(self.rows), len(self.columns))}"
            )
        if not np.isin(cells, ALLOWED_CELLS).all():
            raise MalformedMatrix("cells must be 0, 0.5 or 1")
        if len(set(self.rows)) != len(self.rows):
            raise MalformedMatrix("duplicate hypothesis labels")
        if not self.rows or not self.columns:
            raise MalformedMatrix("matrix needs at least one row and one column")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_csv(cls, text: str) -> "AttributeMatrix":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedMatrix("empty matrix file") from None
        columns = tuple(h.strip() for h in header[1:])
        rows, cells = [], []
        for lineno, record in enumerate(reader, start=2):
            if not record or not any(c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise MalformedMatrix(f"line {lineno}: {len(record)} fields, header has {len(header)}")
            rows.append(record[0].strip())
            try:
                cells.append([float(c) for c in record[1:]])
            except ValueError as exc:
                raise MalformedMatrix(f"line {lineno}: {exc}") from None
        return cls(tuple(rows), columns, np.array(cells).reshape(len(rows), len(columns)))

    @classmethod
    def read(cls, path) -> "AttributeMatrix":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label", *self.columns])
        for label, row in zip(self.rows, self.cells):
            writer.writerow([label, *(_fmt_cell(v) for v in row)])
        return buf.getvalue()


def _fmt_cell(v: float) -> str:
    return "0.5" if v == 0.5 else str(int(v))


def bundled_matrix(name: str) -> AttributeMatrix:
    """``animals`` (100 rows) or ``medical`` (15 rows)."""
    text = resources.files("voiclarify.tasks").joinpath("data", f"{name}.csv").read_text("utf-8")
    return AttributeMatrix.from_csv(text)


def load_attribute_task(
    matrix: AttributeMatrix,
    stakes: float = 1.0,
    noise: float = DEFAULT_NOISE,
    name: str = "attribute",
    k_max: int = 20,
    noun: str = "item",
) -> TaskSpec:
    """Guess-the-row task: indicator utility scaled by ``stakes``, noisy yes/no answers."""
    if not 0 <= noise < 0.5:
        raise ValueError("noise must lie in [0, 0.5)")
    if not stakes > 0:
        raise ValueError("stakes must be positive")
    n = len(matrix.rows)
    hypotheses = tuple(Hypothesis(i, label) for i, label in enumerate(matrix.rows))
    questions = tuple(Question(j, text, ("yes", "no")) for j, text in enumerate(matrix.columns))
    tables = {}
    for j in range(len(matrix.columns)):
        v = matrix.cells[:, j]
        p_yes = v * (1 - noise) + (1 - v) * noise
        tables[j] = np.column_stack([p_yes, 1 - p_yes])
    return TaskSpec(
        name=name,
        hypotheses=hypotheses,
        actions=tuple(f"guess {label}" for label in matrix.rows),
        utility=UtilityMatrix(stakes * np.eye(n)),
        questions=questions,
        likelihood=AnswerLikelihood(tables),
        prior=BeliefState.uniform(n),
        initial_query=f"I am thinking of one of {n} possible {noun}s. Which one is it?",
        k_max_default=k_max,
        kind="attribute",
        manifest={"kind": "attribute", "name": name, "stakes": stakes, "noise": noise},
    )


def animal_task(noise: float = DEFAULT_NOISE, stakes: float = 1.0, k_max: int = 20) -> TaskSpec:
    return load_attribute_task(
        bundled_matrix("animals"), stakes, noise, name="animal", k_max=k_max, noun="animal"
    )


def medical_task(noise: float = DEFAULT_NOISE, stakes: float = 10.0, k_max: int = 10) -> TaskSpec:
    return load_attribute_task(
        bundled_matrix("medical"), stakes, noise, name="medical", k_max=k_max, noun="condition"
    )


def toy_task(stakes: float = 1.0, uninformative: bool = False, prior: Optional[list] = None) -> TaskSpec:
    """Two hypotheses, one perfectly separating question, optional useless one."""
    columns = ["Is it A?"] + (["Is it a letter?"] if uninformative else [])
    cells = [[1.0] + ([1.0] if uninformative else []), [0.0] + ([1.0] if uninformative else [])]
    task = load_attribute_task(
        AttributeMatrix(("A", "B"), tuple(columns), np.array(cells)),
        stakes=stakes,
        noise=0.0,
        name="toy",
        k_max=4,
        noun="letter",
    )
    if prior is not None:
        from dataclasses import replace

        task = replace(task, prior=BeliefState(np.asarray(prior, dtype=float)))
    return task
