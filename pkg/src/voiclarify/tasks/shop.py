"""Ambiguous shopping: the request names a category and nothing else.

The catalog is synthetic. Purchases are scored by the fraction of the four
hidden attributes (color, size, brand, price band) that match the product the
user actually wanted, so an exact match scores 1.0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..belief import AnswerLikelihood, BeliefState, Hypothesis
from ..engine import UtilityMatrix
from ..errors import EmptyCategory
from .base import Question, TaskSpec

CATEGORIES = ("t-shirt", "sneakers", "backpack", "jacket", "headphones")
VOCAB = {
    "color": ("black", "white", "red", "blue", "green", "grey"),
    "size": ("small", "medium", "large", "x-large"),
    "brand": ("Northpeak", "Urbanline", "Solace", "Kestrel", "Marlow"),
    "price_band": ("budget", "mid-range", "premium"),
}
HIDDEN = tuple(VOCAB)
REQUEST = {
    "t-shirt": "buy a t-shirt",
    "sneakers": "buy some sneakers",
    "backpack": "buy a backpack",
    "jacket": "buy a jacket",
    "headphones": "buy headphones",
}
QUESTION_TEXT = {
    "color": "Which color would you like?",
    "size": "Which size do you need?",
    "brand": "Do you have a preferred brand?",
    "price_band": "What price range are you looking for?",
}


@dataclass(frozen=True)
class Product:
    id: int
    category: str
    color: str
    size: str
    brand: str
    price_band: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        for attr in HIDDEN:
            if getattr(self, attr) not in VOCAB[attr]:
                raise ValueError(f"unknown {attr} {getattr(self, attr)!r}")

    @property
    def label(self) -> str:
        return f"#{self.id} {self.color} {self.brand} {self.category}, {self.size}, {self.price_band}"


def generate_catalog(rng: np.random.Generator, size: int) -> list[Product]:
    products = []
    for pid in range(size):
        products.append(
            Product(
                pid,
                CATEGORIES[rng.integers(len(CATEGORIES))],
                *(VOCAB[attr][rng.integers(len(VOCAB[attr]))] for attr in HIDDEN),
            )
        )
    return products


def overlap(a: Product, b: Product) -> float:
    return sum(getattr(a, attr) == getattr(b, attr) for attr in HIDDEN) / len(HIDDEN)


def shop_task_from_catalog(
    catalog: list[Product],
    target_id: int,
    answer_noise: float = 0.0,
    seed=None,
    k_max: int = 4,
) -> TaskSpec:
    if not 0 <= answer_noise < 0.5:
        raise ValueError("answer_noise must lie in [0, 0.5)")
    by_id = {p.id: p for p in catalog}
    target = by_id[target_id]
    members = [p for p in catalog if p.category == target.category]
    if not members:
        raise EmptyCategory(f"no products in category {target.category!r}")

    hypotheses = tuple(Hypothesis(i, p.label) for i, p in enumerate(members))
    questions = tuple(
        Question(j, QUESTION_TEXT[attr], VOCAB[attr]) for j, attr in enumerate(HIDDEN)
    )
    tables = {}
    for j, attr in enumerate(HIDDEN):
        labels = VOCAB[attr]
        off = answer_noise / (len(labels) - 1)
        table = np.full((len(members), len(labels)), off)
        for i, p in enumerate(members):
            table[i, labels.index(getattr(p, attr))] = 1 - answer_noise
        tables[j] = table
    utility = np.array([[overlap(t, a) for a in members] for t in members])
    manifest = {
        "kind": "shop",
        "seed": seed,
        "answer_noise": answer_noise,
        "k_max": k_max,
        "target_id": target_id,
        "catalog": [asdict(p) for p in catalog],
    }
    return TaskSpec(
        name="shop",
        hypotheses=hypotheses,
        actions=tuple(f"buy {p.label}" for p in members),
        utility=UtilityMatrix(utility),
        questions=questions,
        likelihood=AnswerLikelihood(tables),
        prior=BeliefState.uniform(len(members)),
        initial_query=REQUEST[target.category],
        k_max_default=k_max,
        truth=members.index(target),
        kind="shop",
        manifest=manifest,
    )


def make_shop_task(
    seed: int, catalog_size: int = 50, answer_noise: float = 0.0, k_max: int = 4
) -> TaskSpec:
    if catalog_size < 2:
        raise ValueError("catalog_size must be >= 2")
    rng = np.random.default_rng([seed, 0x5A])
    catalog = generate_catalog(rng, catalog_size)
    target_id = int(rng.integers(catalog_size))
    return shop_task_from_catalog(catalog, target_id, answer_noise, seed=seed, k_max=k_max)
