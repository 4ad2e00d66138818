"""Benchmark environments and the task registry used by the harness and CLI."""

from __future__ import annotations

import json
from functools import lru_cache

from .attribute import (
    AttributeMatrix,
    animal_task,
    bundled_matrix,
    load_attribute_task,
    medical_task,
    toy_task,
)
from .base import (
    Question,
    TaskSpec,
    expected_entropy_reduction,
    gen_questions,
    simulate_answer,
    terminal_utility,
)
from .flight import FlightScenario, flight_task_from_scenario, make_flight_task
from .shop import Product, make_shop_task, shop_task_from_catalog

# task name -> subtasks an episode of that name runs
SUBTASKS = {
    "animal": ("animal",),
    "medical": ("medical",),
    "mixed20q": ("animal", "medical"),
    "flight": ("flight",),
    "shop": ("shop",),
    "toy": ("toy",),
}
GENERATED = {"flight", "shop"}


@lru_cache(maxsize=None)
def _static_task(name: str, noise: float) -> TaskSpec:
    if name == "animal":
        return animal_task(noise)
    if name == "medical":
        return medical_task(noise)
    if name == "toy":
        return toy_task()
    raise KeyError(name)


def build_task(name: str, seed: int = 0, noise: float | None = None) -> TaskSpec:
    """Task instance for one episode. Generated tasks draw a fresh scenario per seed."""
    if name == "flight":
        return make_flight_task(seed)
    if name == "shop":
        return make_shop_task(seed)
    if name in ("animal", "medical", "toy"):
        return _static_task(name, 0.05 if noise is None else noise)
    raise KeyError(f"unknown task {name!r}; choose from {sorted(SUBTASKS)}")


def task_manifest(task: TaskSpec) -> str:
    """Structured text sufficient to rebuild a generated task exactly."""
    return json.dumps(task.manifest, sort_keys=True, indent=1)


def task_from_manifest(text: str) -> TaskSpec:
    m = json.loads(text)
    kind = m["kind"]
    if kind == "flight":
        return flight_task_from_scenario(
            FlightScenario.from_dict(m["scenario"]),
            m["choice_noise"],
            m["answer_noise"],
            seed=m["seed"],
            k_max=m["k_max"],
        )
    if kind == "shop":
        catalog = [Product(**p) for p in m["catalog"]]
        return shop_task_from_catalog(
            catalog, m["target_id"], m["answer_noise"], seed=m["seed"], k_max=m["k_max"]
        )
    if kind == "attribute" and m["name"] in ("animal", "medical"):
        return load_attribute_task(
            bundled_matrix("animals" if m["name"] == "animal" else "medical"),
            m["stakes"],
            m["noise"],
            name=m["name"],
            k_max=10 if m["name"] == "medical" else 20,
            noun="animal" if m["name"] == "animal" else "condition",
        )
    raise ValueError(f"cannot rebuild task of kind {kind!r} from a manifest")


__all__ = [
    "AttributeMatrix",
    "FlightScenario",
    "Product",
    "Question",
    "SUBTASKS",
    "TaskSpec",
    "animal_task",
    "build_task",
    "bundled_matrix",
    "expected_entropy_reduction",
    "flight_task_from_scenario",
    "gen_questions",
    "load_attribute_task",
    "make_flight_task",
    "make_shop_task",
    "medical_task",
    "shop_task_from_catalog",
    "simulate_answer",
    "task_from_manifest",
    "task_manifest",
    "terminal_utility",
    "toy_task",
]
