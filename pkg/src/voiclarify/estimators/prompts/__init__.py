"""Prompt templates shipped as plain-text assets.

Placeholders look like ``{slot}`` where ``slot`` is a lowercase identifier.
Anything else in braces (JSON examples such as ``{"guess": ...}``) is left
untouched, which is why rendering does not go through ``str.format``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

_SLOT = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str
    role: str = "user"

    @property
    def slots(self) -> frozenset[str]:
        return frozenset(_SLOT.findall(self.text))

    def render(self, **values) -> str:
        missing = self.slots - values.keys()
        if missing:
            raise KeyError(f"template {self.id!r} has unbound slots: {sorted(missing)}")
        return _SLOT.sub(lambda m: str(values[m.group(1)]), self.text)

    def message(self, **values) -> dict:
        return {"role": self.role, "content": self.render(**values)}


def template_ids() -> list[str]:
    root = resources.files(__package__)
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".txt"))


@lru_cache(maxsize=None)
def load_template(template_id: str) -> PromptTemplate:
    path = resources.files(__package__) / f"{template_id}.txt"
    if not path.is_file():
        raise KeyError(f"no prompt template named {template_id!r}")
    return PromptTemplate(template_id, path.read_text(encoding="utf-8"))
