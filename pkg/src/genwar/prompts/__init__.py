"""Prompt templates with ``{name}`` placeholders.

The shipped templates are original. Substitution is single-pass, so braces
inside substituted values (expert documents, model replies) are left alone.
"""

from __future__ import annotations

import functools
import re
from importlib import resources

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


@functools.lru_cache(maxsize=None)
def load(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def placeholders(template: str) -> set[str]:
    return set(_PLACEHOLDER.findall(template))


def render_text(template: str, **fields: object) -> str:
    missing = placeholders(template) - fields.keys()
    if missing:
        raise KeyError(f"template needs values for: {', '.join(sorted(missing))}")
    return _PLACEHOLDER.sub(lambda m: str(fields[m.group(1)]), template)


def render(name: str, **fields: object) -> str:
    return render_text(load(name), **fields)
