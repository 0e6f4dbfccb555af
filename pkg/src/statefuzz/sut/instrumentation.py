"""Dense branch-id registry for the simulated targets.

Ids are handed out in module import order, so they are stable for a given
build of the harness, and the registry size is the denominator used for
coverage percentages.
"""

from __future__ import annotations

_NAMES: list[str] = []


def branch(name: str) -> int:
    """Register an instrumented branch and return its dense id."""
    _NAMES.append(name)
    return len(_NAMES) - 1


def branch_count() -> int:
    return len(_NAMES)


def branch_name(branch_id: int) -> str:
    return _NAMES[branch_id]
