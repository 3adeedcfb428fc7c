"""Naive reference evaluator used as the test oracle for ``incremental``.

Every step re-derives the slice table from the whole prefix and evaluates
the recursive semantics directly, with no memoisation.
"""

from __future__ import annotations

from typing import Sequence

from ..events import Event, Verdict
from .semantics import atom_matches, binding_key, new_bindings
from .syntax import And, Atom, Implies, Not, Once, Or, Property


def _holds(node, trace: Sequence[Event], m: int, binding: dict, created: int) -> bool:
    if isinstance(node, Atom):
        return m >= created and atom_matches(node, trace[m], binding)
    if isinstance(node, Not):
        return not _holds(node.child, trace, m, binding, created)
    if isinstance(node, And):
        return _holds(node.left, trace, m, binding, created) and _holds(
            node.right, trace, m, binding, created
        )
    if isinstance(node, Or):
        return _holds(node.left, trace, m, binding, created) or _holds(
            node.right, trace, m, binding, created
        )
    if isinstance(node, Implies):
        return (not _holds(node.left, trace, m, binding, created)) or _holds(
            node.right, trace, m, binding, created
        )
    if isinstance(node, Once):
        start = 0 if node.upper is None else max(0, m - node.upper)
        return any(
            _holds(node.child, trace, k, binding, created) for k in range(start, m - node.lower + 1)
        )
    raise TypeError(node)


def brute_force_eval(prop: Property, trace: Sequence[Event]) -> list[Verdict]:
    verdicts = []
    for n in range(len(trace)):
        if prop.variables:
            created: dict[tuple, tuple] = {}
            for m in range(n + 1):
                for values in new_bindings(prop, trace[m]):
                    created.setdefault(binding_key(values), (values, m))
            slices = list(created.values())
        else:
            slices = [((), 0)]
        ok = all(
            _holds(prop.body, trace, n, dict(zip(prop.variables, values)), start)
            for values, start in slices
        )
        verdicts.append(Verdict.CURRENTLY_TRUE if ok else Verdict.CURRENTLY_FALSE)
    return verdicts
