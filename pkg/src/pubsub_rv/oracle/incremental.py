"""Incremental evaluator: constant work per step and per live slice."""

from __future__ import annotations

from collections import deque

from ..events import Event, Verdict
from .semantics import atom_matches, binding_key, new_bindings
from .syntax import And, Atom, Implies, Not, Once, Or, Property

_ATOM, _NOT, _AND, _OR, _IMPLIES, _ONCE = range(6)


def _compile(body) -> list[tuple]:
    """Post-order node list; each entry is (op, payload, child indices...)."""
    out: list[tuple] = []

    def visit(node) -> int:
        if isinstance(node, Atom):
            out.append((_ATOM, node))
        elif isinstance(node, Not):
            out.append((_NOT, None, visit(node.child)))
        elif isinstance(node, Once):
            c = visit(node.child)
            out.append((_ONCE, (node.lower, node.upper), c))
        else:
            op = {And: _AND, Or: _OR, Implies: _IMPLIES}[type(node)]
            left = visit(node.left)
            right = visit(node.right)
            out.append((op, None, left, right))
        return len(out) - 1

    visit(body)
    return out


class _Slice:
    """Past-operator memory of one binding.

    For ``once[l:u]`` the memory holds the steps at which the operand was
    true and that may still fall inside a future window ``[n-u, n-l]``; for
    unbounded ``u`` only the earliest such step is needed.
    """

    __slots__ = ("binding", "memory")

    def __init__(self, binding: dict, memory: list):
        self.binding = binding
        self.memory = memory

    def copy_memory(self) -> list:
        return [deque(m) if isinstance(m, deque) else m for m in self.memory]


class PropertyMonitor:
    """Online monitor for one property; ``update`` consumes one event per step."""

    def __init__(self, prop: Property, property_id: str = ""):
        self.property = prop
        self.property_id = property_id
        self.step = 0
        self._nodes = _compile(prop.body)
        self._template = _Slice({}, self._fresh_memory())
        self.instances: dict[tuple, _Slice] = {}
        self.slice_results: dict[tuple, bool] = {}
        if not prop.variables:
            self.instances[()] = _Slice({}, self._fresh_memory())

    def _fresh_memory(self) -> list:
        memory: list = []
        for node in self._nodes:
            if node[0] == _ONCE:
                memory.append(deque() if node[1][1] is not None else None)
            else:
                memory.append(None)
        return memory

    def _evaluate(self, sl: _Slice, event: Event | None, n: int) -> bool:
        values = [False] * len(self._nodes)
        memory = sl.memory
        for i, node in enumerate(self._nodes):
            op = node[0]
            if op == _ATOM:
                values[i] = atom_matches(node[1], event, sl.binding)
            elif op == _NOT:
                values[i] = not values[node[2]]
            elif op == _AND:
                values[i] = values[node[2]] and values[node[3]]
            elif op == _OR:
                values[i] = values[node[2]] or values[node[3]]
            elif op == _IMPLIES:
                values[i] = (not values[node[2]]) or values[node[3]]
            else:
                lower, upper = node[1]
                child_true = values[node[2]]
                if upper is None:
                    first = memory[i]
                    if child_true and first is None:
                        memory[i] = first = n
                    values[i] = first is not None and first <= n - lower
                else:
                    window = memory[i]
                    if child_true:
                        window.append(n)
                    while window and window[0] < n - upper:
                        window.popleft()
                    values[i] = bool(window) and window[0] <= n - lower
        return values[-1]

    def update(self, event: Event) -> Verdict:
        n = self.step
        prop = self.property
        for values in new_bindings(prop, event):
            key = binding_key(values)
            if key not in self.instances:
                self.instances[key] = _Slice(
                    dict(zip(prop.variables, values)), self._template.copy_memory()
                )
        # no short-circuit: every slice must record this step
        self.slice_results = {key: self._evaluate(sl, event, n) for key, sl in self.instances.items()}
        ok = all(self.slice_results.values())
        self._evaluate(self._template, None, n)
        self.step = n + 1
        return Verdict.CURRENTLY_TRUE if ok else Verdict.CURRENTLY_FALSE


def update(state: PropertyMonitor, event: Event) -> Verdict:
    return state.update(event)
