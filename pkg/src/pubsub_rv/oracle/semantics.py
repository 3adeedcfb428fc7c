"""Shared pieces of the evaluation semantics: atom matching and slicing.

Time is discrete: every event delivered to the oracle is one step. A
quantified property is sliced per binding of its variables; a binding comes
into existence at the first event that satisfies the literal constraints of
some atom while supplying a value for every quantified variable. Before that
step the slice sees every atom as false.
"""

from __future__ import annotations

from typing import Iterator, Mapping

from ..events import Event, Scalar
from .syntax import Atom, Property, Var

Binding = Mapping[str, Scalar]


def same_value(a: Scalar, b: Scalar) -> bool:
    # JSON keeps booleans and numbers apart; Python's True == 1 must not leak in
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, str) or isinstance(b, str):
        return isinstance(a, str) and isinstance(b, str) and a == b
    return a == b


def atom_matches(atom: Atom, event: Event | None, binding: Binding) -> bool:
    """True iff every constraint of ``atom`` holds on ``event``'s fields.

    A missing key is a mismatch; ``None`` stands for a step on which every
    atom is false.
    """
    if event is None:
        return False
    fields = event.fields
    for key, want in atom.constraints:
        if key not in fields:
            return False
        if isinstance(want, Var):
            want = binding[want.name]
        if not same_value(fields[key], want):
            return False
    return True


def binding_key(values: tuple[Scalar, ...]) -> tuple:
    """Hashable identity of a binding that keeps True apart from 1."""
    return tuple((isinstance(v, bool), isinstance(v, str), v) for v in values)


def new_bindings(prop: Property, event: Event) -> Iterator[tuple[Scalar, ...]]:
    """Binding tuples (in ``prop.variables`` order) supplied by ``event``."""
    if not prop.variables:
        return
    wanted = set(prop.variables)
    fields = event.fields
    for atom in prop.unique_atoms:
        if atom.variables != wanted:
            continue
        values: dict[str, Scalar] = {}
        ok = True
        for key, want in atom.constraints:
            if key not in fields:
                ok = False
                break
            got = fields[key]
            if isinstance(want, Var):
                if want.name in values and not same_value(values[want.name], got):
                    ok = False
                    break
                values[want.name] = got
            elif not same_value(got, want):
                ok = False
                break
        if ok:
            yield tuple(values[name] for name in prop.variables)
