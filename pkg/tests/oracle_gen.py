"""Random properties and traces for comparing the two evaluators."""

from __future__ import annotations

import random

from pubsub_rv.events import ChannelId, Event
from pubsub_rv.oracle import And, Atom, Implies, Not, Once, Or, Property, Var

TOPICS = ["/a", "/b"]
IDS = [0, 1, 2]
STATUSES = ["1", "2"]


def random_atom(rng: random.Random, variables: tuple[str, ...]) -> Atom:
    constraints = []
    if rng.random() < 0.8:
        constraints.append(("topic", rng.choice(TOPICS)))
    if rng.random() < 0.8:
        if "i" in variables and rng.random() < 0.7:
            constraints.append(("id", Var("i")))
        else:
            constraints.append(("id", rng.choice(IDS)))
    if rng.random() < 0.5:
        if "s" in variables and rng.random() < 0.7:
            constraints.append(("status", Var("s")))
        else:
            constraints.append(("status", rng.choice(STATUSES)))
    if rng.random() < 0.3:
        constraints.append(("flag", rng.random() < 0.5))
    return Atom(tuple(constraints))


def random_formula(rng: random.Random, variables: tuple[str, ...], depth: int = 4):
    if depth == 0 or rng.random() < 0.25:
        return random_atom(rng, variables)
    op = rng.choice(["not", "and", "or", "implies", "once", "once"])
    if op == "not":
        return Not(random_formula(rng, variables, depth - 1))
    if op == "once":
        lower = rng.choice([0, 0, 1, 2, 3])
        upper = rng.choice([None, lower, lower + 1, lower + 3, lower + 6])
        return Once(random_formula(rng, variables, depth - 1), lower, upper)
    cls = {"and": And, "or": Or, "implies": Implies}[op]
    return cls(random_formula(rng, variables, depth - 1), random_formula(rng, variables, depth - 1))


def random_property(rng: random.Random) -> Property:
    variables = rng.choice([(), ("i",), ("i", "s")])
    body = random_formula(rng, variables)
    if variables:
        # guarantee at least one atom that can create slices
        full = Atom((("topic", rng.choice(TOPICS)),) + tuple(
            (k, Var(v)) for k, v in (("id", "i"), ("status", "s")) if v in variables
        ))
        body = rng.choice([Implies(full, body), Or(body, Not(full)), And(body, Once(full))])
    return Property(variables, body)


def random_trace(rng: random.Random, length: int) -> list[Event]:
    trace = []
    for n in range(length):
        fields = {"topic": rng.choice(TOPICS)}
        if rng.random() < 0.9:
            fields["id"] = rng.choice(IDS)
        if rng.random() < 0.7:
            fields["status"] = rng.choice(STATUSES)
        if rng.random() < 0.5:
            fields["flag"] = rng.random() < 0.5
        trace.append(Event(ChannelId.topic(fields["topic"]), n, n, fields))
    return trace


def case_trace(rng: random.Random, length: int) -> list[Event]:
    """Events over the battery scenario's predicates with a tiny id domain."""
    trace = []
    for n in range(length):
        pid = rng.choice([0, 1, 2])
        status = rng.choice(["1", "2", "3"])
        kind = rng.choice(["bp", "ia", "bs", "req", "resp"])
        if kind == "bp":
            fields = {"topic": "/battery_percentage", "id": pid, "percentage": status}
        elif kind == "ia":
            fields = {"topic": "/input_accepted", "id": pid}
        elif kind == "bs":
            fields = {"topic": "/battery_status", "id": pid, "status": status, "status_change": rng.random() < 0.5}
        elif kind == "req":
            fields = {"service": "/SetLED", "request": True, "response": False, "req_id": pid, "req_status": status}
        else:
            fields = {"service": "/SetLED", "request": False, "response": True, "res_id": pid}
        channel = ChannelId.topic(fields["topic"]) if "topic" in fields else ChannelId.request("/SetLED")
        trace.append(Event(channel, n, n, fields))
    return trace


def shrink_bounds(prop: Property, factor: int) -> Property:
    """Same property with every ``once`` bound divided by ``factor``."""

    def walk(node):
        if isinstance(node, Atom):
            return node
        if isinstance(node, Not):
            return Not(walk(node.child))
        if isinstance(node, Once):
            upper = None if node.upper is None else node.upper // factor
            return Once(walk(node.child), node.lower // factor, upper)
        return type(node)(walk(node.left), walk(node.right))

    return Property(prop.variables, walk(prop.body))
