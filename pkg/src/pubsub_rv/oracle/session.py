"""Oracle session: a set of property monitors behind the JSON Lines contract."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TextIO

from ..events import Event, Verdict, deserialize_event, serialize_verdict
from .incremental import PropertyMonitor
from .syntax import Property, PropertySyntaxError, parse_property


class PropertyFileError(ValueError):
    pass


@dataclass(frozen=True)
class PropertySpec:
    property_id: str
    text: str

    def parse(self) -> Property:
        return parse_property(self.text)


def parse_property_file(text: str) -> list[PropertySpec]:
    """Read blocks of ``id:`` / ``spec:`` lines separated by blank lines.

    Indented lines continue the previous key; ``#`` starts a comment line.
    """
    specs: list[PropertySpec] = []
    block: dict[str, str] = {}
    last_key = None
    block_line = 0

    def close():
        nonlocal block, last_key
        if block:
            missing = {"id", "spec"} - block.keys()
            if missing:
                raise PropertyFileError(f"line {block_line}: block lacks {sorted(missing)[0]!r}")
            specs.append(PropertySpec(block["id"].strip(), block["spec"].strip()))
        block, last_key = {}, None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.lstrip().startswith("#"):
            continue
        if not raw.strip():
            close()
            continue
        if raw[0].isspace():
            if last_key is None:
                raise PropertyFileError(f"line {lineno}: continuation outside a key")
            block[last_key] += " " + raw.strip()
            continue
        key, sep, value = raw.partition(":")
        key = key.strip()
        if not sep or key not in ("id", "spec"):
            raise PropertyFileError(f"line {lineno}: expected 'id:' or 'spec:'")
        if key in block:
            raise PropertyFileError(f"line {lineno}: duplicate {key!r} in block")
        if not block:
            block_line = lineno
        block[key] = value.strip()
        last_key = key
    close()
    ids = [s.property_id for s in specs]
    if len(set(ids)) != len(ids):
        raise PropertyFileError("duplicate property id")
    for spec in specs:
        try:
            spec.parse()
        except PropertySyntaxError as exc:
            raise PropertyFileError(f"property {spec.property_id}: {exc}") from None
    return specs


class OracleSession:
    """Evaluates every property on each incoming event, in order."""

    def __init__(self, specs: Iterable[PropertySpec]):
        self.monitors = [PropertyMonitor(spec.parse(), spec.property_id) for spec in specs]

    @property
    def property_ids(self) -> list[str]:
        return [m.property_id for m in self.monitors]

    def check(self, event: Event) -> list[tuple[str, Verdict]]:
        return [(m.property_id, m.update(event)) for m in self.monitors]

    def check_line(self, line: str) -> list[tuple[str, Verdict]]:
        return self.check(deserialize_event(line))


def check_log(lines: Iterable[str], specs: Iterable[PropertySpec], out: TextIO) -> bool:
    """Replay an event log; write verdict lines to ``out``.

    Returns True when any verdict was negative.
    """
    session = OracleSession(specs)
    negative = False
    for line in lines:
        if not line.strip():
            continue
        event = deserialize_event(line)
        for pid, verdict in session.check(event):
            out.write(serialize_verdict(event.pub_time, pid, verdict) + "\n")
            negative = negative or verdict.negative
    return negative
