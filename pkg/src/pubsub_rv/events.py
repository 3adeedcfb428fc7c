"""Event, channel and verdict vocabulary plus the JSON Lines interchange format.

Timestamps are plain ``int`` nanoseconds of simulated logical time.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

Scalar = Union[str, int, float, bool]
Timestamp = int

RESERVED_KEYS = frozenset({"channel", "kind", "time", "seq"})


class ChannelKind(enum.Enum):
    TOPIC = "topic"
    SERVICE_REQUEST = "service_request"
    SERVICE_RESPONSE = "service_response"

    @property
    def rank(self) -> int:
        return _KIND_RANK[self]


_KIND_RANK = {
    ChannelKind.TOPIC: 0,
    ChannelKind.SERVICE_REQUEST: 1,
    ChannelKind.SERVICE_RESPONSE: 2,
}


@dataclass(frozen=True)
class ChannelId:
    kind: ChannelKind
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("channel name must be non-empty")

    @classmethod
    def topic(cls, name: str) -> "ChannelId":
        return cls(ChannelKind.TOPIC, name)

    @classmethod
    def request(cls, name: str) -> "ChannelId":
        return cls(ChannelKind.SERVICE_REQUEST, name)

    @classmethod
    def response(cls, name: str) -> "ChannelId":
        return cls(ChannelKind.SERVICE_RESPONSE, name)

    @property
    def sort_key(self) -> tuple[str, int]:
        # name first so the lexicographic channel tie-break holds; kind only
        # separates a request from its response on the same service
        return (self.name, self.kind.rank)

    def __lt__(self, other: "ChannelId") -> bool:
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        if self.kind is ChannelKind.TOPIC:
            return self.name
        return f"{self.name}[{self.kind.value}]"


@dataclass(frozen=True, eq=True)
class Event:
    """One observed message. ``fields`` is a flat mapping of scalars."""

    channel: ChannelId
    pub_time: Timestamp
    seq: int
    fields: Mapping[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        for key, value in self.fields.items():
            if not _is_scalar(value):
                raise TypeError(f"field {key!r} is not a scalar: {value!r}")

    def __hash__(self) -> int:
        return hash((self.channel, self.pub_time, self.seq))

    @property
    def order_key(self) -> tuple:
        """Total publication order: (pub_time, channel name, kind, seq)."""
        return (self.pub_time, self.channel.name, self.channel.kind.rank, self.seq)

    def with_fields(self, fields: Mapping[str, Scalar]) -> "Event":
        return Event(self.channel, self.pub_time, self.seq, dict(fields))


class Verdict(enum.Enum):
    TRUE = "true"
    CURRENTLY_TRUE = "currently_true"
    CURRENTLY_FALSE = "currently_false"
    FALSE = "false"

    @property
    def negative(self) -> bool:
        return self in (Verdict.CURRENTLY_FALSE, Verdict.FALSE)


class SerializationError(ValueError):
    pass


class EventParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _is_scalar(value: Any) -> bool:
    return isinstance(value, (str, int, float, bool)) and not (
        isinstance(value, float) and value != value
    )


def serialize_event(event: Event) -> str:
    """Render ``event`` as one compact JSON object with sorted keys."""
    obj: dict[str, Any] = {}
    for key, value in event.fields.items():
        if key in RESERVED_KEYS:
            raise SerializationError(f"field key {key!r} collides with a reserved key")
        obj[key] = value
    obj["channel"] = event.channel.name
    obj["kind"] = event.channel.kind.value
    obj["time"] = event.pub_time
    obj["seq"] = event.seq
    try:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    except ValueError as exc:
        raise SerializationError(str(exc)) from exc


def _byte_offset(line: str, char_pos: int) -> int:
    return len(line[:char_pos].encode("utf-8"))


def deserialize_event(line: str) -> Event:
    line = line.rstrip("\r\n")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise EventParseError(f"malformed event line: {exc.msg}", _byte_offset(line, exc.pos)) from None
    end = len(line.encode("utf-8"))
    if not isinstance(obj, dict):
        raise EventParseError("event line is not a JSON object", 0)
    missing = [key for key in ("channel", "kind", "time", "seq") if key not in obj]
    if missing:
        raise EventParseError("missing reserved key(s) " + ", ".join(missing), end)

    def where(key: str) -> int:
        pos = line.find(json.dumps(key))
        return _byte_offset(line, pos) if pos >= 0 else end

    name, kind, time, seq = obj.pop("channel"), obj.pop("kind"), obj.pop("time"), obj.pop("seq")
    if not isinstance(name, str) or not name:
        raise EventParseError("'channel' must be a non-empty string", where("channel"))
    try:
        kind = ChannelKind(kind)
    except ValueError:
        raise EventParseError(f"unknown channel kind {kind!r}", where("kind")) from None
    for key, value in (("time", time), ("seq", seq)):
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise EventParseError(f"{key!r} must be a non-negative integer", where(key))
    for key, value in obj.items():
        if not _is_scalar(value):
            raise EventParseError(f"field {key!r} is not a scalar", where(key))
    return Event(ChannelId(kind, name), time, seq, obj)


def serialize_verdict(time: Timestamp, property_id: str, verdict: Verdict) -> str:
    return json.dumps(
        {"property_id": property_id, "time": time, "verdict": verdict.value},
        sort_keys=True,
        separators=(",", ":"),
    )
