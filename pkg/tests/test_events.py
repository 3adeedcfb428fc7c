import json

import pytest
from hypothesis import given, settings

from pubsub_rv.events import (
    ChannelId,
    ChannelKind,
    Event,
    EventParseError,
    SerializationError,
    Verdict,
    deserialize_event,
    serialize_event,
    serialize_verdict,
)

from strategies import events


def test_serialize_flattens_fields_with_sorted_keys():
    e = Event(ChannelId.topic("/battery_status"), 0, 0, {"id": 0, "status": "1", "status_change": True})
    assert serialize_event(e) == (
        '{"channel":"/battery_status","id":0,"kind":"topic","seq":0,"status":"1","status_change":true,"time":0}'
    )


def test_empty_fields_leave_only_reserved_keys():
    line = serialize_event(Event(ChannelId.request("/SetLED"), 5, 2))
    assert set(json.loads(line)) == {"channel", "kind", "time", "seq"}
    assert "\n" not in line


@pytest.mark.parametrize("key", ["channel", "kind", "time", "seq"])
def test_reserved_key_collision_names_the_key(key):
    with pytest.raises(SerializationError, match=key):
        serialize_event(Event(ChannelId.topic("/x"), 0, 0, {key: 1}))


@settings(max_examples=1000)
@given(events)
def test_round_trip(e):
    line = serialize_event(e)
    back = deserialize_event(line)
    assert back == e
    assert serialize_event(back) == line


def test_missing_time_is_reported():
    with pytest.raises(EventParseError, match="time"):
        deserialize_event('{"channel":"/x"}')


def test_truncated_line_reports_offset():
    line = serialize_event(Event(ChannelId.topic("/x"), 1, 0, {"a": 1}))
    with pytest.raises(EventParseError) as info:
        deserialize_event(line[:-4])
    assert 0 < info.value.offset <= len(line)


def test_offset_is_in_bytes():
    with pytest.raises(EventParseError) as info:
        deserialize_event('{"ü":1,')
    assert info.value.offset == len('{"ü":1,'.encode())


def test_non_scalar_value_rejected():
    with pytest.raises(EventParseError, match="not a scalar"):
        deserialize_event('{"channel":"/x","kind":"topic","time":0,"seq":0,"v":[1]}')


def test_nested_fields_rejected_at_construction():
    with pytest.raises(TypeError):
        Event(ChannelId.topic("/x"), 0, 0, {"v": {"a": 1}})


def test_negative_verdicts():
    assert [v for v in Verdict if v.negative] == [Verdict.CURRENTLY_FALSE, Verdict.FALSE]


def test_channel_order_ties_break_by_name_then_kind():
    a = Event(ChannelId.topic("/a"), 7, 0)
    b = Event(ChannelId.topic("/b"), 7, 0)
    req = Event(ChannelId.request("/a"), 7, 0)
    assert sorted([b, req, a], key=lambda e: e.order_key) == [a, req, b]
    assert ChannelId.request("/s").kind is ChannelKind.SERVICE_REQUEST


def test_verdict_line():
    assert serialize_verdict(3, "1a", Verdict.CURRENTLY_FALSE) == (
        '{"property_id":"1a","time":3,"verdict":"currently_false"}'
    )
