"""Monitor node: interception, publication-order release, service mediation.

Events on ordered channels wait in a :class:`ReorderBuffer` and are handed
to the oracle, earliest publication first, only while every gate of the
buffer holds at least one event. A service contributes a request and a
response channel that share one gate, so a pending request does not wait
for a response that cannot exist before the request is released.
"""

from __future__ import annotations

import csv
import logging
import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Protocol, TextIO

from .bus import Bus, Future, UnknownService
from .config import MonitorConfig, Mode, ServiceSpec
from .events import (
    ChannelId,
    ChannelKind,
    Event,
    Scalar,
    Timestamp,
    Verdict,
    serialize_event,
    serialize_verdict,
)

log = logging.getLogger(__name__)

VERDICT_TOPIC = "/verdict"
ERROR_TOPIC = "/monitor_error"


class OracleFailure(RuntimeError):
    """The oracle session broke; the monitor stops rather than skip checks."""


class BufferOrderError(RuntimeError):
    """An event arrived out of publication order on its own channel."""


@dataclass(frozen=True)
class WaitRecord:
    channel: ChannelId
    seq: int
    pub_time: Timestamp
    buffered_at: Timestamp
    released_at: Timestamp

    @property
    def wait(self) -> int:
        return self.released_at - self.buffered_at


WAIT_CSV_HEADER = ["channel", "kind", "seq", "pub_time", "buffered_at", "released_at"]


def write_wait_csv(records: Iterable[WaitRecord], out: TextIO, prefix: Mapping[str, object] | None = None) -> None:
    prefix = dict(prefix or {})
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(prefix) + WAIT_CSV_HEADER)
    for r in records:
        writer.writerow(
            list(prefix.values())
            + [r.channel.name, r.channel.kind.value, r.seq, r.pub_time, r.buffered_at, r.released_at]
        )


class ReorderBuffer:
    """Per-channel timestamp queues plus the key -> event map.

    Keys are ``Event.order_key`` tuples, which makes simultaneous
    publications on different channels distinct and totally ordered.
    ``gates`` maps each channel to the gate it counts towards; by default
    every channel is its own gate.
    """

    def __init__(
        self,
        channels: Iterable[ChannelId],
        gates: Mapping[ChannelId, str] | None = None,
        on_change: Callable[["ReorderBuffer"], None] | None = None,
    ):
        self.ordered_channels = frozenset(channels)
        self.buffer: dict[ChannelId, deque[tuple]] = {c: deque() for c in sorted(self.ordered_channels)}
        self.messages: dict[tuple, Event] = {}
        self.buffered_at: dict[tuple, Timestamp] = {}
        gates = dict(gates or {})
        self.gate_of = {c: gates.get(c, str(c)) for c in self.ordered_channels}
        self._gate_sizes = {g: 0 for g in self.gate_of.values()}
        self.on_change = on_change

    def __len__(self) -> int:
        return len(self.messages)

    def __contains__(self, channel: ChannelId) -> bool:
        return channel in self.ordered_channels

    def push(self, event: Event, now: Timestamp = 0) -> None:
        queue = self.buffer[event.channel]
        key = event.order_key
        if queue and queue[-1] >= key:
            raise BufferOrderError(f"{event.channel} received {key} after {queue[-1]}")
        queue.append(key)
        self.messages[key] = event
        self.buffered_at[key] = now
        self._gate_sizes[self.gate_of[event.channel]] += 1
        if self.on_change:
            self.on_change(self)

    def ready(self) -> bool:
        """True while no gate is empty."""
        return bool(self._gate_sizes) and all(self._gate_sizes.values())

    def earliest(self) -> tuple:
        # each queue is sorted, so the minimum over heads is the minimum of messages
        return min(q[0] for q in self.buffer.values() if q)

    def pop_earliest(self) -> tuple[Event, Timestamp]:
        key = self.earliest()
        event = self.messages.pop(key)
        self.buffer[event.channel].popleft()
        self._gate_sizes[self.gate_of[event.channel]] -= 1
        buffered_at = self.buffered_at.pop(key)
        if self.on_change:
            self.on_change(self)
        return event, buffered_at

    def queues_sorted(self) -> bool:
        return all(all(a < b for a, b in zip(q, list(q)[1:])) for q in self.buffer.values())


class OracleBackend(Protocol):
    def check_line(self, line: str) -> list[tuple[str, Verdict]]: ...


class OracleChannel:
    """Serialized, mutually exclusive access to an oracle session."""

    def __init__(self, session: OracleBackend):
        self.session = session
        self._lock = threading.Lock()

    def exchange(self, event: Event) -> list[tuple[str, Verdict]]:
        line = serialize_event(event)
        with self._lock:
            try:
                return self.session.check_line(line)
            except Exception as exc:  # fail-stop on any oracle fault
                raise OracleFailure(f"oracle failed on {line}: {exc}") from exc


def default_oracle_event(event: Event) -> Event:
    """Adds the channel name under ``topic`` or ``service`` plus kind flags."""
    fields = dict(event.fields)
    kind = event.channel.kind
    if kind is ChannelKind.TOPIC:
        fields["topic"] = event.channel.name
    else:
        fields["service"] = event.channel.name
        fields["request"] = kind is ChannelKind.SERVICE_REQUEST
        fields["response"] = kind is ChannelKind.SERVICE_RESPONSE
    return event.with_fields(fields)


def _worst(verdicts: Iterable[Verdict]) -> Verdict:
    rank = [Verdict.TRUE, Verdict.CURRENTLY_TRUE, Verdict.CURRENTLY_FALSE, Verdict.FALSE]
    return max(verdicts, key=rank.index, default=Verdict.CURRENTLY_TRUE)


class Monitor:
    """Monitor node attached to a :class:`Bus`.

    Topic traffic is received on a handle named ``config.monitor_id``;
    mediated services are served from ``<monitor_id>/services`` so a call
    waiting for its verdict never blocks topic interception.
    """

    def __init__(
        self,
        bus: Bus,
        config: MonitorConfig,
        oracle: OracleBackend | None = None,
        *,
        to_oracle: Callable[[Event], Event] = default_oracle_event,
        event_log: TextIO | None = None,
        verdict_log: TextIO | None = None,
        latch: bool = False,
        on_buffer_change: Callable[[ReorderBuffer], None] | None = None,
    ):
        if config.mode is Mode.ONLINE and oracle is None:
            raise ValueError("an online monitor needs an oracle")
        self.bus = bus
        self.config = config
        self.online = config.mode is Mode.ONLINE
        self.oracle = OracleChannel(oracle) if oracle is not None else None
        self.to_oracle = to_oracle
        self.event_log = event_log
        self.verdict_log = verdict_log
        self.latch = latch
        self.node = bus.node(config.monitor_id)
        self.service_node = bus.node(config.monitor_id + "/services")

        ordered: list[ChannelId] = []
        gates: dict[ChannelId, str] = {}
        for topic in config.topics:
            if topic.ordered:
                ordered.append(ChannelId.topic(topic.name))
            self.node.subscribe(topic.name, self._topic_callback(ChannelId.topic(topic.name)))
            if topic.filtered:
                self.node.advertise(topic.name + "_mon")
        for svc in config.services:
            if svc.ordered:
                for channel in (ChannelId.request(svc.name), ChannelId.response(svc.name)):
                    ordered.append(channel)
                    gates[channel] = "service:" + svc.name
            self.service_node.provide(svc.mediated_name, self._service_handler(svc))
        self.reorder = ReorderBuffer(ordered, gates, on_buffer_change)
        if self.online:
            self.node.advertise(VERDICT_TOPIC)
            self.node.advertise(ERROR_TOPIC)

        self._lock = threading.RLock()
        self._flushing = False
        self._pending: dict[tuple, Future] = {}
        self._service_seq: dict[ChannelId, int] = {}
        self._latched: set[str] = set()
        self.dispatched: list[Event] = []
        self.verdicts: list[tuple[Timestamp, str, Verdict]] = []
        self.wait_records: list[WaitRecord] = []
        self.errors: list[dict] = []
        self.ignored: list[Event] = []

    # -- topics ------------------------------------------------------------

    def _topic_callback(self, channel: ChannelId):
        return lambda msg: self.on_topic_message(msg, channel)

    def on_topic_message(self, msg: Event, channel: ChannelId) -> None:
        spec = self.config.topic(channel.name) if channel.kind is ChannelKind.TOPIC else None
        if spec is None:
            log.error("event on unconfigured channel %s ignored", channel)
            self.ignored.append(msg)
            return
        if channel in self.reorder:
            self.add_to_buffer(msg, channel)
        else:
            self._release(msg, None)

    # -- ordering ----------------------------------------------------------

    def add_to_buffer(self, msg: Event, channel: ChannelId) -> None:
        if msg.channel != channel:
            raise ValueError(f"event on {msg.channel} added to buffer of {channel}")
        self.reorder.push(msg, self.bus.now)
        with self._lock:
            while self.reorder.ready():
                self.send_earliest_message_to_oracle()

    def send_earliest_message_to_oracle(self) -> Verdict:
        if not (self.reorder.ready() or self._flushing):
            raise RuntimeError("release attempted while a gate is empty")
        event, buffered_at = self.reorder.pop_earliest()
        return self._release(event, buffered_at)

    def flush(self) -> None:
        """Release every buffered event in publication order, ignoring gates."""
        with self._lock:
            self._flushing = True
            try:
                while len(self.reorder):
                    self.send_earliest_message_to_oracle()
            finally:
                self._flushing = False

    def _release(self, event: Event, buffered_at: Timestamp | None) -> Verdict:
        now = self.bus.now
        if buffered_at is not None:
            self.wait_records.append(
                WaitRecord(event.channel, event.seq, event.pub_time, buffered_at, now)
            )
        verdict = self.dispatch(event)
        if self.online:
            self._after_verdict(event, verdict)
        future = self._pending.pop(event.order_key, None)
        if future is not None:
            future.set(verdict)
        return verdict

    # -- oracle ------------------------------------------------------------

    def dispatch(self, msg: Event) -> Verdict:
        """Send one event to the oracle; offline monitors only log it.

        Returns the most severe verdict over all properties. The offline
        placeholder (CURRENTLY_TRUE) is never published.
        """
        oracle_event = self.to_oracle(msg)
        line = serialize_event(oracle_event)
        self.dispatched.append(oracle_event)
        if self.event_log is not None:
            self.event_log.write(line + "\n")
        if not self.online:
            return Verdict.CURRENTLY_TRUE
        results = self.oracle.exchange(oracle_event)
        out = []
        for pid, verdict in results:
            if self.latch:
                if pid in self._latched:
                    verdict = Verdict.FALSE
                elif verdict.negative:
                    self._latched.add(pid)
            out.append((pid, verdict))
            self.verdicts.append((oracle_event.pub_time, pid, verdict))
            if self.verdict_log is not None:
                self.verdict_log.write(serialize_verdict(oracle_event.pub_time, pid, verdict) + "\n")
            self.node.publish(
                VERDICT_TOPIC,
                {"property_id": pid, "verdict": verdict.value, "event_time": oracle_event.pub_time},
            )
        self.last_results = out
        return _worst(v for _, v in out)

    def _after_verdict(self, event: Event, verdict: Verdict) -> None:
        if verdict.negative:
            failed = ",".join(pid for pid, v in self.last_results if v.negative)
            self._publish_error(event, f"violates {failed}")
            return
        if event.channel.kind is ChannelKind.TOPIC:
            spec = self.config.topic(event.channel.name)
            if spec is not None and spec.filtered:
                self.node.publish(event.channel.name + "_mon", dict(event.fields))

    def _publish_error(self, event: Event, reason: str) -> None:
        fields = {
            "monitored_channel": event.channel.name,
            "kind": event.channel.kind.value,
            "reason": reason,
            "event_time": event.pub_time,
            "event_seq": event.seq,
        }
        self.errors.append(fields)
        self.node.publish(ERROR_TOPIC, {k: v for k, v in fields.items() if k != "kind"} | {"channel_kind": fields["kind"]})

    # -- services ----------------------------------------------------------

    def _service_handler(self, spec: ServiceSpec):
        return lambda request: self.mediate_service(request, spec)

    def _service_event(self, channel: ChannelId, pub_time: Timestamp, fields: Mapping[str, Scalar]) -> Event:
        seq = self._service_seq.get(channel, 0)
        self._service_seq[channel] = seq + 1
        return Event(channel, pub_time, seq, dict(fields))

    def _check(self, event: Event, ordered: bool):
        if not ordered:
            return self._release(event, None)
        future = Future(self.bus)
        self._pending[event.order_key] = future
        self.add_to_buffer(event, event.channel)
        verdict = yield future
        return verdict

    def mediate_service(self, request: Mapping[str, Scalar], spec: ServiceSpec):
        """Service handler process for ``spec.mediated_name``.

        The request is checked first; a negative verdict with filtering on
        answers the client with an error and the real service is not called.
        Otherwise the real service is called and its response checked the
        same way. A response is stamped with its request's publication time:
        the exchange is one interaction that entered the monitor at that
        instant, and the response's channel sorts right after the request's.
        """
        enforce = self.online and self.config.filtering
        req_event = self._service_event(ChannelId.request(spec.name), self.bus.stamp(), request)
        verdict = yield from self._as_process(self._check(req_event, spec.ordered))
        if enforce and verdict.negative:
            return {"success": False, "error": f"request rejected by monitor ({spec.name})"}
        try:
            response = yield self.service_node.call_service(spec.name, request)
        except UnknownService as exc:
            return {"success": False, "error": f"service unavailable: {exc}"}
        resp_event = self._service_event(ChannelId.response(spec.name), req_event.pub_time, response)
        verdict = yield from self._as_process(self._check(resp_event, spec.ordered))
        if enforce and verdict.negative:
            return {"success": False, "error": f"response rejected by monitor ({spec.name})"}
        return response

    @staticmethod
    def _as_process(result):
        if isinstance(result, Verdict):
            return result
        return (yield from result)

    # -- export ------------------------------------------------------------

    def write_waits(self, out: TextIO) -> None:
        write_wait_csv(self.wait_records, out)
