"""Deterministic discrete-event publish/subscribe and request/response bus.

Callbacks are plain functions or generator functions. A generator callback
runs as a cooperative process and may yield commands to the bus::

    def on_change(msg):
        response = yield node.call_service("/SetLED_mon", {"req_id": msg.fields["id"]})
        yield node.sleep(5)

Each :class:`NodeHandle` executes its queued callbacks one at a time; while a
process is suspended, later callbacks for the same handle wait. Service
handlers run as their own process (like a service thread) and are not queued
behind the provider's callbacks.
"""

from __future__ import annotations

import heapq
import itertools
import json
import random
from collections import deque
from dataclasses import dataclass, field
from types import GeneratorType
from typing import Any, Callable, Iterable, Mapping

from .events import ChannelId, Event, Scalar, Timestamp, serialize_event

WILDCARD = "*"


class BusError(RuntimeError):
    pass


class UnknownTopic(BusError):
    pass


class UnknownService(BusError):
    pass


class ServiceRejected(Exception):
    """Raised by a service handler to reject a request."""


@dataclass
class BusConfig:
    """Seed and per-(topic, subscriber) latency model.

    Lookup for a (topic, subscriber) pair tries the exact key, then
    ``("*", subscriber)``, then ``(topic, "*")``, then the default.
    """

    seed: int = 0
    base_latency: dict[tuple[str, str], int] = field(default_factory=dict)
    jitter_max: dict[tuple[str, str], int] = field(default_factory=dict)
    default_latency: int = 0
    default_jitter: int = 0
    service_latency: int = 0

    def latency_for(self, topic: str, subscriber: str) -> int:
        return _lookup(self.base_latency, topic, subscriber, self.default_latency)

    def jitter_for(self, topic: str, subscriber: str) -> int:
        return _lookup(self.jitter_max, topic, subscriber, self.default_jitter)


def _lookup(table, topic, subscriber, default):
    for key in ((topic, subscriber), (WILDCARD, subscriber), (topic, WILDCARD)):
        if key in table:
            return table[key]
    return default


@dataclass(frozen=True)
class Delivery:
    event: Event
    subscriber: str
    delivered_at: Timestamp

    def to_json(self) -> str:
        obj = json.loads(serialize_event(self.event))
        obj["delivered_at"] = self.delivered_at
        obj["subscriber"] = self.subscriber
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# -- commands yielded by processes ---------------------------------------------


@dataclass(frozen=True)
class Sleep:
    duration: int


@dataclass(frozen=True)
class ServiceCall:
    caller: "NodeHandle"
    service: str
    request: Mapping[str, Scalar]


class Future:
    """One-shot value a process can wait on with ``value = yield future``."""

    def __init__(self, bus: "Bus"):
        self._bus = bus
        self.done = False
        self.value: Any = None
        self._waiters: list[_Process] = []

    def set(self, value: Any) -> None:
        if self.done:
            raise BusError("future already resolved")
        self.done = True
        self.value = value
        for proc in self._waiters:
            self._bus._resume_now(proc, value)
        self._waiters.clear()


@dataclass
class _Subscription:
    topic: str
    node: "NodeHandle"
    callback: Callable[[Event], Any]
    keep_latest: bool


class _Process:
    __slots__ = ("gen", "node", "on_done")

    def __init__(self, gen, node, on_done):
        self.gen = gen
        self.node = node
        self.on_done = on_done


class NodeHandle:
    def __init__(self, bus: "Bus", node_id: str):
        self.bus = bus
        self.node_id = node_id
        self.timers: list[tuple[int, Callable]] = []
        self.subscriptions: list[_Subscription] = []
        self.services: list[str] = []
        self._queue: deque[list] = deque()
        self._running = False

    def __repr__(self) -> str:
        return f"NodeHandle({self.node_id!r})"

    @property
    def busy(self) -> bool:
        return self._running

    def advertise(self, topic: str) -> None:
        self.bus._topics.setdefault(topic, [])

    def subscribe(self, topic: str, callback: Callable[[Event], Any], keep_latest: bool = False) -> None:
        sub = _Subscription(topic, self, callback, keep_latest)
        self.bus._topics.setdefault(topic, []).append(sub)
        self.subscriptions.append(sub)

    def create_timer(self, period: int, callback: Callable[[], Any]) -> None:
        if period <= 0:
            raise ValueError("timer period must be positive")
        self.timers.append((period, callback))
        self.bus._schedule_timer(self, period, callback, self.bus.now + period, 0)

    def provide(self, service: str, handler: Callable[[Mapping[str, Scalar]], Any]) -> None:
        if service in self.bus._services:
            raise BusError(f"service {service!r} already provided")
        self.bus._services[service] = (self, handler)
        self.services.append(service)

    def publish(self, topic: str, fields: Mapping[str, Scalar]) -> Event:
        return self.bus.publish(self, topic, fields)

    def call_service(self, service: str, request: Mapping[str, Scalar]) -> ServiceCall:
        """Command for a process: ``response = yield node.call_service(...)``."""
        return ServiceCall(self, service, dict(request))

    def sleep(self, duration: int) -> Sleep:
        return Sleep(duration)

    # queue management -----------------------------------------------------

    def _enqueue(self, callback, args, sub: _Subscription | None = None) -> None:
        if sub is not None and sub.keep_latest:
            for item in self._queue:
                if item[2] is sub:
                    item[1] = args
                    return
        self._queue.append([callback, args, sub])
        if not self._running:
            self._run_next()

    def _run_next(self) -> None:
        while self._queue and not self._running:
            callback, args, _ = self._queue.popleft()
            self._running = True
            self.bus._start(callback(*args), self, self._finished)

    def _finished(self, _value=None) -> None:
        self._running = False
        self._run_next()


class Bus:
    """Single-threaded event loop over logical nanoseconds."""

    def __init__(self, config: BusConfig | None = None):
        self.config = config or BusConfig()
        self.rng = random.Random(self.config.seed)
        self.now: Timestamp = 0
        self.nodes: dict[str, NodeHandle] = {}
        self.published: list[Event] = []
        self.deliveries: list[Delivery] = []
        self._topics: dict[str, list[_Subscription]] = {}
        self._services: dict[str, tuple[NodeHandle, Callable]] = {}
        self._seq: dict[ChannelId, int] = {}
        self._last_stamp = -1
        self._last_delivery: dict[tuple[str, str], int] = {}
        self._heap: list = []
        self._counter = itertools.count()
        self._timers_stopped = False

    # -- construction ------------------------------------------------------

    def node(self, node_id: str) -> NodeHandle:
        if node_id in self.nodes:
            raise BusError(f"node {node_id!r} already exists")
        handle = NodeHandle(self, node_id)
        self.nodes[node_id] = handle
        return handle

    @property
    def idle(self) -> bool:
        return not self._heap

    # -- stamping ----------------------------------------------------------

    def stamp(self) -> Timestamp:
        """Strictly increasing publication stamp, never earlier than ``now``.

        Several publications within one callback get consecutive nanoseconds,
        so their stamps follow program order.
        """
        self._last_stamp = max(self.now, self._last_stamp + 1)
        return self._last_stamp

    def next_seq(self, channel: ChannelId) -> int:
        seq = self._seq.get(channel, 0)
        self._seq[channel] = seq + 1
        return seq

    def make_event(self, channel: ChannelId, fields: Mapping[str, Scalar]) -> Event:
        event = Event(channel, self.stamp(), self.next_seq(channel), dict(fields))
        self.published.append(event)
        return event

    # -- topics ------------------------------------------------------------

    def publish(self, node: NodeHandle, topic: str, fields: Mapping[str, Scalar]) -> Event:
        if topic not in self._topics:
            raise UnknownTopic(f"topic {topic!r} is not advertised")
        event = self.make_event(ChannelId.topic(topic), fields)
        for sub in self._topics[topic]:
            sub_id = sub.node.node_id
            due = event.pub_time + self.config.latency_for(topic, sub_id)
            jitter = self.config.jitter_for(topic, sub_id)
            if jitter > 0:
                due += self.rng.randint(0, jitter)
            # per-(topic, subscriber) FIFO: never deliver before an earlier message
            key = (topic, sub_id)
            due = max(due, self._last_delivery.get(key, 0))
            self._last_delivery[key] = due
            self._push(due, topic, event.seq, self._deliver, (sub, event, due))
        return event

    def _deliver(self, sub: _Subscription, event: Event, due: int) -> None:
        self.deliveries.append(Delivery(event, sub.node.node_id, due))
        sub.node._enqueue(sub.callback, (event,), sub)

    # -- timers ------------------------------------------------------------

    def _schedule_timer(self, node, period, callback, due, firing):
        name = f"~timer:{node.node_id}"
        self._push(due, name, firing, self._fire_timer, (node, period, callback, due, firing))

    def stop_timers(self) -> None:
        """Cancel every timer; messages and calls already under way continue."""
        self._timers_stopped = True

    def _fire_timer(self, node, period, callback, due, firing):
        if self._timers_stopped:
            return
        self._schedule_timer(node, period, callback, due + period, firing + 1)
        node._enqueue(callback, ())

    # -- processes ---------------------------------------------------------

    def _start(self, result, node, on_done) -> None:
        if isinstance(result, GeneratorType):
            self._step(_Process(result, node, on_done), None)
        else:
            on_done(result)

    def _step(self, proc: _Process, value: Any, error: BaseException | None = None) -> None:
        try:
            if error is not None:
                command = proc.gen.throw(error)
            else:
                command = proc.gen.send(value)
        except StopIteration as stop:
            proc.on_done(stop.value)
            return
        self._handle(proc, command)

    def _handle(self, proc: _Process, command: Any) -> None:
        if isinstance(command, Sleep):
            self._push(self.now + max(0, command.duration), "~resume", 0, self._step, (proc, None))
        elif isinstance(command, ServiceCall):
            self._call(proc, command)
        elif isinstance(command, Future):
            if command.done:
                self._step(proc, command.value)
            else:
                command._waiters.append(proc)
        else:
            self._step(proc, None, BusError(f"process yielded unsupported command {command!r}"))

    def _resume_now(self, proc: _Process, value: Any) -> None:
        self._push(self.now, "~resume", 0, self._step, (proc, value))

    # -- services ----------------------------------------------------------

    def _call(self, proc: _Process, call: ServiceCall) -> None:
        if call.service not in self._services:
            self._step(proc, None, UnknownService(f"service {call.service!r} is not provided"))
            return
        provider, handler = self._services[call.service]
        self.make_event(ChannelId.request(call.service), call.request)
        hop = self.config.service_latency

        def respond(result):
            if isinstance(result, ServiceFailure):
                response = {"success": False, "error": result.reason}
            else:
                response = dict(result) if result is not None else {}
            self.make_event(ChannelId.response(call.service), response)
            self._push(self.now + hop, "~resume", 0, self._step, (proc, response))

        def begin():
            try:
                result = handler(dict(call.request))
            except ServiceRejected as exc:
                respond(ServiceFailure(str(exc) or "rejected"))
                return
            if isinstance(result, GeneratorType):
                self._step(_Process(_guard(result), provider, respond), None)
            else:
                respond(result)

        if hop:
            self._push(self.now + hop, "~service", 0, lambda: begin(), ())
        else:
            begin()

    # -- main loop ---------------------------------------------------------

    def _push(self, time, name, seq, fn, args) -> None:
        heapq.heappush(self._heap, (time, name, seq, next(self._counter), fn, args))

    def run(self, until: Callable[["Bus"], bool] | None = None, max_time: int | None = None) -> None:
        """Process events in (time, channel name, seq) order.

        Stops once ``until(bus)`` holds after an event, when the next event
        lies beyond ``max_time``, or when nothing is left.
        """
        if until is not None and until(self):
            return
        while self._heap:
            if max_time is not None and self._heap[0][0] > max_time:
                self.now = max(self.now, max_time)
                return
            time, _name, _seq, _n, fn, args = heapq.heappop(self._heap)
            self.now = max(self.now, time)
            fn(*args)
            if until is not None and until(self):
                return

    def dump_deliveries(self) -> Iterable[str]:
        for delivery in self.deliveries:
            yield delivery.to_json()


@dataclass(frozen=True)
class ServiceFailure:
    reason: str


def _guard(gen):
    """Wrap a handler process so ServiceRejected becomes an error response."""
    try:
        result = yield from gen
    except ServiceRejected as exc:
        return ServiceFailure(str(exc) or "rejected")
    return result


def create_bus(config: BusConfig | None = None) -> Bus:
    return Bus(config)
