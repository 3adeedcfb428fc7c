"""Battery / supervisor / LED panel scenario used for the end-to-end runs.

The battery publishes ``{id, percentage = 100 - id}`` at 25 Hz. The
supervisor samples the newest percentage at 10 Hz and reports a status;
on each status change a client on the supervisor calls ``/SetLED`` (through
the monitor's ``/SetLED_mon`` when a monitor is present). The LED panel
answers the call and republishes its lights at 35 Hz.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from importlib import resources

from .bus import Bus, BusConfig, UnknownService
from .config import MonitorConfig, parse_config
from .events import ChannelKind, Event, Scalar, Timestamp, Verdict
from .monitor import Monitor, ReorderBuffer, WaitRecord
from .oracle import OracleSession, PropertySpec, parse_property_file

MS = 1_000_000
SECOND = 1_000_000_000

BATTERY = "/battery_percentage"
INPUT_ACCEPTED = "/input_accepted"
BATTERY_STATUS = "/battery_status"
STATUS_CHANGE = "/status_change"
STATUS_ACCEPTED = "/status_accepted"
LED_PANEL = "/LED_panel"
SET_LED = "/SetLED"


@dataclass
class ScenarioConfig:
    battery_hz: float = 25.0
    supervisor_hz: float = 10.0
    led_hz: float = 35.0
    latency: int = 1 * MS
    service_latency: int = MS // 2
    # twice the battery's inter-publication gap
    monitor_jitter: int = 80 * MS
    stop_percentage: int = 0

    def period(self, hz: float) -> int:
        return round(SECOND / hz)


def status_for(percentage: int) -> int:
    if percentage > 40:
        return 1
    if percentage > 30:
        return 2
    return 3


# -- predicate layer -------------------------------------------------------------


def percentage_bucket(value: Scalar) -> str:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return "INVALID"
    if 40 < value <= 100:
        return "1"
    if 30 < value <= 40:
        return "2"
    if 0 <= value <= 30:
        return "3"
    return "INVALID"


def status_string(value: Scalar) -> str:
    if isinstance(value, bool):
        return "INVALID"
    text = str(value) if isinstance(value, (int, str)) else ""
    return text if text in ("0", "1", "2", "3") else "INVALID"


def build_oracle_event(raw: Event) -> Event:
    """Rewrite a monitored event into the predicates the properties use."""
    kind = raw.channel.kind
    src = raw.fields
    if kind is ChannelKind.TOPIC:
        fields: dict[str, Scalar] = {"topic": raw.channel.name}
        for key, value in src.items():
            if key == "percentage":
                fields[key] = percentage_bucket(value)
            elif key == "status":
                fields[key] = status_string(value)
            elif key == "status_change":
                fields[key] = value is True
            else:
                fields[key] = value
        return raw.with_fields(fields)
    fields = {
        "service": raw.channel.name,
        "request": kind is ChannelKind.SERVICE_REQUEST,
        "response": kind is ChannelKind.SERVICE_RESPONSE,
    }
    if kind is ChannelKind.SERVICE_REQUEST:
        for key in ("req_id", "req_status"):
            if key in src:
                fields[key] = status_string(src[key]) if key == "req_status" else src[key]
    elif "res_id" in src:
        fields["res_id"] = src["res_id"]
    return raw.with_fields(fields)


# -- properties and shipped configuration ------------------------------------------


def _data(name: str) -> str:
    return resources.files("pubsub_rv").joinpath("data", name).read_text()


def case_study_properties() -> list[tuple[str, str]]:
    return [(s.property_id, s.text) for s in parse_property_file(_data("case_study.properties"))]


def case_study_config() -> MonitorConfig:
    return parse_config(_data("case_study.config"))


def hazard_example_config() -> MonitorConfig:
    return parse_config(_data("hazard_example.config"))


# -- nodes ---------------------------------------------------------------------------


@dataclass
class RoundTrip:
    call_index: int
    request: dict
    started: Timestamp
    finished: Timestamp
    response: dict

    @property
    def duration(self) -> int:
        return self.finished - self.started


@dataclass
class ScenarioState:
    next_id: int = 0
    done: bool = False
    latest: Event | None = None
    last_status: int | None = None
    status_changes: list[tuple[int, int]] = field(default_factory=list)
    led: tuple[bool, bool, bool] = (False, False, False)
    led_requests: list[dict] = field(default_factory=list)
    roundtrips: list[RoundTrip] = field(default_factory=list)
    client_errors: list[dict] = field(default_factory=list)


def install_nodes(bus: Bus, scenario: ScenarioConfig, service_name: str) -> ScenarioState:
    """Create the battery, supervisor, client and LED panel on ``bus``."""
    state = ScenarioState()

    battery = bus.node("battery")
    battery.advertise(BATTERY)

    def battery_tick():
        if state.done:
            return
        percentage = 100 - state.next_id
        battery.publish(BATTERY, {"id": state.next_id, "percentage": percentage})
        state.next_id += 1
        if percentage <= scenario.stop_percentage:
            state.done = True

    battery.create_timer(scenario.period(scenario.battery_hz), battery_tick)

    supervisor = bus.node("battery_supervisor")
    for topic in (INPUT_ACCEPTED, BATTERY_STATUS, STATUS_CHANGE):
        supervisor.advertise(topic)

    def keep_latest(msg: Event):
        state.latest = msg

    def supervisor_tick():
        msg, state.latest = state.latest, None
        if msg is None:
            return
        pid = msg.fields["id"]
        status = status_for(msg.fields["percentage"])
        changed = status != state.last_status
        supervisor.publish(INPUT_ACCEPTED, {"id": pid})
        supervisor.publish(BATTERY_STATUS, {"id": pid, "status": status, "status_change": changed})
        if changed:
            state.last_status = status
            state.status_changes.append((pid, status))
            supervisor.publish(STATUS_CHANGE, {"id": pid, "status": status})

    supervisor.subscribe(BATTERY, keep_latest)
    supervisor.create_timer(scenario.period(scenario.supervisor_hz), supervisor_tick)

    # service calls run on their own handle so topic publication never waits on them
    client = bus.node("battery_supervisor/led_client")

    def on_status_change(msg: Event):
        request = {"req_id": msg.fields["id"], "req_status": str(msg.fields["status"])}
        index = len(state.roundtrips)
        started = bus.now
        try:
            response = yield client.call_service(service_name, request)
        except UnknownService as exc:
            response = {"success": False, "error": str(exc)}
        state.roundtrips.append(RoundTrip(index, request, started, bus.now, dict(response)))
        if not response.get("success", False):
            state.client_errors.append(dict(response))

    client.subscribe(STATUS_CHANGE, on_status_change)

    panel = bus.node("led_panel")
    panel.advertise(STATUS_ACCEPTED)
    panel.advertise(LED_PANEL)

    def publish_lights():
        green, yellow, red = state.led
        panel.publish(LED_PANEL, {"green": green, "yellow": yellow, "red": red})

    def set_led(request):
        state.led_requests.append(dict(request))
        status = request.get("req_status")
        if status not in ("1", "2", "3"):
            return {"success": False, "res_id": request.get("req_id", -1)}
        panel.publish(STATUS_ACCEPTED, {"id": request["req_id"]})
        state.led = (status == "1", status == "2", status == "3")
        publish_lights()
        return {"success": True, "res_id": request["req_id"]}

    panel.provide(SET_LED, set_led)
    panel.create_timer(scenario.period(scenario.led_hz), publish_lights)
    return state


# -- running ------------------------------------------------------------------------------


@dataclass
class RunReport:
    seed: int
    monitor: bool
    ordering: bool
    jitter: int
    property_ids: list[str]
    verdict_counts: dict[str, dict[str, int]]
    roundtrips: list[RoundTrip]
    wait_records: list[WaitRecord]
    status_changes: list[tuple[int, int]]
    led_requests: list[dict]
    oracle_events: list[Event]
    flushed: list[Event]
    event_log: str
    verdict_log: str
    end_time: Timestamp
    buffer_violations: int = 0
    buffered_before_flush: int = 0
    buffered_after_flush: int = 0
    trace: list[str] = field(default_factory=list)

    def negatives(self, property_id: str) -> int:
        counts = self.verdict_counts.get(property_id, {})
        return counts.get(Verdict.CURRENTLY_FALSE.value, 0) + counts.get(Verdict.FALSE.value, 0)

    @property
    def total_negatives(self) -> int:
        return sum(self.negatives(pid) for pid in self.property_ids)


def run_case_study(
    seed: int = 0,
    *,
    ordering: bool = True,
    monitor: bool = True,
    jitter: int | None = None,
    scenario: ScenarioConfig | None = None,
    config: MonitorConfig | None = None,
    properties: list[tuple[str, str]] | None = None,
    check_buffers: bool = False,
    trace: bool = False,
) -> RunReport:
    """Run the scenario until the battery reaches the stop percentage, then flush.

    Termination cancels all timers and lets in-flight deliveries land before
    the monitor's buffers are flushed.

    ``check_buffers`` counts buffer states whose queues are not sorted,
    inspected after every buffer mutation. ``trace`` keeps every bus
    delivery as a JSON line.
    """
    scenario = scenario or ScenarioConfig()
    jitter = scenario.monitor_jitter if jitter is None else jitter
    config = config or case_study_config()
    if not ordering:
        config = config.with_ordering(False)
    properties = properties if properties is not None else case_study_properties()

    bus_config = BusConfig(
        seed=seed,
        default_latency=scenario.latency,
        service_latency=scenario.service_latency,
        jitter_max={("*", config.monitor_id): jitter},
    )
    bus = Bus(bus_config)
    violations = 0

    def inspect(buffer: ReorderBuffer):
        nonlocal violations
        if not buffer.queues_sorted():
            violations += 1

    mon = None
    events_out, verdicts_out = io.StringIO(), io.StringIO()
    if monitor:
        session = OracleSession(PropertySpec(pid, text) for pid, text in properties)
        mon = Monitor(
            bus,
            config,
            session,
            to_oracle=build_oracle_event,
            event_log=events_out,
            verdict_log=verdicts_out,
            on_buffer_change=inspect if check_buffers else None,
        )
        spec = config.service(SET_LED)
        service_name = spec.mediated_name if spec else SET_LED
    else:
        service_name = SET_LED
    state = install_nodes(bus, scenario, service_name)
    bus.run(until=lambda _bus: state.done)
    # stop every publisher, let messages already sent arrive, then flush
    bus.stop_timers()
    bus.run()

    flushed: list[Event] = []
    residual = (0, 0)
    counts: dict[str, dict[str, int]] = {pid: {} for pid, _ in properties} if monitor else {}
    if mon is not None:
        before = len(mon.dispatched)
        pending = len(mon.reorder)
        mon.flush()
        residual = (pending, len(mon.reorder))
        flushed = mon.dispatched[before:]
        for _, pid, verdict in mon.verdicts:
            counts[pid][verdict.value] = counts[pid].get(verdict.value, 0) + 1

    return RunReport(
        seed=seed,
        monitor=monitor,
        ordering=ordering and monitor,
        jitter=jitter,
        property_ids=[pid for pid, _ in properties] if monitor else [],
        verdict_counts=counts,
        roundtrips=state.roundtrips,
        wait_records=list(mon.wait_records) if mon else [],
        status_changes=state.status_changes,
        led_requests=state.led_requests,
        oracle_events=list(mon.dispatched) if mon else [],
        flushed=flushed,
        event_log=events_out.getvalue(),
        verdict_log=verdicts_out.getvalue(),
        end_time=bus.now,
        buffer_violations=violations,
        buffered_before_flush=residual[0],
        buffered_after_flush=residual[1],
        trace=list(bus.dump_deliveries()) if trace else [],
    )
