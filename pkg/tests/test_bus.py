import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pubsub_rv.bus import Bus, BusConfig, ServiceRejected, UnknownService, UnknownTopic, create_bus


class FixedJitter:
    """Stands in for the bus RNG and returns preset jitter draws."""

    def __init__(self, draws):
        self.draws = list(draws)

    def randint(self, lo, hi):
        return self.draws.pop(0)


def test_fresh_bus():
    bus = create_bus(BusConfig())
    assert bus.now == 0
    assert bus.nodes == {}
    bus.run()
    assert bus.now == 0


def test_fifo_clamp_holds_back_a_later_publication():
    bus = Bus(BusConfig(jitter_max={("/t", "sub"): 100}))
    bus.rng = FixedJitter([40, 20])
    pub, sub = bus.node("pub"), bus.node("sub")
    pub.advertise("/t")
    got = []
    sub.subscribe("/t", lambda e: got.append((bus.now, e.fields["n"])))
    bus._push(10, "~test", 0, lambda: pub.publish("/t", {"n": 1}), ())
    bus._push(20, "~test", 1, lambda: pub.publish("/t", {"n": 2}), ())
    bus.run()
    assert got == [(50, 1), (50, 2)]


def test_publish_without_subscribers_records_event():
    bus = Bus()
    node = bus.node("n")
    node.advertise("/lonely")
    event = node.publish("/lonely", {"a": 1})
    bus.run()
    assert bus.published == [event]
    assert bus.deliveries == []


def test_zero_latency_delivers_at_pub_time():
    bus = Bus()
    pub, sub = bus.node("pub"), bus.node("sub")
    pub.advertise("/t")
    seen = []
    sub.subscribe("/t", lambda e: seen.append((bus.now, e.pub_time)))
    bus._push(7, "~test", 0, lambda: pub.publish("/t", {}), ())
    bus.run()
    assert seen == [(7, 7)]


def test_unknown_topic():
    bus = Bus()
    with pytest.raises(UnknownTopic):
        bus.node("n").publish("/nope", {})


def _call_and_record(bus, node, service, request, out):
    def proc():
        response = yield node.call_service(service, request)
        out.append((bus.now, response))

    bus._push(bus.now, "~test", 0, lambda: node._enqueue(proc, ()), ())


def test_echo_service():
    bus = Bus()
    server, client = bus.node("server"), bus.node("client")
    server.provide("/echo", lambda req: req)
    out = []
    _call_and_record(bus, client, "/echo", {"x": 3, "y": "z"}, out)
    bus.run()
    assert out == [(0, {"x": 3, "y": "z"})]


def test_handler_that_sleeps_delays_the_caller():
    bus = Bus()
    server, client = bus.node("server"), bus.node("client")

    def slow(req):
        yield server.sleep(5)
        return {"ok": True}

    server.provide("/slow", slow)
    out = []
    _call_and_record(bus, client, "/slow", {}, out)
    bus.run()
    assert out == [(5, {"ok": True})]


def test_nested_calls_resume_last_in_first_out():
    bus = Bus(BusConfig(service_latency=1))
    a, b, c = bus.node("a"), bus.node("b"), bus.node("c")
    order = []

    def handle_b(req):
        resp = yield b.call_service("/c", req)
        order.append(("b", bus.now))
        return resp

    def handle_c(req):
        order.append(("c", bus.now))
        return {"depth": 2}

    b.provide("/b", handle_b)
    c.provide("/c", handle_c)
    out = []
    _call_and_record(bus, a, "/b", {}, out)
    bus.run()
    assert order == [("c", 2), ("b", 3)]
    assert out == [(4, {"depth": 2})]


def test_rejection_reaches_caller_as_error_mapping():
    bus = Bus()
    server, client = bus.node("server"), bus.node("client")

    def reject(req):
        raise ServiceRejected("bad status")

    server.provide("/s", reject)
    out = []
    _call_and_record(bus, client, "/s", {}, out)
    bus.run()
    assert out == [(0, {"success": False, "error": "bad status"})]


def test_unknown_service_raises_in_caller():
    bus = Bus()
    client = bus.node("client")
    caught = []

    def proc():
        try:
            yield client.call_service("/missing", {})
        except UnknownService as exc:
            caught.append(str(exc))

    client._enqueue(proc, ())
    bus.run()
    assert caught and "/missing" in caught[0]


def test_timer_fires_five_times_by_200ms():
    bus = Bus()
    node = bus.node("n")
    fired = []
    node.create_timer(40_000_000, lambda: fired.append(bus.now))
    bus.run(until=lambda b: b.now >= 200_000_000)
    assert fired == [40_000_000 * k for k in range(1, 6)]


def test_callbacks_of_one_node_never_overlap():
    bus = Bus()
    pub, sub = bus.node("pub"), bus.node("sub")
    pub.advertise("/t")
    active, log = [], []

    def handler(e):
        assert not active
        active.append(e)
        log.append(("start", e.fields["n"], bus.now))
        yield sub.sleep(10)
        log.append(("end", e.fields["n"], bus.now))
        active.pop()

    sub.subscribe("/t", handler)
    bus._push(0, "~test", 0, lambda: pub.publish("/t", {"n": 1}), ())
    bus._push(3, "~test", 1, lambda: pub.publish("/t", {"n": 2}), ())
    bus.run()
    assert log == [("start", 1, 0), ("end", 1, 10), ("start", 2, 10), ("end", 2, 20)]


def test_stamps_strictly_increase_within_a_callback():
    bus = Bus()
    node = bus.node("n")
    node.advertise("/a")
    node.advertise("/b")
    e1, e2 = node.publish("/a", {}), node.publish("/b", {})
    assert e1.pub_time < e2.pub_time


schedules = st.lists(
    st.tuples(st.integers(0, 1000), st.sampled_from(["/a", "/b", "/c"])), min_size=1, max_size=40
)


def _run_schedule(seed, schedule, jitter):
    bus = Bus(BusConfig(seed=seed, default_latency=5, default_jitter=jitter))
    pub = bus.node("pub")
    subs = [bus.node(f"s{i}") for i in range(2)]
    for topic in ("/a", "/b", "/c"):
        pub.advertise(topic)
        for s in subs:
            s.subscribe(topic, lambda e: None)
    for i, (t, topic) in enumerate(sorted(schedule, key=lambda x: x[0])):
        bus._push(t, "~test", i, lambda topic=topic: pub.publish(topic, {}), ())
    bus.run()
    return bus


@settings(max_examples=200)
@given(st.integers(0, 2**32), schedules, st.integers(0, 500))
def test_delivery_order_matches_publication_order_per_pair(seed, schedule, jitter):
    bus = _run_schedule(seed, schedule, jitter)
    per_pair = {}
    for d in bus.deliveries:
        per_pair.setdefault((d.event.channel.name, d.subscriber), []).append(d)
    for deliveries in per_pair.values():
        assert [d.event.seq for d in deliveries] == sorted(d.event.seq for d in deliveries)
        assert all(a.delivered_at <= b.delivered_at for a, b in zip(deliveries, deliveries[1:]))
        assert all(d.delivered_at >= d.event.pub_time for d in deliveries)


@settings(max_examples=50)
@given(st.integers(0, 2**32), schedules, st.integers(0, 500))
def test_same_seed_same_schedule(seed, schedule, jitter):
    first = list(_run_schedule(seed, schedule, jitter).dump_deliveries())
    second = list(_run_schedule(seed, schedule, jitter).dump_deliveries())
    assert first == second
