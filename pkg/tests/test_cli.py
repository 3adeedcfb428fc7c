import csv
import io
import json
from pathlib import Path

import pytest

from pubsub_rv.cli import main, summarize
from pubsub_rv.events import ChannelId, Event, serialize_event

DATA = Path(__file__).resolve().parents[1] / "src" / "pubsub_rv" / "data"
CONFIG = str(DATA / "case_study.config")
PROPS = str(DATA / "case_study.properties")
HAZARD = str(DATA / "hazard_example.config")


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_validate(capsys):
    assert main(["validate", CONFIG]) == 0
    assert main(["validate", HAZARD]) == 1
    assert "hazard" in capsys.readouterr().err
    assert main(["validate", HAZARD, "--allow-hazards"]) == 0
    assert main(["validate", "/no/such/file"]) == 2


def test_bad_usage_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 2


def test_run_refuses_hazards(tmp_path):
    assert main(["run", HAZARD, PROPS, "--runs", "1", "--out", str(tmp_path)]) == 1


def test_run_without_monitor(tmp_path):
    assert main(["run", CONFIG, PROPS, "--runs", "2", "--monitor", "off", "--out", str(tmp_path)]) == 0
    rt = rows(tmp_path / "roundtrip.csv")
    assert [(r["run"], r["call_index"]) for r in rt] == [(str(k), str(c)) for k in range(2) for c in range(3)]
    assert rows(tmp_path / "verdicts.csv") == []
    assert json.loads((tmp_path / "meta.json").read_text())["monitor"] is False


def test_run_ordered_and_unordered(tmp_path):
    assert main(["run", CONFIG, PROPS, "--runs", "2", "--out", str(tmp_path / "on")]) == 0
    on = rows(tmp_path / "on" / "verdicts.csv")
    assert len(on) == 12 and all(r["negatives"] == "0" for r in on)
    assert main(["run", CONFIG, PROPS, "--runs", "2", "--ordering", "off", "--out", str(tmp_path / "off")]) == 1
    off = rows(tmp_path / "off" / "verdicts.csv")
    assert all(int(r["negatives"]) > 0 for r in off if r["property"] == "1a")
    waits = rows(tmp_path / "on" / "wait.csv")
    assert list(waits[0]) == ["run", "channel", "kind", "seq", "pub_time", "buffered_at", "released_at"]
    assert rows(tmp_path / "off" / "wait.csv") == []


def test_run_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["run", CONFIG, PROPS, "--runs", "2", "--seed", "5", "--out", str(tmp_path / name), "--dump-trace"]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_jitter_override_recorded(tmp_path):
    main(["run", CONFIG, PROPS, "--runs", "1", "--jitter-ns", "0", "--ordering", "off", "--out", str(tmp_path)])
    assert json.loads((tmp_path / "meta.json").read_text())["jitter_ns"] == 0


def test_check_replays_online_verdicts(tmp_path):
    main(["run", CONFIG, PROPS, "--runs", "1", "--out", str(tmp_path)])
    out = tmp_path / "replay.jsonl"
    assert main(["check", str(tmp_path / "run000.events.jsonl"), PROPS, "--out", str(out)]) == 0
    assert out.read_bytes() == (tmp_path / "run000.verdicts.jsonl").read_bytes()


def test_check_flags_response_before_request(tmp_path):
    log = tmp_path / "swapped.jsonl"
    lines = [
        Event(ChannelId.response("/SetLED"), 0, 0, {"service": "/SetLED", "request": False, "response": True, "res_id": 4}),
        Event(ChannelId.request("/SetLED"), 1, 0, {"service": "/SetLED", "request": True, "response": False, "req_id": 4, "req_status": "1"}),
    ]
    log.write_text("".join(serialize_event(e) + "\n" for e in lines))
    out = tmp_path / "v.jsonl"
    assert main(["check", str(log), PROPS, "--out", str(out)]) == 1
    verdicts = [json.loads(line) for line in out.read_text().splitlines()]
    assert {"property_id": "3a", "time": 0, "verdict": "currently_false"} in verdicts


def test_check_empty_log(tmp_path):
    log = tmp_path / "empty.jsonl"
    log.write_text("")
    out = tmp_path / "v.jsonl"
    assert main(["check", str(log), PROPS, "--out", str(out)]) == 0
    assert out.read_text() == ""


def test_check_malformed_log(tmp_path):
    log = tmp_path / "bad.jsonl"
    log.write_text('{"channel":\n')
    assert main(["check", str(log), PROPS]) == 2


def test_summarize_population_std():
    assert summarize([{"k": "a", "v": "5"}], ["k"], "v") == [{"k": "a", "n": 1, "mean": 5.0, "std": 0.0}]
    got = summarize([{"k": "a", "v": "2"}, {"k": "a", "v": "4"}], ["k"], "v")
    assert got == [{"k": "a", "n": 2, "mean": 3.0, "std": 1.0}]


def test_summarize_command(tmp_path, capsys):
    for mode, flags in (("on", []), ("nomon", ["--monitor", "off"])):
        main(["run", CONFIG, PROPS, "--runs", "3", "--out", str(tmp_path / mode), *flags])
    capsys.readouterr()
    assert main(["summarize", str(tmp_path / "on"), str(tmp_path / "nomon")]) == 0
    table = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    round_trips = [r for r in table if r["series"] == "roundtrip"]
    assert sorted((r["mode"], r["key"]) for r in round_trips) == sorted(
        (m, str(c)) for m in ("ordered", "no-monitor") for c in range(3)
    )
    assert all(r["n"] == "3" for r in round_trips)
