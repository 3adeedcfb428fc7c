"""Declarative monitor configuration and the ordering-deadlock check."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import yaml


class Mode(enum.Enum):
    ONLINE = "online"
    OFFLINE = "offline"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class TopicSpec:
    name: str
    ordered: bool = False
    filtered: bool = False


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    mediated_name: str
    ordered: bool = False


@dataclass(frozen=True)
class Dependency:
    dependent: str
    depends_on: str


@dataclass(frozen=True)
class MonitorConfig:
    monitor_id: str
    topics: tuple[TopicSpec, ...] = ()
    services: tuple[ServiceSpec, ...] = ()
    mode: Mode = Mode.ONLINE
    filtering: bool = False
    log_path: str | None = None
    dependencies: tuple[Dependency, ...] = ()

    def topic(self, name: str) -> TopicSpec | None:
        return next((t for t in self.topics if t.name == name), None)

    def service(self, name: str) -> ServiceSpec | None:
        return next((s for s in self.services if s.name == name), None)

    def is_ordered(self, name: str) -> bool:
        spec = self.topic(name) or self.service(name)
        return bool(spec and spec.ordered)

    @property
    def channel_names(self) -> list[str]:
        return [t.name for t in self.topics] + [s.name for s in self.services]

    def with_ordering(self, ordered: bool) -> "MonitorConfig":
        """Copy with every channel's ``ordered`` flag forced to ``ordered``."""
        return MonitorConfig(
            self.monitor_id,
            tuple(TopicSpec(t.name, ordered, t.filtered) for t in self.topics),
            tuple(ServiceSpec(s.name, s.mediated_name, ordered) for s in self.services),
            self.mode,
            self.filtering,
            self.log_path,
            self.dependencies,
        )


# -- parsing -------------------------------------------------------------------

_TOP_KEYS = {"monitor_id", "mode", "filtering", "log", "topics", "services", "dependencies"}


def _line(node: yaml.Node) -> int:
    return node.start_mark.line + 1


def _mapping(node: yaml.Node, allowed: set[str], what: str) -> dict[str, yaml.Node]:
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{what} must be a mapping", _line(node))
    out: dict[str, yaml.Node] = {}
    for key_node, value_node in node.value:
        key = key_node.value
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {what}", _line(key_node))
        if key in out:
            raise ConfigError(f"duplicate key {key!r} in {what}", _line(key_node))
        out[key] = value_node
    return out


def _scalar(node: yaml.Node, kind: type, key: str):
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError(f"{key!r} must be a {kind.__name__}", _line(node))
    value = yaml.constructor.SafeConstructor().construct_object(node)
    if kind is str and value is not None and not isinstance(value, str):
        value = str(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise ConfigError(f"{key!r} must be a {kind.__name__}, got {node.value!r}", _line(node))
    return value


def _sequence(node: yaml.Node, key: str) -> list[yaml.Node]:
    if isinstance(node, yaml.ScalarNode) and node.value in ("", "null", "~"):
        return []
    if not isinstance(node, yaml.SequenceNode):
        raise ConfigError(f"{key!r} must be a list", _line(node))
    return list(node.value)


def parse_config(text: str) -> MonitorConfig:
    try:
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"syntax error: {exc.problem}", mark.line + 1 if mark else None) from None
    if root is None:
        raise ConfigError("monitor_id required", 1)
    top = _mapping(root, _TOP_KEYS, "config")
    if "monitor_id" not in top:
        raise ConfigError("monitor_id required", _line(root))
    monitor_id = _scalar(top["monitor_id"], str, "monitor_id")
    if not monitor_id:
        raise ConfigError("monitor_id must be non-empty", _line(top["monitor_id"]))

    mode = Mode.ONLINE
    if "mode" in top:
        raw = _scalar(top["mode"], str, "mode")
        try:
            mode = Mode(raw)
        except ValueError:
            raise ConfigError(f"mode must be 'online' or 'offline', got {raw!r}", _line(top["mode"])) from None
    filtering = _scalar(top["filtering"], bool, "filtering") if "filtering" in top else False
    log_path = _scalar(top["log"], str, "log") if "log" in top else None

    topics = []
    for item in _sequence(top.get("topics", yaml.ScalarNode("", "")), "topics"):
        fields = _mapping(item, {"name", "ordered", "filtered"}, "topic")
        if "name" not in fields:
            raise ConfigError("topic needs a name", _line(item))
        topics.append(
            (
                TopicSpec(
                    _scalar(fields["name"], str, "name"),
                    _scalar(fields["ordered"], bool, "ordered") if "ordered" in fields else False,
                    _scalar(fields["filtered"], bool, "filtered") if "filtered" in fields else False,
                ),
                _line(item),
            )
        )

    services = []
    for item in _sequence(top.get("services", yaml.ScalarNode("", "")), "services"):
        fields = _mapping(item, {"name", "mediated_name", "ordered"}, "service")
        if "name" not in fields:
            raise ConfigError("service needs a name", _line(item))
        name = _scalar(fields["name"], str, "name")
        mediated = (
            _scalar(fields["mediated_name"], str, "mediated_name")
            if "mediated_name" in fields
            else name + "_mon"
        )
        ordered = _scalar(fields["ordered"], bool, "ordered") if "ordered" in fields else False
        services.append((ServiceSpec(name, mediated, ordered), _line(item)))

    deps = []
    for item in _sequence(top.get("dependencies", yaml.ScalarNode("", "")), "dependencies"):
        fields = _mapping(item, {"dependent", "depends_on"}, "dependency")
        for key in ("dependent", "depends_on"):
            if key not in fields:
                raise ConfigError(f"dependency needs {key!r}", _line(item))
        deps.append(
            (
                Dependency(
                    _scalar(fields["dependent"], str, "dependent"),
                    _scalar(fields["depends_on"], str, "depends_on"),
                ),
                _line(item),
            )
        )

    cfg = MonitorConfig(
        monitor_id,
        tuple(t for t, _ in topics),
        tuple(s for s, _ in services),
        mode,
        filtering,
        log_path,
        tuple(d for d, _ in deps),
    )
    _validate(cfg, {id(t): ln for t, ln in topics + services + deps})
    return cfg


def _validate(cfg: MonitorConfig, lines: dict[int, int]) -> None:
    seen: set[str] = set()
    for spec in list(cfg.topics) + list(cfg.services):
        line = lines.get(id(spec))
        if not spec.name:
            raise ConfigError("channel name must be non-empty", line)
        if spec.name in seen:
            raise ConfigError(f"duplicate channel name {spec.name!r}", line)
        seen.add(spec.name)
    for svc in cfg.services:
        if svc.mediated_name == svc.name:
            raise ConfigError(f"mediated_name of {svc.name!r} must differ from its name", lines.get(id(svc)))
        if svc.mediated_name in seen:
            raise ConfigError(f"mediated_name {svc.mediated_name!r} clashes with a channel", lines.get(id(svc)))
    for topic in cfg.topics:
        if topic.filtered and cfg.mode is Mode.OFFLINE:
            raise ConfigError(f"topic {topic.name!r} is filtered but offline monitors cannot filter", lines.get(id(topic)))
    if cfg.filtering and cfg.mode is Mode.OFFLINE:
        raise ConfigError("filtering requires mode 'online'")
    for dep in cfg.dependencies:
        for name in (dep.dependent, dep.depends_on):
            if name not in seen:
                raise ConfigError(f"dependency names unknown channel {name!r}", lines.get(id(dep)))


def render_config(cfg: MonitorConfig) -> str:
    doc: dict = {"monitor_id": cfg.monitor_id, "mode": cfg.mode.value, "filtering": cfg.filtering}
    if cfg.log_path is not None:
        doc["log"] = cfg.log_path
    doc["topics"] = [{"name": t.name, "ordered": t.ordered, "filtered": t.filtered} for t in cfg.topics]
    doc["services"] = [
        {"name": s.name, "mediated_name": s.mediated_name, "ordered": s.ordered} for s in cfg.services
    ]
    doc["dependencies"] = [{"dependent": d.dependent, "depends_on": d.depends_on} for d in cfg.dependencies]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False)


# -- deadlock hazards ----------------------------------------------------------


@dataclass(frozen=True)
class Hazard:
    channel: str
    blocked_by: str
    reason: str

    def __str__(self) -> str:
        return f"{self.channel} <-> {self.blocked_by}: {self.reason}"


def validate_ordering_safety(cfg: MonitorConfig) -> list[Hazard]:
    """Configurations whose ordered drain can block forever.

    A filtered, ordered topic ``t`` and an ordered channel ``x`` that depends
    on ``t`` wait on each other: ``t``'s message is held until ``x`` has one,
    and ``x`` cannot produce one until ``t``'s message is released. Ordered
    channels on a dependency cycle are reported pairwise.
    """
    hazards: list[Hazard] = []
    for dep in cfg.dependencies:
        topic = cfg.topic(dep.depends_on)
        if topic and topic.ordered and topic.filtered and cfg.is_ordered(dep.dependent):
            hazards.append(
                Hazard(
                    dep.dependent,
                    topic.name,
                    "depends on a filtered topic and both are ordered",
                )
            )

    graph: dict[str, set[str]] = {name: set() for name in cfg.channel_names}
    for dep in cfg.dependencies:
        graph[dep.dependent].add(dep.depends_on)
    for component in _cyclic_components(graph):
        ordered = sorted(name for name in component if cfg.is_ordered(name))
        for a, b in itertools.combinations(ordered, 2):
            hazards.append(Hazard(a, b, "ordered channels on a dependency cycle"))
    return hazards


def _cyclic_components(graph: dict[str, set[str]]) -> list[set[str]]:
    """Strongly connected components that contain a cycle (Tarjan)."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    out: list[set[str]] = []
    counter = itertools.count()

    def visit(v: str) -> None:
        index[v] = low[v] = next(counter)
        stack.append(v)
        on_stack.add(v)
        for w in sorted(graph[v]):
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = set()
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.add(w)
                if w == v:
                    break
            if len(comp) > 1 or v in graph[v]:
                out.append(comp)

    for v in sorted(graph):
        if v not in index:
            visit(v)
    return out
