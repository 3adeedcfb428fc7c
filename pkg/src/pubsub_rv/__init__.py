"""Runtime verification of publish/subscribe and service traffic.

A simulated message bus, a monitor that reorders intercepted events by
publication time before checking them, and a past-time MTL oracle.
"""

from .bus import Bus, BusConfig, create_bus
from .config import MonitorConfig, parse_config, validate_ordering_safety
from .events import ChannelId, ChannelKind, Event, Verdict, deserialize_event, serialize_event
from .monitor import Monitor, ReorderBuffer, WaitRecord

__all__ = [
    "Bus",
    "BusConfig",
    "ChannelId",
    "ChannelKind",
    "Event",
    "Monitor",
    "MonitorConfig",
    "ReorderBuffer",
    "Verdict",
    "WaitRecord",
    "create_bus",
    "deserialize_event",
    "parse_config",
    "serialize_event",
    "validate_ordering_safety",
]
