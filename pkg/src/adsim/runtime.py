"""Component framework: intra-process pub/sub bus and configuration manager.

Components declare their subscriptions and an optional periodic function up
front. The bus supports two clock modes:

* simulation mode (default): time advances only through ``Stack.advance()``,
  which fires due periodic functions and drains message queues
  deterministically on the caller's thread.
* wall-clock mode: each component gets a worker thread that services its
  message queue and periodic function. A component's callbacks are never
  invoked concurrently with each other.

Per-subscriber queues are bounded and drop the oldest message on overflow;
drops are counted per component. Payloads are treated as immutable after
publish.
"""

from __future__ import annotations

import logging
import threading
import time as _time
from dataclasses import dataclass, field
from typing import Any, Callable

import yaml

log = logging.getLogger(__name__)


class RuntimeError_(Exception):
    """Raised for component registration and configuration errors."""


class ConfigError(RuntimeError_):
    pass


@dataclass(frozen=True)
class ComponentDescriptor:
    name: str
    enabled: bool = True
    period: float | None = None
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.period is not None and self.period <= 0.0:
            raise RuntimeError_(f"component {self.name!r}: period must be > 0")


@dataclass(frozen=True)
class Message:
    topic: str
    timestamp: float
    payload: Any


class SimClock:
    """Clock advanced explicitly by the simulation driver."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> None:
        self._now += dt


class WallClock:
    def __init__(self):
        self._t0 = _time.monotonic()

    def now(self) -> float:
        return _time.monotonic() - self._t0


class ComponentHandle:
    def __init__(self, stack: "Stack", descriptor: ComponentDescriptor,
                 subscriptions: dict[str, Callable[[Message], None]],
                 periodic: Callable[[float], None] | None):
        self.descriptor = descriptor
        self.subscriptions = subscriptions
        self.periodic = periodic
        self.dropped_messages = 0
        self._stack = stack
        self._queue: list[Message] = []
        self._next_fire = descriptor.period
        self._lock = threading.Lock()
        self._last_pub_stamp: dict[str, float] = {}

    @property
    def name(self) -> str:
        return self.descriptor.name

    def publish(self, topic: str, payload: Any) -> None:
        self._stack.publish(self, topic, payload)


class Stack:
    """Holds registered components, routes messages, drives periodic work."""

    def __init__(self, clock=None, queue_size: int = 64):
        self.clock = clock if clock is not None else SimClock()
        self.queue_size = queue_size
        self._components: dict[str, ComponentHandle] = {}
        self._subscribers: dict[str, list[ComponentHandle]] = {}
        self._running = True
        self._dispatching = False
        self._threads: list[threading.Thread] = []
        self._wall = isinstance(self.clock, WallClock)
        self._stop_event = threading.Event()

    def register_component(
        self,
        descriptor: ComponentDescriptor,
        subscriptions: dict[str, Callable[[Message], None]] | None = None,
        periodic: Callable[[float], None] | None = None,
    ) -> ComponentHandle:
        if descriptor.name in self._components:
            raise RuntimeError_(f"duplicate component name: {descriptor.name!r}")
        if descriptor.period is not None and descriptor.period <= 0.0:
            raise RuntimeError_(f"component {descriptor.name!r}: period must be > 0")
        handle = ComponentHandle(self, descriptor, subscriptions or {}, periodic)
        self._components[descriptor.name] = handle
        for topic in handle.subscriptions:
            self._subscribers.setdefault(topic, []).append(handle)
        if self._wall:
            t = threading.Thread(target=self._worker, args=(handle,), daemon=True)
            handle._thread = t
            t.start()
            self._threads.append(t)
        return handle

    def publish(self, handle: ComponentHandle, topic: str, payload: Any) -> None:
        if not self._running:
            log.warning("publish on %r after shutdown ignored", topic)
            return
        stamp = self.clock.now()
        prev = handle._last_pub_stamp.get(topic)
        if prev is not None and stamp < prev:
            stamp = prev
        handle._last_pub_stamp[topic] = stamp
        msg = Message(topic=topic, timestamp=stamp, payload=payload)
        for sub in self._subscribers.get(topic, ()):
            with sub._lock:
                if len(sub._queue) >= self.queue_size:
                    sub._queue.pop(0)
                    sub.dropped_messages += 1
                sub._queue.append(msg)
        if not self._wall:
            self._drain()

    def _drain(self) -> None:
        # Re-entrant publishes land in queues and are picked up by the
        # same drain loop; only the outermost call dispatches.
        if self._dispatching:
            return
        self._dispatching = True
        try:
            progressed = True
            while progressed:
                progressed = False
                for handle in self._components.values():
                    while handle._queue:
                        msg = handle._queue.pop(0)
                        cb = handle.subscriptions.get(msg.topic)
                        if cb is not None:
                            cb(msg)
                        progressed = True
        finally:
            self._dispatching = False

    def advance(self, dt: float) -> None:
        """Simulation mode: advance time, firing periodic functions in order."""
        if self._wall:
            raise RuntimeError_("advance() is only valid with a SimClock")
        self.clock.advance(dt)
        now = self.clock.now()
        for handle in self._components.values():
            if handle.periodic is None or not handle.descriptor.enabled:
                continue
            while handle._next_fire is not None and handle._next_fire <= now + 1e-12:
                handle.periodic(now)
                handle._next_fire += handle.descriptor.period
        self._drain()

    def _worker(self, handle: ComponentHandle) -> None:
        next_fire = (
            _time.monotonic() + handle.descriptor.period
            if handle.descriptor.period
            else None
        )
        while not self._stop_event.is_set():
            msg = None
            with handle._lock:
                if handle._queue:
                    msg = handle._queue.pop(0)
            if msg is not None:
                cb = handle.subscriptions.get(msg.topic)
                if cb is not None:
                    cb(msg)
                continue
            if next_fire is not None and _time.monotonic() >= next_fire:
                if handle.periodic is not None and handle.descriptor.enabled:
                    handle.periodic(self.clock.now())
                next_fire += handle.descriptor.period
                continue
            _time.sleep(0.0005)
        # deliver remaining messages before shutdown completes
        while True:
            with handle._lock:
                if not handle._queue:
                    break
                msg = handle._queue.pop(0)
            cb = handle.subscriptions.get(msg.topic)
            if cb is not None:
                cb(msg)

    def shutdown(self) -> None:
        if not self._running:
            return
        if not self._wall:
            self._drain()
        self._running = False
        self._stop_event.set()
        for t in self._threads:
            t.join(timeout=2.0)


def load_config(source: str, known_names: set[str] | None = None) -> dict[str, ComponentDescriptor]:
    """Parse a YAML configuration document into component descriptors.

    Disabled components are omitted from the result. ``known_names``, when
    given, triggers a warning (not an error) for unknown component names.
    """
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"malformed configuration{where}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a mapping")
    sections = doc.get("components", doc)
    if sections is None:
        return {}
    if not isinstance(sections, dict):
        raise ConfigError("'components' must be a mapping of name -> settings")
    out: dict[str, ComponentDescriptor] = {}
    for name, cfg in sections.items():
        cfg = cfg or {}
        if not isinstance(cfg, dict):
            raise ConfigError(f"component {name!r}: settings must be a mapping")
        if known_names is not None and name not in known_names:
            log.warning("unknown component %r in configuration", name)
        if not cfg.get("enabled", True):
            continue
        params = cfg.get("params", cfg.get("parameters", {})) or {}
        for key, value in params.items():
            if not isinstance(value, (str, int, float, bool, list)):
                raise ConfigError(
                    f"component {name!r}: parameter {key!r} has unsupported type "
                    f"{type(value).__name__}"
                )
        out[name] = ComponentDescriptor(
            name=name,
            enabled=True,
            period=cfg.get("period"),
            parameters=dict(params),
        )
    return out
