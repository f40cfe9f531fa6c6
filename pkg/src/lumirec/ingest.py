"""Hub event-log parsing and minute-resolution room state reconstruction.

The log records *orders* (on / off / scene), one JSON object per line; room
state is derived: a light is on from an On or SceneSet order until its Off
order, capped after a configurable stale period, and a room is on at any
minute that at least one of its lights overlaps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum, IntEnum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyWindow, MalformedRecord, UnknownRoom
from .util import MINUTES_PER_DAY

DEFAULT_STALE_ON_CAP_HOURS = 24.0
NO_SCENE = -1


class Room(str, Enum):
    ROOM1 = "room1"
    ROOM2 = "room2"


class Action(IntEnum):
    # Numeric order doubles as the canonical tie-break at equal timestamps:
    # an Off closes the previous session before a same-second On reopens it.
    OFF = 0
    ON = 1
    SCENE_SET = 2


class Source(str, Enum):
    APP = "app"
    BUTTON = "button"
    SWITCH = "switch"
    OTHER = "other"


@dataclass(frozen=True)
class LightEvent:
    """One parsed log record: a timestamped order targeting a light."""

    timestamp: datetime
    hub_id: str
    light_id: str
    room: Room
    action: Action
    scene_id: int | None = None
    source: Source = Source.OTHER
    city: str = ""
    country: str = ""
    brightness: float | None = None
    saturation: float | None = None
    color_x: float | None = None
    color_y: float | None = None
    color_temp: float | None = None
    color_mode: str | None = None


@dataclass
class StateSeries:
    """Per (household, room) day-by-minute on/off and active-scene grids."""

    household: str
    room: Room
    days: list[date]
    grid: np.ndarray        # (D, 1440) bool
    scene_grid: np.ndarray  # (D, 1440) int8, NO_SCENE where no scene active


@dataclass
class IngestReport:
    total: int = 0
    parsed: int = 0
    skipped: dict[str, int] = field(default_factory=lambda: {"malformed": 0, "unknown_room": 0})
    households: int = 0
    rooms: int = 0
    date_span: tuple[str, str] | None = None

    @property
    def skipped_total(self) -> int:
        return sum(self.skipped.values())


_ACTIONS = {"on": Action.ON, "off": Action.OFF, "scene": Action.SCENE_SET}
_ROOMS = {"room1": Room.ROOM1, "room2": Room.ROOM2}
_SOURCES = {"app": Source.APP, "button": Source.BUTTON, "switch": Source.SWITCH}
_OPTIONAL_NUMERIC = {
    "bri": "brightness",
    "sat": "saturation",
    "x": "color_x",
    "y": "color_y",
    "ct": "color_temp",
}


def _parse_timestamp(raw) -> datetime:
    if not isinstance(raw, str):
        raise MalformedRecord(f"timestamp must be a string, got {raw!r}")
    text = raw[:-1] + "+00:00" if raw.endswith(("Z", "z")) else raw
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise MalformedRecord(f"unparsable timestamp {raw!r}") from exc
    if ts.tzinfo is None:
        raise MalformedRecord(f"timestamp {raw!r} lacks a UTC offset")
    return ts.astimezone(timezone.utc)


def parse_event_record(line: str) -> LightEvent:
    """Parse one NDJSON log line into a LightEvent.

    Raises MalformedRecord for bad JSON, missing mandatory fields, or an
    unparsable timestamp, and UnknownRoom when the group id maps to neither
    room type. Unknown keys are ignored.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")

    for key in ("ts", "hub", "light", "room", "action"):
        if key not in obj:
            raise MalformedRecord(f"missing mandatory key {key!r}")

    ts = _parse_timestamp(obj["ts"])
    action_raw = str(obj["action"]).lower()
    if action_raw not in _ACTIONS:
        raise MalformedRecord(f"unknown action {obj['action']!r}")
    action = _ACTIONS[action_raw]

    room_raw = str(obj["room"]).lower()
    if room_raw not in _ROOMS:
        raise UnknownRoom(f"unknown room group {obj['room']!r}")

    scene_id = None
    if action is Action.SCENE_SET:
        if "scene" not in obj:
            raise MalformedRecord("action 'scene' without a scene id")
        try:
            scene_id = int(obj["scene"])
        except (TypeError, ValueError) as exc:
            raise MalformedRecord(f"bad scene id {obj.get('scene')!r}") from exc
        if scene_id < 0:
            raise MalformedRecord(f"negative scene id {scene_id}")
    elif "scene" in obj:
        raise MalformedRecord("scene id present on a non-scene action")

    numerics: dict[str, float | None] = {}
    for key, attr in _OPTIONAL_NUMERIC.items():
        value = obj.get(key)
        if value is not None:
            try:
                numerics[attr] = float(value)
            except (TypeError, ValueError) as exc:
                raise MalformedRecord(f"non-numeric {key!r}: {value!r}") from exc

    return LightEvent(
        timestamp=ts,
        hub_id=str(obj["hub"]),
        light_id=str(obj["light"]),
        room=_ROOMS[room_raw],
        action=action,
        scene_id=scene_id,
        source=_SOURCES.get(str(obj.get("source", "")).lower(), Source.OTHER),
        city=str(obj.get("city", "")),
        country=str(obj.get("country", "")),
        color_mode=str(obj["colormode"]) if obj.get("colormode") is not None else None,
        **numerics,
    )


def iter_event_log(lines: Iterable[str], report: IngestReport | None = None) -> Iterator[LightEvent]:
    """Yield parsed events, counting skips into ``report`` if given."""
    span_lo: datetime | None = None
    span_hi: datetime | None = None
    entities: set[tuple[str, Room]] = set()
    households: set[str] = set()
    for line in lines:
        if not line.strip():
            continue
        if report is not None:
            report.total += 1
        try:
            event = parse_event_record(line)
        except UnknownRoom:
            if report is None:
                raise
            report.skipped["unknown_room"] += 1
            continue
        except MalformedRecord:
            if report is None:
                raise
            report.skipped["malformed"] += 1
            continue
        if report is not None:
            report.parsed += 1
            households.add(event.hub_id)
            entities.add((event.hub_id, event.room))
            report.households = len(households)
            report.rooms = len(entities)
            span_lo = event.timestamp if span_lo is None else min(span_lo, event.timestamp)
            span_hi = event.timestamp if span_hi is None else max(span_hi, event.timestamp)
            report.date_span = (span_lo.isoformat(), span_hi.isoformat())
        yield event


def read_event_log(lines: Iterable[str]) -> tuple[list[LightEvent], IngestReport]:
    """Parse a whole log, returning events and the counting report."""
    report = IngestReport()
    events = list(iter_event_log(lines, report))
    return events, report


def validate_log(lines: Iterable[str]) -> IngestReport:
    """Counting-only pass over a log: totals, skip classes, entities, span."""
    report = IngestReport()
    for _ in iter_event_log(lines, report):
        pass
    return report


# --- state reconstruction -------------------------------------------------

# Compact per-entity order tuple: (epoch_seconds, light_id, action, scene, seq)
Order = tuple[float, str, int, int, int]


def compact_order(event: LightEvent, seq: int) -> Order:
    scene = event.scene_id if event.scene_id is not None else NO_SCENE
    return (event.timestamp.timestamp(), event.light_id, int(event.action), scene, seq)


def _window_days(window: tuple[date, date]) -> list[date]:
    start, end = window
    if end < start:
        raise EmptyWindow(f"window end {end} precedes start {start}")
    return [start + timedelta(days=i) for i in range((end - start).days + 1)]


@dataclass
class _LightState:
    on: bool = False
    seg_start: float = 0.0
    last_order: float = 0.0
    scene: int = NO_SCENE
    scene_time: float = 0.0
    scene_seq: int = -1


def reconstruct_entity(
    household: str,
    room: Room,
    orders: Sequence[Order],
    window: tuple[date, date],
    stale_on_cap_hours: float = DEFAULT_STALE_ON_CAP_HOURS,
) -> StateSeries:
    """Rasterize one entity's orders onto day x minute grids.

    ``orders`` must be sorted by (time, seq). A minute counts as on when the
    on-interval overlaps it at all; the active scene per minute is the one
    from the most recent SceneSet among overlapping lit intervals.
    """
    days = _window_days(window)
    n_days = len(days)
    w0 = datetime.combine(days[0], datetime.min.time(), tzinfo=timezone.utc).timestamp()
    w1 = w0 + n_days * 86400.0
    cap_s = stale_on_cap_hours * 3600.0

    total_minutes = n_days * MINUTES_PER_DAY
    flat_on = np.zeros(total_minutes, dtype=bool)
    flat_scene = np.full(total_minutes, NO_SCENE, dtype=np.int8)
    # Priority of the scene currently written at each minute: set-time then
    # event sequence, so the latest order wins conflicts deterministically.
    prio_time = np.full(total_minutes, -np.inf)
    prio_seq = np.full(total_minutes, -1, dtype=np.int64)

    def emit(start: float, end: float, scene: int, stime: float, sseq: int) -> None:
        start = max(start, w0)
        end = min(end, w1)
        if end <= start:
            return
        a = int(math.floor((start - w0) / 60.0))
        b = int(math.ceil((end - w0) / 60.0))
        flat_on[a:b] = True
        if scene != NO_SCENE:
            span_t = prio_time[a:b]
            span_q = prio_seq[a:b]
            win = (span_t < stime) | ((span_t == stime) & (span_q < sseq))
            span_t[win] = stime
            span_q[win] = sseq
            flat_scene[a:b][win] = scene

    lights: dict[str, _LightState] = {}
    for t, light_id, action, scene, seq in orders:
        st = lights.setdefault(light_id, _LightState())
        if st.on and t > st.last_order + cap_s:
            # No order touched this light within the stale cap: force-close.
            emit(st.seg_start, st.last_order + cap_s, st.scene, st.scene_time, st.scene_seq)
            st.on = False
        if action == Action.OFF:
            if st.on:
                emit(st.seg_start, t, st.scene, st.scene_time, st.scene_seq)
                st.on = False
            # Off with no preceding On is a defined no-op.
        elif action == Action.ON:
            if st.on:
                st.last_order = t
            else:
                st.on = True
                st.seg_start = t
                st.last_order = t
                st.scene = NO_SCENE
        else:  # SCENE_SET implies On when the light is off
            if st.on:
                emit(st.seg_start, t, st.scene, st.scene_time, st.scene_seq)
                st.seg_start = t
            else:
                st.on = True
                st.seg_start = t
            st.scene = scene
            st.scene_time = t
            st.scene_seq = seq
            st.last_order = t
    for st in lights.values():
        if st.on:
            emit(st.seg_start, min(st.last_order + cap_s, w1), st.scene, st.scene_time, st.scene_seq)

    return StateSeries(
        household=household,
        room=room,
        days=days,
        grid=flat_on.reshape(n_days, MINUTES_PER_DAY),
        scene_grid=flat_scene.reshape(n_days, MINUTES_PER_DAY),
    )


def _canonical_sort_key(event: LightEvent):
    scene = event.scene_id if event.scene_id is not None else NO_SCENE
    return (event.timestamp, event.hub_id, event.room.value, event.light_id, int(event.action), scene)


def group_orders(events: Iterable[LightEvent]) -> dict[tuple[str, Room], list[Order]]:
    """Sort events canonically and split them into per-entity order lists."""
    ordered = sorted(events, key=_canonical_sort_key)
    grouped: dict[tuple[str, Room], list[Order]] = {}
    for seq, event in enumerate(ordered):
        grouped.setdefault((event.hub_id, event.room), []).append(compact_order(event, seq))
    return grouped


def reconstruct_state(
    events: Iterable[LightEvent],
    window: tuple[date, date],
    stale_on_cap_hours: float = DEFAULT_STALE_ON_CAP_HOURS,
) -> dict[tuple[str, Room], StateSeries]:
    """Reconstruct StateSeries for every (household, room) present in ``events``.

    Events are sorted internally, so the result is independent of input order.
    """
    _window_days(window)  # validate before any work
    return {
        key: reconstruct_entity(key[0], key[1], orders, window, stale_on_cap_hours)
        for key, orders in sorted(group_orders(events).items())
    }
