"""Seeded synthetic household event-log generator with planted ground truth.

Households belong to behavioral personas, each with daily active windows per
room (fired with a per-day probability, start/end jittered), a scene table
keyed by room and period of day, and a Poisson background of short scene-less
noise sessions. Every draw derives from the master seed per (household, day),
so output is byte-identical across runs and generation order.

The default population plants three personas across four countries and makes
two personas share a city: rows from the shared city are ambiguous for a
pooled classifier but separate cleanly once usage clustering recovers the
personas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .features import Period, period_of_hour
from .ingest import Room
from .util import rng_for

DEFAULT_JITTER_MINUTES = 10
DEFAULT_NOISE_RATE = 0.5
DEFAULT_FLIP_PROBABILITY = 0.1
GROUND_TRUTH_VERSION = 1


@dataclass(frozen=True)
class WindowSpec:
    start: int   # minute of day, inclusive
    end: int     # minute of day, exclusive
    daily_probability: float


@dataclass
class PersonaSpec:
    id: str
    country: str
    city: str
    rooms: dict[Room, list[WindowSpec]]
    scene_table: dict[tuple[Room, Period], int]
    households: int
    noise_rate: float = DEFAULT_NOISE_RATE
    flip_probability: float = DEFAULT_FLIP_PROBABILITY

    def to_jsonable(self) -> dict:
        return {
            "id": self.id,
            "country": self.country,
            "city": self.city,
            "households": self.households,
            "noise_rate": self.noise_rate,
            "flip_probability": self.flip_probability,
            "rooms": {
                room.value: [[w.start, w.end, w.daily_probability] for w in windows]
                for room, windows in self.rooms.items()
            },
            "scene_table": {
                f"{room.value}:{period.name.lower()}": scene
                for (room, period), scene in self.scene_table.items()
            },
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "PersonaSpec":
        rooms = {
            Room(room): [WindowSpec(int(s), int(e), float(p)) for s, e, p in windows]
            for room, windows in obj["rooms"].items()
        }
        scene_table = {}
        for key, scene in obj["scene_table"].items():
            room, period = key.split(":")
            scene_table[(Room(room), Period[period.upper()])] = int(scene)
        return cls(
            id=obj["id"], country=obj["country"], city=obj["city"],
            rooms=rooms, scene_table=scene_table, households=int(obj["households"]),
            noise_rate=float(obj.get("noise_rate", DEFAULT_NOISE_RATE)),
            flip_probability=float(obj.get("flip_probability", DEFAULT_FLIP_PROBABILITY)),
        )


def validate_specs(specs: list[PersonaSpec], scene_count: int) -> None:
    if not specs:
        raise InvalidSpec("no personas given")
    for spec in specs:
        if spec.households < 0:
            raise InvalidSpec(f"{spec.id}: negative household count")
        if not spec.rooms:
            raise InvalidSpec(f"{spec.id}: no rooms")
        if not 0.0 <= spec.flip_probability <= 1.0:
            raise InvalidSpec(f"{spec.id}: flip probability outside [0, 1]")
        if spec.noise_rate < 0:
            raise InvalidSpec(f"{spec.id}: negative noise rate")
        for room, windows in spec.rooms.items():
            for w in windows:
                if not (0 <= w.start < w.end <= 1440):
                    raise InvalidSpec(f"{spec.id}/{room.value}: bad window {w}")
                if not 0.0 <= w.daily_probability <= 1.0:
                    raise InvalidSpec(f"{spec.id}/{room.value}: bad probability {w}")
        for (room, period), scene in spec.scene_table.items():
            if not 0 <= scene < scene_count:
                raise InvalidSpec(f"{spec.id}: scene {scene} outside 0..{scene_count - 1}")


@dataclass
class SynthResult:
    events_path: Path
    ground_truth_path: Path
    n_events: int
    n_households: int


def _format_line(day_iso: str, second: int, hub: str, light: str, room: Room,
                 action: str, city: str, country: str, scene: int | None,
                 bri: int | None) -> str:
    obj = {
        "ts": f"{day_iso}T{second // 3600:02d}:{second % 3600 // 60:02d}:{second % 60:02d}Z",
        "hub": hub,
        "light": light,
        "room": room.value,
        "action": action,
    }
    if scene is not None:
        obj["scene"] = scene
    if bri is not None:
        obj["bri"] = bri
    obj["source"] = "app"
    obj["city"] = city
    obj["country"] = country
    return json.dumps(obj, separators=(",", ":"))


def generate(specs: list[PersonaSpec], window: tuple[date, date], seed: int,
             out_dir: Path, scene_count: int = 9,
             jitter_minutes: int = DEFAULT_JITTER_MINUTES) -> SynthResult:
    """Write events.ndjson and ground_truth.json for the given population.

    Events are emitted day by day, each day's lines sorted by timestamp and
    identity, so the output stream is globally ordered and reproducible.
    """
    validate_specs(specs, scene_count)
    start, end = window
    if end < start:
        raise InvalidSpec(f"window end {end} precedes start {start}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    households = []  # (hub_id, spec)
    idx = 0
    for spec in specs:
        for _ in range(spec.households):
            households.append((f"hub{idx:04d}", spec))
            idx += 1

    truth = {
        "format_version": GROUND_TRUTH_VERSION,
        "seed": seed,
        "scene_count": scene_count,
        "jitter_minutes": jitter_minutes,
        "window": [start.isoformat(), end.isoformat()],
        "personas": [spec.to_jsonable() for spec in specs],
        "households": {
            hub: {
                "persona": spec.id,
                "country": spec.country,
                "city": spec.city,
                "rooms": {
                    room.value: {
                        "windows": [[w.start, w.end, w.daily_probability]
                                    for w in spec.rooms[room]],
                        "scenes": {period.name.lower(): scene
                                   for (r, period), scene in spec.scene_table.items()
                                   if r == room},
                    }
                    for room in spec.rooms
                },
            }
            for hub, spec in households
        },
    }

    n_events = 0
    events_path = out_dir / "events.ndjson"
    day_count = (end - start).days + 1
    max_second = 1440 * 60 - 1
    with events_path.open("w") as fh:
        for day_index in range(day_count):
            day = start + timedelta(days=day_index)
            day_iso = day.isoformat()
            buffer: list[tuple] = []
            for hub, spec in households:
                rng = rng_for(seed, "day", hub, day_iso)
                for room in sorted(spec.rooms, key=lambda r: r.value):
                    for w_idx, w in enumerate(spec.rooms[room]):
                        fires = rng.uniform() < w.daily_probability
                        js, je = rng.integers(-jitter_minutes, jitter_minutes + 1, size=2)
                        secs = rng.integers(0, 60, size=2)
                        scene = spec.scene_table.get((room, period_of_hour(w.start // 60)), 0)
                        flip = rng.uniform() < spec.flip_probability
                        if flip:
                            scene = int((scene + 1 + rng.integers(0, scene_count - 1))
                                        % scene_count)
                        bri = int(rng.integers(60, 255))
                        if not fires:
                            continue
                        if jitter_minutes == 0:
                            secs = (0, 0)  # sharp minute-aligned sessions
                        s_sec = min(max(0, (w.start + int(js)) * 60 + int(secs[0])), max_second)
                        e_sec = min(max(0, (w.end + int(je)) * 60 + int(secs[1])), max_second)
                        if e_sec <= s_sec:
                            continue
                        light = f"{room.value}-w{w_idx}"
                        buffer.append((s_sec, hub, light, room, "scene", scene, bri, spec))
                        buffer.append((e_sec, hub, light, room, "off", None, None, spec))
                    for _ in range(rng.poisson(spec.noise_rate)):
                        dur = int(rng.integers(3, 26))
                        ns = int(rng.integers(0, 1440 - dur))
                        n_sec = ns * 60 + int(rng.integers(0, 60))
                        light = f"{room.value}-x"
                        buffer.append((n_sec, hub, light, room, "on", None, None, spec))
                        buffer.append((min(n_sec + dur * 60, max_second), hub, light,
                                       room, "off", None, None, spec))
            buffer.sort(key=lambda ev: (ev[0], ev[1], ev[3].value, ev[2], ev[4]))
            for sec, hub, light, room, action, scene, bri, spec in buffer:
                fh.write(_format_line(day_iso, sec, hub, light, room, action,
                                      spec.city, spec.country, scene, bri))
                fh.write("\n")
            n_events += len(buffer)

    truth_path = out_dir / "ground_truth.json"
    truth_path.write_text(json.dumps(truth, indent=1, sort_keys=True))
    return SynthResult(events_path, truth_path, n_events, len(households))


# --- default population -------------------------------------------------------

def _persona_archetypes() -> dict[str, dict]:
    """Three daily rhythms sharing an evening block with distinct scenes."""
    r1, r2 = Room.ROOM1, Room.ROOM2
    night, morning, afternoon, evening = Period
    return {
        "earlybird": {
            "rooms": {
                r1: [WindowSpec(390, 480, 0.85), WindowSpec(1140, 1320, 0.9)],
                r2: [WindowSpec(395, 480, 0.8), WindowSpec(1150, 1320, 0.85)],
            },
            "scene_table": {
                (r1, night): 8, (r1, morning): 1, (r1, afternoon): 2, (r1, evening): 3,
                (r2, night): 8, (r2, morning): 1, (r2, afternoon): 2, (r2, evening): 4,
            },
        },
        "homebody": {
            "rooms": {
                r1: [WindowSpec(780, 900, 0.85), WindowSpec(1140, 1320, 0.9)],
                r2: [WindowSpec(790, 900, 0.8), WindowSpec(1150, 1320, 0.85)],
            },
            "scene_table": {
                (r1, night): 0, (r1, morning): 5, (r1, afternoon): 6, (r1, evening): 5,
                (r2, night): 0, (r2, morning): 6, (r2, afternoon): 6, (r2, evening): 7,
            },
        },
        "nightowl": {
            "rooms": {
                r1: [WindowSpec(30, 120, 0.85), WindowSpec(1140, 1320, 0.9)],
                r2: [WindowSpec(40, 120, 0.8), WindowSpec(1150, 1320, 0.85)],
            },
            "scene_table": {
                (r1, night): 0, (r1, morning): 2, (r1, afternoon): 4, (r1, evening): 1,
                (r2, night): 8, (r2, morning): 3, (r2, afternoon): 5, (r2, evening): 2,
            },
        },
    }


# Geography: earlybird and homebody overlap in the US so city alone cannot
# tell their shared evening hours apart; four countries total.
_GEOGRAPHY = {
    "earlybird": [("US", "ames")],
    "homebody": [("US", "ames"), ("DE", "berlin")],
    "nightowl": [("IN", "pune"), ("BR", "recife")],
}


def default_population(seed: int, households: int = 600,
                       noise_rate: float = DEFAULT_NOISE_RATE,
                       flip_probability: float = DEFAULT_FLIP_PROBABILITY) -> list[PersonaSpec]:
    """Three-persona, four-country population with multinomially drawn sizes."""
    archetypes = _persona_archetypes()
    names = list(archetypes)
    rng = rng_for(seed, "population")
    # Guaranteed floor of 90% of an equal share per persona; only the
    # remainder is drawn multinomially, so sizes stay within +-10% of equal
    # thirds while still varying by seed.
    base = int(0.9 * households / len(names))
    remainder = households - base * len(names)
    persona_counts = base + rng.multinomial(remainder, [1 / len(names)] * len(names))
    specs: list[PersonaSpec] = []
    for name, count in zip(names, persona_counts):
        variants = _GEOGRAPHY[name]
        if len(variants) == 1:
            splits = [int(count)]
        else:
            first = int(rng.binomial(count, 0.5))
            splits = [first, int(count) - first]
        for (country, city), size in zip(variants, splits):
            specs.append(PersonaSpec(
                id=name,
                country=country,
                city=city,
                rooms=archetypes[name]["rooms"],
                scene_table=archetypes[name]["scene_table"],
                households=size,
                noise_rate=noise_rate,
                flip_probability=flip_probability,
            ))
    return specs


def load_ground_truth(path: Path) -> dict:
    truth = json.loads(Path(path).read_text())
    if truth.get("format_version") != GROUND_TRUTH_VERSION:
        raise InvalidSpec(f"unsupported ground truth version {truth.get('format_version')!r}")
    return truth
