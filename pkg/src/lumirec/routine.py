"""Per-minute usage frequency profiles and knee-threshold routine extraction.

A room's frequency profile is the fraction of days it was lit at each minute
of the day. The routine recommender sorts those 1440 values, finds the knee
of the sorted curve, and reads every minute at or above the knee value as
part of the recommended schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProfile
from .ingest import Room, StateSeries
from .util import MINUTES_PER_DAY

DEFAULT_MERGE_GAP = 15
DEFAULT_MIN_LEN = 10

_COLLINEAR_TOL = 1e-12
# A point only counts as "above the chord" beyond this fraction of the
# convex lobe's depth; order-statistic noise on a sorted plateau otherwise
# pokes a hair above the chord and hijacks the cutoff.
_ABOVE_GATE_FRACTION = 0.01
_ABOVE_GATE_FLOOR = 1e-9


@dataclass
class FrequencyProfile:
    """Average on-frequency per minute of day for one (household, room)."""

    household: str
    room: Room
    values: np.ndarray  # (1440,) floats in [0, 1]
    day_count: int


@dataclass
class RoutinePlan:
    """Recommended high-usage intervals, half-open in minutes of day."""

    household: str
    room: Room
    threshold: float
    intervals: list[tuple[int, int]] = field(default_factory=list)
    degenerate: bool = False

    @property
    def total_minutes(self) -> int:
        return sum(e - s for s, e in self.intervals)


@dataclass
class KneeResult:
    threshold: float
    knee_index: int
    degenerate: bool = False


def frequency_profile(state: StateSeries) -> FrequencyProfile:
    """Fraction of days lit per minute of day: (# days on at minute t) / D."""
    d = len(state.days)
    if d < 1:
        raise DegenerateProfile("state series has no days")
    values = state.grid.mean(axis=0)
    return FrequencyProfile(state.household, state.room, values, d)


def knee_threshold(values: np.ndarray) -> KneeResult:
    """Knee of the descending-sorted value curve, min-max normalized.

    Both axes are normalized to [0, 1] and each point's signed perpendicular
    offset from the chord joining the curve's endpoints is computed. When
    the curve rises meaningfully above the chord, the knee is the LAST such
    point: that is the edge of the lowest high-usage plateau, so the knee
    value itself stays in the selected regime and weaker-but-real plateaus
    above the chord are not cut away. Curves that never rise above the
    chord (such as convex inertia-versus-k decay) use the farthest point
    below it, the classic elbow, with ties toward the smaller index.

    Collinear curves carry no knee: the result falls back to the mean of
    the values with ``degenerate=True``. A constant vector raises
    DegenerateProfile.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DegenerateProfile("empty value vector")
    y = np.sort(values)[::-1]
    if y[0] == y[-1]:
        raise DegenerateProfile("all values equal")
    n = y.size
    x_norm = np.arange(n) / (n - 1)
    y_norm = (y - y[-1]) / (y[0] - y[-1])
    # Chord runs from (0, 1) to (1, 0); signed offset > 0 means above it.
    signed = x_norm + y_norm - 1.0
    if np.max(np.abs(signed)) <= _COLLINEAR_TOL:
        return KneeResult(threshold=float(values.mean()), knee_index=0, degenerate=True)
    below_max = -signed.min()
    gate = max(_ABOVE_GATE_FLOOR, _ABOVE_GATE_FRACTION * below_max)
    above = np.flatnonzero(signed > gate)
    knee = int(above[-1]) if above.size else int(np.argmax(-signed))
    return KneeResult(threshold=float(y[knee]), knee_index=knee)


def routine_intervals(
    profile: FrequencyProfile,
    threshold: float,
    merge_gap: int = DEFAULT_MERGE_GAP,
    min_len: int = DEFAULT_MIN_LEN,
) -> RoutinePlan:
    """Select minutes with value >= threshold, merge small gaps, drop slivers."""
    selected = np.flatnonzero(profile.values >= threshold)
    intervals: list[tuple[int, int]] = []
    if selected.size:
        run_start = int(selected[0])
        prev = int(selected[0])
        for m in selected[1:]:
            m = int(m)
            if m - (prev + 1) > merge_gap:
                intervals.append((run_start, prev + 1))
                run_start = m
            prev = m
        intervals.append((run_start, prev + 1))
    intervals = [(s, e) for s, e in intervals if e - s >= min_len]
    return RoutinePlan(profile.household, profile.room, float(threshold), intervals)


def recommend_routine(
    profile: FrequencyProfile,
    merge_gap: int = DEFAULT_MERGE_GAP,
    min_len: int = DEFAULT_MIN_LEN,
) -> RoutinePlan:
    """Full routine recommendation: knee threshold, then interval extraction.

    Flat profiles produce an empty plan flagged degenerate ("no routine");
    collinear curves use the mean-value fallback threshold, also flagged.
    """
    try:
        knee = knee_threshold(profile.values)
    except DegenerateProfile:
        return RoutinePlan(profile.household, profile.room,
                           threshold=float("nan"), degenerate=True)
    plan = routine_intervals(profile, knee.threshold, merge_gap, min_len)
    plan.degenerate = knee.degenerate
    return plan


def empty_profile(household: str, room: Room, day_count: int) -> FrequencyProfile:
    """All-zero profile placeholder for entities with no usage."""
    return FrequencyProfile(household, room, np.zeros(MINUTES_PER_DAY), day_count)
