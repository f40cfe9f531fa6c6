"""Classification feature rows from reconstructed room state.

One row per (household, room, month, hour) cell that saw at least one scene
activation. Count features tally the distinct days the room was lit during
that hour at monthly, quarterly, and whole-window horizons, each normalized
by the days the window actually contains for that horizon; the label is the
modal active scene over the cell's minutes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .errors import UntrainedModel
from .ingest import NO_SCENE, Room, StateSeries
from .models import Dataset

DEFAULT_SCENE_COUNT = 9


class Period(IntEnum):
    NIGHT = 0      # hours 0-5
    MORNING = 1    # hours 6-11
    AFTERNOON = 2  # hours 12-17
    EVENING = 3    # hours 18-23


def period_of_hour(hour: int) -> Period:
    return Period(hour // 6)


@dataclass(frozen=True)
class FeatureRow:
    household: str
    room: Room
    country: str
    city: str
    month: int
    hour: int
    period: Period
    monthly_turn_on: int
    avg_turn_on_monthly: float
    quarterly_turn_on: int
    avg_turn_on_quarterly: float
    yearly_turn_on: int
    yearly_avg_turn_on: float
    label: int


CSV_COLUMNS = [
    "household", "room", "country", "city", "month", "hour", "period",
    "monthly_turn_on", "avg_turn_on_monthly", "quarterly_turn_on",
    "avg_turn_on_quarterly", "yearly_turn_on", "yearly_avg_turn_on", "label",
]

FEATURE_NAMES = [
    "room", "country", "city", "month", "hour", "period",
    "monthly_turn_on", "avg_turn_on_monthly", "quarterly_turn_on",
    "avg_turn_on_quarterly", "yearly_turn_on", "yearly_avg_turn_on",
]

_HOUR_OF_MINUTE = np.arange(1440) // 60


def entity_feature_rows(state: StateSeries, city: str, country: str,
                        scene_count: int = DEFAULT_SCENE_COUNT) -> list[FeatureRow]:
    """Feature rows for one (household, room) entity."""
    days = state.days
    d = len(days)
    month_of_day = np.array([day.month for day in days])
    quarter_of_day = (month_of_day - 1) // 3

    on_hours = state.grid.reshape(d, 24, 60).any(axis=2)

    month_onehot = np.zeros((12, d))
    month_onehot[month_of_day - 1, np.arange(d)] = 1.0
    monthly = (month_onehot @ on_hours).astype(np.int64)          # (12, 24)
    quarter_onehot = np.zeros((4, d))
    quarter_onehot[quarter_of_day, np.arange(d)] = 1.0
    quarterly = (quarter_onehot @ on_hours).astype(np.int64)      # (4, 24)
    yearly = on_hours.sum(axis=0).astype(np.int64)                # (24,)

    days_in_month = month_onehot.sum(axis=1)
    days_in_quarter = quarter_onehot.sum(axis=1)

    # Scene-minute tallies per (month, hour, scene id); slot 0 = NO_SCENE.
    cell = ((month_of_day - 1)[:, None] * 24 + _HOUR_OF_MINUTE[None, :])
    flat = cell * (scene_count + 1) + (state.scene_grid.astype(np.int64) + 1)
    scene_counts = np.bincount(flat.ravel(), minlength=12 * 24 * (scene_count + 1))
    scene_counts = scene_counts.reshape(12, 24, scene_count + 1)[:, :, 1:]

    rows: list[FeatureRow] = []
    for m_idx, h in zip(*np.nonzero(scene_counts.sum(axis=2))):
        month = int(m_idx) + 1
        hour = int(h)
        quarter = (month - 1) // 3
        label = int(np.argmax(scene_counts[m_idx, hour]))  # tie -> lowest scene id
        rows.append(FeatureRow(
            household=state.household,
            room=state.room,
            country=country,
            city=city,
            month=month,
            hour=hour,
            period=period_of_hour(hour),
            monthly_turn_on=int(monthly[m_idx, hour]),
            avg_turn_on_monthly=float(monthly[m_idx, hour] / days_in_month[m_idx]),
            quarterly_turn_on=int(quarterly[quarter, hour]),
            avg_turn_on_quarterly=float(quarterly[quarter, hour] / days_in_quarter[quarter]),
            yearly_turn_on=int(yearly[hour]),
            yearly_avg_turn_on=float(yearly[hour] / d),
            label=label,
        ))
    return rows


def build_feature_rows(states: Iterable[StateSeries],
                       geo: dict[str, tuple[str, str]],
                       scene_count: int = DEFAULT_SCENE_COUNT) -> list[FeatureRow]:
    """Feature rows for a whole state collection; geo maps household -> (city, country)."""
    rows: list[FeatureRow] = []
    for state in states:
        city, country = geo.get(state.household, ("", ""))
        rows.extend(entity_feature_rows(state, city, country, scene_count))
    return rows


# --- encoding ---------------------------------------------------------------

ROOM_ORDER = (Room.ROOM1, Room.ROOM2)


@dataclass
class Codebook:
    """Sorted category-to-code table; unseen categories map to a reserved code."""

    categories: list[str]

    @classmethod
    def fit(cls, values: Iterable[str]) -> "Codebook":
        return cls(sorted(set(values)))

    @property
    def unknown_code(self) -> int:
        return len(self.categories)

    def encode(self, value: str) -> int:
        try:
            return self.categories.index(value)
        except ValueError:
            return self.unknown_code

    def encode_many(self, values: Sequence[str]) -> np.ndarray:
        table = {c: i for i, c in enumerate(self.categories)}
        unknown = self.unknown_code
        return np.array([table.get(v, unknown) for v in values], dtype=np.int64)


@dataclass
class FeatureCodes:
    country: Codebook
    city: Codebook

    def to_jsonable(self) -> dict:
        return {
            "country": self.country.categories,
            "city": self.city.categories,
            "room": [r.value for r in ROOM_ORDER],
            "period": [p.name.lower() for p in Period],
            "unknown_code_rule": "len(categories)",
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "FeatureCodes":
        return cls(country=Codebook(list(obj["country"])),
                   city=Codebook(list(obj["city"])))


def fit_codes(rows: Sequence[FeatureRow]) -> FeatureCodes:
    return FeatureCodes(
        country=Codebook.fit(r.country for r in rows),
        city=Codebook.fit(r.city for r in rows),
    )


def rows_to_dataset(rows: Sequence[FeatureRow], codes: FeatureCodes,
                    scene_count: int = DEFAULT_SCENE_COUNT) -> Dataset:
    """Encode rows as the numeric design matrix in FEATURE_NAMES order."""
    n = len(rows)
    X = np.empty((n, len(FEATURE_NAMES)))
    X[:, 0] = [ROOM_ORDER.index(r.room) for r in rows]
    X[:, 1] = codes.country.encode_many([r.country for r in rows])
    X[:, 2] = codes.city.encode_many([r.city for r in rows])
    X[:, 3] = [r.month for r in rows]
    X[:, 4] = [r.hour for r in rows]
    X[:, 5] = [int(r.period) for r in rows]
    X[:, 6] = [r.monthly_turn_on for r in rows]
    X[:, 7] = [r.avg_turn_on_monthly for r in rows]
    X[:, 8] = [r.quarterly_turn_on for r in rows]
    X[:, 9] = [r.avg_turn_on_quarterly for r in rows]
    X[:, 10] = [r.yearly_turn_on for r in rows]
    X[:, 11] = [r.yearly_avg_turn_on for r in rows]
    y = np.array([r.label for r in rows], dtype=np.int64)
    return Dataset(X, y, list(FEATURE_NAMES), scene_count)


def compute_feature_importance(model, feature_names: Sequence[str]) -> list[tuple[str, float]]:
    """Normalized mean impurity decrease per feature, ranked descending."""
    importances = getattr(model, "importances_", None)
    if importances is None:
        raise UntrainedModel("model carries no importances")
    importances = np.asarray(importances, dtype=float)
    if len(feature_names) != importances.size:
        raise ValueError("feature name count does not match model")
    total = importances.sum()
    if total > 0:
        importances = importances / total
    ranked = sorted(zip(feature_names, importances), key=lambda kv: -kv[1])
    return [(name, float(v)) for name, v in ranked]
