"""Corpus-scale analytics over labeled trajectory tuples.

Everything here is a pure function of the tuple stream plus config:
5-year activity-ratio series, correlation, international departures,
life-stage aggregation, and birth-to-activity distances. Series are
emitted as tidy rows; rendering lives in :mod:`ltc.plots`.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import stats as _st

from . import taxonomy

EARTH_RADIUS_KM = 6371.0088
DEFAULT_YEAR_RANGE = (1700, 2000)
DEFAULT_BIN_WIDTH = 5
MIN_TIMELINE_LENGTH = 4  # persons need more than 3 tuples to keep

_YEAR_RE = re.compile(r"\d{4}")


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0):
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not (-180.0 < self.longitude <= 180.0):
            raise ValueError(f"longitude out of range: {self.longitude}")


@dataclass(frozen=True)
class LabeledTuple:
    person: str
    year: Optional[int]
    location: str
    type: str
    source_sample_id: str
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    country: Optional[str] = None

    def point(self) -> Optional[GeoPoint]:
        if self.latitude is None or self.longitude is None:
            return None
        return GeoPoint(self.latitude, self.longitude)

    def to_record(self) -> dict:
        rec = {"person": self.person, "year": self.year, "location": self.location,
               "type": self.type, "source_sample_id": self.source_sample_id}
        if self.latitude is not None:
            rec["latitude"] = self.latitude
            rec["longitude"] = self.longitude
        if self.country is not None:
            rec["country"] = self.country
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "LabeledTuple":
        return cls(person=rec["person"], year=rec.get("year"),
                   location=rec["location"], type=taxonomy.parse_label(rec["type"]),
                   source_sample_id=rec.get("source_sample_id", ""),
                   latitude=rec.get("latitude"), longitude=rec.get("longitude"),
                   country=rec.get("country"))


@dataclass
class PersonTimeline:
    person: str
    tuples: list[LabeledTuple]

    def __len__(self) -> int:
        return len(self.tuples)


def extract_year(time_text: str) -> Optional[int]:
    """First 4-digit year in the time span; ranges attribute to the start."""
    m = _YEAR_RE.search(time_text)
    return int(m.group()) if m else None


def read_tuples(path) -> list[LabeledTuple]:
    out = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                out.append(LabeledTuple.from_record(json.loads(line)))
    return out


def write_tuples(tuples: Iterable[LabeledTuple], path, append: bool = False) -> None:
    with open(path, "a" if append else "w", encoding="utf-8") as fp:
        for t in tuples:
            fp.write(json.dumps(t.to_record(), ensure_ascii=False) + "\n")


def build_timelines(tuples: Iterable[LabeledTuple],
                    year_range: tuple[int, int] = DEFAULT_YEAR_RANGE,
                    min_length: int = MIN_TIMELINE_LENGTH) -> list[PersonTimeline]:
    """Year-sorted per-person timelines after the standard preprocessing:
    drop year-less or out-of-range tuples, keep persons with more than
    three tuples. Sorting is stable, so same-year ties keep input order.
    Idempotent: applying it to its own output changes nothing."""
    lo, hi = year_range
    per_person: dict[str, list[LabeledTuple]] = defaultdict(list)
    for t in tuples:
        if t.year is not None and lo <= t.year <= hi:
            per_person[t.person].append(t)
    timelines = []
    for person in sorted(per_person):
        tl = sorted(per_person[person], key=lambda t: t.year)
        if len(tl) >= min_length:
            timelines.append(PersonTimeline(person=person, tuples=tl))
    return timelines


# ---------------------------------------------------------------------------
# Ratio series and correlation

def bin_start(year: int, bin_width: int = DEFAULT_BIN_WIDTH,
              origin: int = DEFAULT_YEAR_RANGE[0]) -> int:
    return origin + ((year - origin) // bin_width) * bin_width


def type_ratio_series(tuples: Iterable[LabeledTuple], type_filter: str,
                      bin_width: int = DEFAULT_BIN_WIDTH,
                      year_range: tuple[int, int] = DEFAULT_YEAR_RANGE) -> list[tuple[int, Optional[float]]]:
    """Per-bin share of one activity type among all activities.

    Bins step from the range start; bins with no activity at all emit an
    absent ratio rather than zero.
    """
    type_filter = taxonomy.parse_label(type_filter)
    lo, hi = year_range
    totals: Counter = Counter()
    hits: Counter = Counter()
    for t in tuples:
        if t.year is None or not (lo <= t.year <= hi):
            continue
        b = bin_start(t.year, bin_width, lo)
        totals[b] += 1
        if t.type == type_filter:
            hits[b] += 1
    series = []
    for b in range(lo, hi + 1, bin_width):
        series.append((b, hits[b] / totals[b] if totals[b] else None))
    return series


def paired_series(a: list[tuple[int, Optional[float]]],
                  b: list[tuple[int, Optional[float]]]) -> tuple[list[float], list[float]]:
    """Align two binned series, dropping bins absent on either side."""
    bmap = dict(b)
    xs, ys = [], []
    for bin_, va in a:
        vb = bmap.get(bin_)
        if va is not None and vb is not None:
            xs.append(va)
            ys.append(vb)
    return xs, ys


def pearson(series_a, series_b) -> tuple[float, float]:
    """Pearson r with a two-sided p-value from the t-distribution (n-2 df)."""
    x = np.asarray(series_a, dtype=np.float64)
    y = np.asarray(series_b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be equal-length 1-d sequences")
    n = x.size
    if n < 3:
        raise ValueError(f"need at least 3 paired points, got {n}")
    xm = x - x.mean()
    ym = y - y.mean()
    sx = float(np.sqrt((xm * xm).sum()))
    sy = float(np.sqrt((ym * ym).sum()))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson r is undefined for a constant series")
    r = float((xm * ym).sum() / (sx * sy))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(_st.t.sf(abs(t), n - 2))
    return r, p


# ---------------------------------------------------------------------------
# International departures

@dataclass
class DepartureSeries:
    bin_starts: list[int]
    travels: dict[int, int]                    # bin -> travels starting at home
    departures: dict[int, int]                 # bin -> international departures
    by_type: dict[int, dict[str, int]]         # bin -> type -> departures
    type_order: list[str]                      # top types plus 'Other'
    skipped_pairs: int = 0

    def ratio(self, b: int) -> Optional[float]:
        n = self.travels.get(b, 0)
        return self.departures.get(b, 0) / n if n else None

    def stacked_ratios(self, b: int) -> dict[str, float]:
        n = self.travels.get(b, 0)
        if not n:
            return {}
        return {t: self.by_type.get(b, {}).get(t, 0) / n for t in self.type_order}


def _consecutive_pairs(timeline: PersonTimeline):
    for a, b in zip(timeline.tuples, timeline.tuples[1:]):
        yield a, b


def departure_ratio_series(timelines: list[PersonTimeline], home_country: str,
                           top_types: int = 8, bin_width: int = DEFAULT_BIN_WIDTH,
                           year_range: tuple[int, int] = DEFAULT_YEAR_RANGE,
                           min_distance_km: float = 0.0) -> DepartureSeries:
    """Ratio of international departures to travels that start at home.

    A travel is a consecutive tuple pair of one person whose first tuple
    sits in the home country; it is a departure when the second tuple's
    country differs. Departures attribute to the second tuple's type and
    bin by its year. Types outside the top ``top_types`` by departure
    frequency (Birth and Death are never candidates) group into Other.
    """
    lo, hi = year_range
    travels: Counter = Counter()
    raw_departures: list[tuple[int, str]] = []
    skipped = 0
    for tl in timelines:
        for a, b in _consecutive_pairs(tl):
            if a.country is None or b.country is None:
                skipped += 1
                continue
            if a.country != home_country:
                continue
            if b.year is None or not (lo <= b.year <= hi):
                skipped += 1
                continue
            if min_distance_km > 0 and a.point() and b.point():
                if distance_km(a.point(), b.point()) < min_distance_km:
                    continue
            bin_ = bin_start(b.year, bin_width, lo)
            travels[bin_] += 1
            if b.country != home_country:
                raw_departures.append((bin_, b.type))

    freq = Counter(t for _, t in raw_departures if t not in ("Birth", "Death"))
    top = [t for t, _ in sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:top_types]]
    type_order = top + ["Other"]

    departures: Counter = Counter()
    by_type: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    for bin_, t in raw_departures:
        departures[bin_] += 1
        by_type[bin_][t if t in top else "Other"] += 1

    return DepartureSeries(
        bin_starts=list(range(lo, hi + 1, bin_width)),
        travels=dict(travels),
        departures=dict(departures),
        by_type={b: dict(d) for b, d in by_type.items()},
        type_order=type_order,
        skipped_pairs=skipped,
    )


# ---------------------------------------------------------------------------
# Life stages

LIFE_STAGE_TYPES = ("Birth", "Death", "Education", "Career", "Movement")


@dataclass
class LifeStageHistogram:
    age_groups: list[int]                       # group starts: 0, 10, 20, ...
    counts: dict[int, dict[str, int]]           # group -> type/Other -> count
    skipped_timelines: int = 0
    inconsistent_tuples: int = 0


def life_stage_histogram(timelines: list[PersonTimeline],
                         group_width: int = 10) -> LifeStageHistogram:
    """Activity counts per decade of life for the five headline types,
    everything else pooled as Other. Timelines without a Birth year are
    skipped; negative computed ages flag the tuple as inconsistent."""
    counts: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    skipped = 0
    inconsistent = 0
    max_group = 0
    for tl in timelines:
        birth_years = [t.year for t in tl.tuples if t.type == "Birth" and t.year is not None]
        if not birth_years:
            skipped += 1
            continue
        birth = min(birth_years)
        for t in tl.tuples:
            if t.year is None:
                continue
            age = t.year - birth
            if age < 0:
                inconsistent += 1
                continue
            group = (age // group_width) * group_width
            max_group = max(max_group, group)
            key = t.type if t.type in LIFE_STAGE_TYPES else "Other"
            counts[group][key] += 1
    return LifeStageHistogram(
        age_groups=list(range(0, max_group + 1, group_width)),
        counts={g: dict(d) for g, d in counts.items()},
        skipped_timelines=skipped,
        inconsistent_tuples=inconsistent,
    )


# ---------------------------------------------------------------------------
# Distances

def distance_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle (haversine) distance."""
    la1, lo1, la2, lo2 = map(math.radians, (a.latitude, a.longitude, b.latitude, b.longitude))
    s = (math.sin((la2 - la1) / 2) ** 2
         + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(s)))


@dataclass
class DistanceDistribution:
    target_type: str
    distances_km: list[float]
    bin_edges: list[float]        # log-spaced above 1 km, zero bucket first
    bin_counts: list[int]
    mean_km: float
    skipped: int = 0


def birth_distance_distribution(timelines: list[PersonTimeline], target_type: str,
                                n_bins: int = 24) -> DistanceDistribution:
    """Distance from birthplace for every activity of the target type."""
    target_type = taxonomy.parse_label(target_type)
    if target_type not in ("Education", "Career"):
        raise ValueError("target type must be Education or Career")
    dists = []
    skipped = 0
    for tl in timelines:
        births = [t for t in tl.tuples if t.type == "Birth" and t.point() is not None]
        if not births:
            skipped += sum(1 for t in tl.tuples if t.type == target_type)
            continue
        origin = births[0].point()
        for t in tl.tuples:
            if t.type != target_type:
                continue
            p = t.point()
            if p is None:
                skipped += 1
                continue
            dists.append(distance_km(origin, p))

    half_circumference = math.pi * EARTH_RADIUS_KM
    edges = [0.0, 1.0] + list(np.logspace(0, math.log10(half_circumference), n_bins)[1:])
    counts = [0] * (len(edges) - 1)
    for d in dists:
        for i in range(len(edges) - 1):
            if edges[i] <= d < edges[i + 1] or (i == len(counts) - 1 and d >= edges[-1]):
                counts[i] += 1
                break
    return DistanceDistribution(
        target_type=target_type,
        distances_km=dists,
        bin_edges=edges,
        bin_counts=counts,
        mean_km=float(np.mean(dists)) if dists else 0.0,
        skipped=skipped,
    )
