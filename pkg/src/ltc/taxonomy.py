"""Fixed label space: 24 activity types grouped into 9 categories.

The taxonomy is frozen. Label strings are the canonical serialization in
all data files; integer ids are internal.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

# (type name, category name), ordered; ids are list positions.
_TYPE_TABLE = [
    ("Birth", "Life"),
    ("Death", "Life"),
    ("Marriage", "Life"),
    ("Injure and Illness", "Life"),
    ("Settlement", "Life"),
    ("Education", "Life"),
    ("Give birth", "Life"),
    ("Accident", "Life"),
    ("Purchase and Sell", "Life"),
    ("Divorce", "Life"),
    ("Career", "Career"),
    ("Competition", "Pro-Event"),
    ("Performance", "Pro-Event"),
    ("Exhibition", "Pro-Event"),
    ("Creation", "Pro-Event"),
    ("Campaign", "Pro-Event"),
    ("Start org", "Pro-Event"),
    ("Meet", "Contact"),
    ("Assembly", "Contact"),
    ("Justice", "Justice"),
    ("Attack", "Attack"),
    ("Movement", "Movement"),
    ("Military", "Military"),
    ("Other", "Other"),
]

TYPE_NAMES = tuple(name for name, _ in _TYPE_TABLE)
CATEGORY_NAMES = ("Life", "Career", "Pro-Event", "Contact", "Justice",
                  "Attack", "Movement", "Military", "Other")

NUM_TYPES = len(TYPE_NAMES)
NUM_CATEGORIES = len(CATEGORY_NAMES)

_TYPE_TO_ID = {name: i for i, (name, _) in enumerate(_TYPE_TABLE)}
_TYPE_TO_CATEGORY = {name: cat for name, cat in _TYPE_TABLE}
_CATEGORY_TO_ID = {name: i for i, name in enumerate(CATEGORY_NAMES)}
# normalized (casefolded, whitespace-collapsed) name -> canonical name
_NORMALIZED = {" ".join(name.split()).casefold(): name for name, _ in _TYPE_TABLE}


class UnknownLabelError(ValueError):
    """Raised when a string does not name any of the 24 activity types."""


def type_id(name: str) -> int:
    """Stable integer id (0-23) of a canonical type name."""
    return _TYPE_TO_ID[name]

def type_name(tid: int) -> str:
    return TYPE_NAMES[tid]

def category_of(name: str) -> str:
    """Owning category of an activity type."""
    if name not in _TYPE_TO_CATEGORY:
        raise UnknownLabelError(f"unknown activity type: {name!r}")
    return _TYPE_TO_CATEGORY[name]

def category_id(name: str) -> int:
    return _CATEGORY_TO_ID[name]

def category_id_of_type(tid: int) -> int:
    return _CATEGORY_TO_ID[_TYPE_TO_CATEGORY[TYPE_NAMES[tid]]]


def parse_label(s: str) -> str:
    """Resolve a label string to its canonical type name.

    Matching is case-insensitive and whitespace-normalized; the returned
    name carries canonical casing.
    """
    key = " ".join(str(s).split()).casefold()
    if key not in _NORMALIZED:
        raise UnknownLabelError(
            f"unknown activity type: {s!r}; valid labels are: {', '.join(TYPE_NAMES)}"
        )
    return _NORMALIZED[key]


def category_sizes() -> dict[str, int]:
    sizes = {c: 0 for c in CATEGORY_NAMES}
    for _, cat in _TYPE_TABLE:
        sizes[cat] += 1
    return sizes


@lru_cache(maxsize=1)
def load_taxonomy_records() -> list[dict]:
    """Shipped machine-readable taxonomy (name, category, gloss per type)."""
    text = resources.files("ltc").joinpath("assets/taxonomy.json").read_text("utf-8")
    return json.loads(text)


def validate_shipped_taxonomy() -> None:
    """Cross-check the shipped taxonomy file against the frozen table."""
    records = load_taxonomy_records()
    if len(records) != NUM_TYPES:
        raise ValueError(f"taxonomy file has {len(records)} records, expected {NUM_TYPES}")
    for i, rec in enumerate(records):
        name, cat = TYPE_NAMES[i], _TYPE_TABLE[i][1]
        if rec["name"] != name or rec["category"] != cat:
            raise ValueError(f"taxonomy file record {i} disagrees with the frozen table: {rec}")
        if not rec.get("gloss"):
            raise ValueError(f"taxonomy record {name} lacks a gloss")


def rollup_counts_to_categories(per_type: list[int] | tuple[int, ...]) -> list[int]:
    """Sum a 24-long per-type count vector into 9 per-category counts."""
    if len(per_type) != NUM_TYPES:
        raise ValueError(f"expected {NUM_TYPES} per-type counts, got {len(per_type)}")
    out = [0] * NUM_CATEGORIES
    for tid, n in enumerate(per_type):
        out[category_id_of_type(tid)] += n
    return out
