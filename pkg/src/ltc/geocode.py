"""Geocoding with a mandatory on-disk cache and an offline gazetteer stub.

The endpoint is a free-text query interface configured via
``LTC_GEOCODER_URL``: GET ``{url}?q={location}`` returning JSON with
``lat``, ``lon`` and ``country`` (null body or 404 for unresolvable
names). Results, including negative ones, persist in the cache keyed by
the normalized location string.
"""

from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path
from typing import Optional

from .analytics import GeoPoint

log = logging.getLogger(__name__)

ENV_GEOCODER_URL = "LTC_GEOCODER_URL"
ENV_GAZETTEER = "LTC_GAZETTEER_FILE"


def normalize_location(s: str) -> str:
    return " ".join(s.split()).casefold()


class GeocodeCache:
    """JSON file cache; negative lookups are stored as null entries."""

    def __init__(self, path):
        self.path = Path(path)
        self._data: dict[str, Optional[dict]] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fp:
                self._data = json.load(fp)

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def get(self, key: str) -> Optional[dict]:
        return self._data.get(key)

    def put(self, key: str, value: Optional[dict]) -> None:
        self._data[key] = value
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fp:
            json.dump(self._data, fp, ensure_ascii=False, indent=0, sort_keys=True)
        tmp.replace(self.path)


class GazetteerStub:
    """Offline lookup table: {location: {lat, lon, country}}."""

    def __init__(self, path):
        with open(path, encoding="utf-8") as fp:
            table = json.load(fp)
        self._table = {normalize_location(k): v for k, v in table.items()}

    def lookup(self, location: str) -> Optional[dict]:
        return self._table.get(normalize_location(location))


class HttpGeocoder:
    def __init__(self, base_url: str, timeout: float = 30.0, max_attempts: int = 3,
                 backoff: float = 1.0):
        self.base_url = base_url
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff

    def lookup(self, location: str) -> Optional[dict]:
        import requests

        last_err = None
        for attempt in range(self.max_attempts):
            try:
                resp = requests.get(self.base_url, params={"q": location},
                                    timeout=self.timeout)
                if resp.status_code == 404:
                    return None
                resp.raise_for_status()
                data = resp.json()
                if not data:
                    return None
                return {"lat": float(data["lat"]), "lon": float(data["lon"]),
                        "country": data.get("country")}
            except Exception as err:  # noqa: BLE001 - endpoint failures are retriable
                last_err = err
                time.sleep(self.backoff * (2 ** attempt))
        raise RuntimeError(f"geocoder failed after {self.max_attempts} attempts: {last_err}")


class Geocoder:
    """Cache-first geocoding with rate limiting on endpoint misses."""

    def __init__(self, endpoint, cache: GeocodeCache, min_interval: float = 1.0):
        self.endpoint = endpoint
        self.cache = cache
        self.min_interval = min_interval
        self._last_call = 0.0
        self.network_calls = 0

    def geocode(self, location: str) -> tuple[Optional[GeoPoint], Optional[str]]:
        if not location or not location.strip():
            raise ValueError("cannot geocode an empty location string")
        key = normalize_location(location)
        if key in self.cache:
            hit = self.cache.get(key)
        else:
            wait = self.min_interval - (time.monotonic() - self._last_call)
            if wait > 0 and self.network_calls > 0:
                time.sleep(wait)
            self._last_call = time.monotonic()
            self.network_calls += 1
            hit = self.endpoint.lookup(location)
            self.cache.put(key, hit)
        if hit is None:
            return None, None
        return GeoPoint(float(hit["lat"]), float(hit["lon"])), hit.get("country")


def geocoder_from_env(cache_path, stub: bool = False, min_interval: float = 1.0) -> Geocoder:
    gaz = os.environ.get(ENV_GAZETTEER)
    if stub or gaz:
        if not gaz:
            raise RuntimeError(f"stub mode requested but {ENV_GAZETTEER} is unset")
        endpoint = GazetteerStub(gaz)
        min_interval = 0.0
    else:
        url = os.environ.get(ENV_GEOCODER_URL)
        if not url:
            raise RuntimeError(f"{ENV_GEOCODER_URL} is unset and no gazetteer stub given")
        endpoint = HttpGeocoder(url)
    return Geocoder(endpoint, GeocodeCache(cache_path), min_interval=min_interval)


def enrich_tuples(tuples, geocoder: Geocoder):
    """Attach coordinates and country to tuples lacking them."""
    from dataclasses import replace

    out = []
    unresolved = 0
    for t in tuples:
        if t.latitude is not None and t.country is not None:
            out.append(t)
            continue
        try:
            point, country = geocoder.geocode(t.location)
        except ValueError:
            unresolved += 1
            out.append(t)
            continue
        if point is None:
            unresolved += 1
            out.append(t)
        else:
            out.append(replace(t, latitude=point.latitude,
                               longitude=point.longitude, country=country))
    if unresolved:
        log.info("%d locations left ungeocoded", unresolved)
    return out
