"""Venue lookup and ranking around a meetup point."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import httpx
import numpy as np

from .road_graph import haversine_m

VENUE_COLUMNS = ("id", "name", "lon", "lat", "category", "popularity")
API_KEY_ENV = "VENUE_API_KEY"
DEFAULT_ENDPOINT = "https://api.foursquare.com/v2/venues/search"


class VenueError(RuntimeError):
    pass


class VenueFormatError(VenueError, ValueError):
    pass


class VenueConfigError(VenueError):
    """Remote source misconfigured (missing endpoint or credential)."""


class VenueServiceError(VenueError):
    """Transport, HTTP or response-parsing failure of the remote service."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class RateLimitError(VenueServiceError):
    def __init__(self, message: str, retry_after: str | None = None):
        super().__init__(message, 429)
        self.retry_after = retry_after


@dataclass(frozen=True)
class Venue:
    id: str
    name: str
    lon: float
    lat: float
    category: str = ""
    popularity: float = 0.0

    def __post_init__(self):
        if not (-180.0 <= self.lon <= 180.0 and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"venue {self.id}: invalid coordinates ({self.lon}, {self.lat})")
        if not self.popularity >= 0:
            raise ValueError(f"venue {self.id}: popularity must be >= 0")


def load_venues(path) -> list[Venue]:
    venues: list[Venue] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in VENUE_COLUMNS[:4] if c not in (reader.fieldnames or ())]
        if missing:
            raise VenueFormatError(f"{path}:1: missing column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                pop = (row.get("popularity") or "").strip()
                v = Venue(
                    row["id"].strip(), row["name"], float(row["lon"]), float(row["lat"]),
                    (row.get("category") or "").strip(), float(pop) if pop else 0.0,
                )
            except (TypeError, ValueError) as exc:
                raise VenueFormatError(f"{path}:{lineno}: {exc}") from None
            if v.id in seen:
                raise VenueFormatError(f"{path}:{lineno}: duplicate venue id {v.id!r}")
            seen.add(v.id)
            venues.append(v)
    return venues


@dataclass(frozen=True)
class RankedVenue:
    venue: Venue
    distance_m: float
    score: float


def rank_nearby(
    venues: list[Venue],
    point: tuple[float, float],
    k: int = 10,
    weight_popularity: float = 0.0,
) -> list[RankedVenue]:
    """Top ``k`` venues by a blend of distance rank and popularity; lower score is better.

    ``score = (1 - w) * distance_rank / (n - 1) + w * (1 - popularity / max_popularity)``.
    Equal distances share a rank. With ``w = 0`` this is plain nearest-first order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 <= weight_popularity <= 1.0:
        raise ValueError("weight_popularity must be in [0, 1]")
    if not venues:
        return []
    lon = np.array([v.lon for v in venues])
    lat = np.array([v.lat for v in venues])
    dist = haversine_m(point[0], point[1], lon, lat)
    n = len(venues)
    sorted_d = np.sort(dist)
    rank = np.searchsorted(sorted_d, dist, side="left")
    norm_rank = rank / (n - 1) if n > 1 else np.zeros(n)
    pop = np.array([v.popularity for v in venues])
    norm_pop = pop / pop.max() if pop.max() > 0 else np.zeros(n)
    w = weight_popularity
    score = (1.0 - w) * norm_rank + w * (1.0 - norm_pop)
    order = sorted(range(n), key=lambda i: (score[i], dist[i], venues[i].id))
    return [RankedVenue(venues[i], float(dist[i]), float(score[i])) for i in order[:k]]


@dataclass(frozen=True)
class VenueSource:
    """Where venues come from: ``local_file`` (config = path) or ``remote_service`` (config = endpoint)."""

    kind: str
    config: str
    credential_env: str = API_KEY_ENV

    def __post_init__(self):
        if self.kind not in ("local_file", "remote_service"):
            raise ValueError(f"unknown venue source kind {self.kind!r}")


def _parse_remote(payload: dict) -> list[Venue]:
    """Map a venue-search response body onto ``Venue`` values.

    Accepts the ``{"response": {"venues": [...]}}`` shape with ``location.lat``,
    ``location.lng``, ``categories[].name`` and ``stats.checkinsCount``.
    """
    try:
        items = payload["response"]["venues"]
        out = []
        for item in items:
            loc = item["location"]
            cats = item.get("categories") or []
            checkins = (item.get("stats") or {}).get("checkinsCount", 0)
            out.append(Venue(
                str(item["id"]), str(item["name"]), float(loc["lng"]), float(loc["lat"]),
                str(cats[0]["name"]) if cats else "", float(checkins or 0),
            ))
        return out
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise VenueServiceError(f"unexpected venue response: {exc!r}") from None


def fetch_remote(
    source: VenueSource,
    point: tuple[float, float],
    k: int = 10,
    client: httpx.Client | None = None,
    timeout: float = 10.0,
) -> list[Venue]:
    """Query a remote venue-search endpoint around ``point`` (lon, lat).

    The credential is read from the environment variable named by the source
    and sent as a bearer token. ``client`` lets callers inject a transport.
    """
    if source.kind != "remote_service":
        raise VenueConfigError("fetch_remote needs a remote_service source")
    key = os.environ.get(source.credential_env)
    if not key:
        raise VenueConfigError(f"environment variable {source.credential_env} is not set")
    if not source.config:
        raise VenueConfigError("remote venue source has no endpoint")
    params = {"latitude": point[1], "longitude": point[0], "limit": k}
    headers = {"Authorization": f"Bearer {key}", "Accept": "application/json"}
    own = client is None
    client = client or httpx.Client(timeout=timeout)
    try:
        resp = client.get(source.config, params=params, headers=headers)
    except httpx.HTTPError as exc:
        raise VenueServiceError(f"venue service request failed: {exc}") from None
    finally:
        if own:
            client.close()
    if resp.status_code == 429:
        raise RateLimitError("venue service rate limit reached", resp.headers.get("Retry-After"))
    if resp.status_code >= 400:
        raise VenueServiceError(f"venue service returned HTTP {resp.status_code}", resp.status_code)
    try:
        payload = resp.json()
    except ValueError:
        raise VenueServiceError("venue service returned invalid JSON") from None
    return _parse_remote(payload)[:k]


def venues_near(source: VenueSource, point: tuple[float, float], k: int = 10, **kwargs) -> list[Venue]:
    """Venues from either kind of source, ready for :func:`rank_nearby`."""
    if source.kind == "local_file":
        return load_venues(source.config)
    return fetch_remote(source, point, k, **kwargs)
