"""Gazetteer lookup, place-mention extraction, and point-map emission.

The offline gazetteer (CSV rows of ``name,lat,lon``, no header) is the
primary resolver. A remote geocoder can be configured as a fallback; it is
queried at most once per second, cached, and any failure degrades to an
unresolved name rather than an error.
"""

from __future__ import annotations

import csv
import json
import re
import threading
import time
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Callable, Iterable

import numpy as np

EARTH_RADIUS_KM = 6371.0
DEFAULT_CENTER = (-33.9249, 18.4241)
DEFAULT_RADIUS_KM = 50.0


@dataclass(frozen=True)
class GazetteerEntry:
    name: str
    lat: float
    lon: float


@dataclass(frozen=True)
class GeoPoint:
    name: str
    lat: float
    lon: float
    mentions: int


@dataclass
class MapDocument:
    center: tuple[float, float]
    radius_km: float
    points: list[GeoPoint] = field(default_factory=list)


def _check_bounds(lat: float, lon: float, context: str) -> None:
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"{context}: latitude {lat} out of [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"{context}: longitude {lon} out of [-180, 180]")


def load_gazetteer(source: IO[str] | Iterable[str]) -> list[GazetteerEntry]:
    """Parse ``name,lat,lon`` rows; names are lowercased and must be unique."""
    entries: list[GazetteerEntry] = []
    seen: set[str] = set()
    for row_no, row in enumerate(csv.reader(source), start=1):
        if not row:
            continue
        if len(row) != 3:
            raise ValueError(f"gazetteer row {row_no}: expected name,lat,lon, got {row!r}")
        name = row[0].strip().lower()
        if not name:
            raise ValueError(f"gazetteer row {row_no}: empty place name")
        try:
            lat, lon = float(row[1]), float(row[2])
        except ValueError:
            raise ValueError(f"gazetteer row {row_no}: non-numeric coordinate in {row!r}") from None
        _check_bounds(lat, lon, f"gazetteer row {row_no}")
        if name in seen:
            raise ValueError(f"gazetteer row {row_no}: duplicate name {name!r}")
        seen.add(name)
        entries.append(GazetteerEntry(name=name, lat=lat, lon=lon))
    return entries


def load_gazetteer_file(path: str | Path) -> list[GazetteerEntry]:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_gazetteer(fh)


def default_gazetteer() -> list[GazetteerEntry]:
    text = resources.files("hijackmap.data").joinpath("gazetteer_cape_town.csv").read_text("utf-8")
    return load_gazetteer(text.splitlines())


def extract_locations(text: str, gazetteer: list[GazetteerEntry]) -> list[str]:
    """Gazetteer names mentioned in the text, longest match first.

    Matching is case-insensitive on word boundaries; a shorter name
    overlapping an already matched span is suppressed (so "cape town"
    hides "cape"), and each name is reported at most once, ordered by
    first occurrence.
    """
    lowered = text.lower()
    taken: list[tuple[int, int]] = []
    found: list[tuple[int, str]] = []
    for entry in sorted(gazetteer, key=lambda e: len(e.name), reverse=True):
        pattern = r"\b" + re.escape(entry.name) + r"\b"
        first_pos = None
        for match in re.finditer(pattern, lowered):
            span = match.span()
            if any(span[0] < end and start < span[1] for start, end in taken):
                continue
            taken.append(span)
            if first_pos is None:
                first_pos = span[0]
        if first_pos is not None:
            found.append((first_pos, entry.name))
    return [name for _, name in sorted(found)]


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in km between two (lat, lon) points."""
    lat1, lon1 = np.radians(a)
    lat2, lon2 = np.radians(b)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    return float(2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h)))


def _http_fetch(url: str, timeout: float) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as response:
        if response.status != 200:
            raise OSError(f"geocoder returned status {response.status}")
        return response.read()


class RemoteGeocoder:
    """Optional HTTP fallback resolver with caching and a 1 req/s ceiling.

    Queries ``<base_url>?q=<name>&format=json`` and reads decimal-string
    "lat"/"lon" fields from the first result object. Timeouts, non-success
    statuses and malformed bodies all degrade to an unresolved name.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 5.0,
        min_interval: float = 1.0,
        fetch: Callable[[str, float], bytes] | None = None,
    ):
        self.base_url = base_url
        self.timeout = timeout
        self.min_interval = min_interval
        self.fetch = fetch or _http_fetch
        self.cache: dict[str, tuple[float, float] | None] = {}
        self.warnings: list[str] = []
        self._lock = threading.Lock()
        self._last_request = 0.0

    def resolve(self, name: str) -> tuple[float, float] | None:
        with self._lock:
            if name in self.cache:
                return self.cache[name]
            wait = self.min_interval - (time.monotonic() - self._last_request)
            if wait > 0:
                time.sleep(wait)
            url = f"{self.base_url}?q={urllib.parse.quote(name)}&format=json"
            try:
                self._last_request = time.monotonic()
                body = self.fetch(url, self.timeout)
                results = json.loads(body)
                first = results[0]
                coords = (float(first["lat"]), float(first["lon"]))
                _check_bounds(*coords, context=f"geocoder result for {name!r}")
            except Exception as exc:  # degrade, never fail the pipeline
                self.warnings.append(f"geocoder lookup for {name!r} failed: {exc}")
                coords = None
            self.cache[name] = coords
            return coords


def resolve_coordinates(
    name: str,
    gazetteer: list[GazetteerEntry],
    remote: RemoteGeocoder | None = None,
) -> tuple[float, float] | None:
    """Gazetteer hit wins; otherwise one cached remote lookup; else None."""
    for entry in gazetteer:
        if entry.name == name:
            return (entry.lat, entry.lon)
    if remote is not None:
        return remote.resolve(name)
    return None


@dataclass
class MapBuildSummary:
    relevant: int = 0
    resolved_mentions: int = 0
    within_radius: int = 0
    unresolved_dropped: int = 0
    outside_radius: int = 0


def build_map(
    relevant_tweets: Iterable,
    gazetteer: list[GazetteerEntry],
    center: tuple[float, float] = DEFAULT_CENTER,
    radius_km: float = DEFAULT_RADIUS_KM,
    remote: RemoteGeocoder | None = None,
) -> tuple[MapDocument, MapBuildSummary]:
    """Extract, resolve, radius-filter, and aggregate mention counts.

    ``relevant_tweets`` may be TweetRecords or anything with a ``text``
    attribute. Unresolved and out-of-radius mentions are dropped and
    counted in the summary.
    """
    summary = MapBuildSummary()
    mentions: dict[str, int] = {}
    coords: dict[str, tuple[float, float]] = {}
    for tweet in relevant_tweets:
        summary.relevant += 1
        for name in extract_locations(tweet.text, gazetteer):
            resolved = coords.get(name)
            if resolved is None:
                resolved = resolve_coordinates(name, gazetteer, remote)
            if resolved is None:
                summary.unresolved_dropped += 1
                continue
            summary.resolved_mentions += 1
            if haversine_km(resolved, center) > radius_km:
                summary.outside_radius += 1
                continue
            summary.within_radius += 1
            coords[name] = resolved
            mentions[name] = mentions.get(name, 0) + 1
    points = [
        GeoPoint(name=name, lat=coords[name][0], lon=coords[name][1], mentions=count)
        for name, count in sorted(mentions.items())
    ]
    return MapDocument(center=center, radius_km=radius_km, points=points), summary


def emit_geojson(doc: MapDocument) -> bytes:
    """Deterministic RFC 7946 FeatureCollection bytes.

    Key order is fixed: type, features; each feature carries type,
    geometry (type, coordinates as [lon, lat]) and properties (name,
    mentions).
    """
    features = [
        {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
            "properties": {"name": p.name, "mentions": p.mentions},
        }
        for p in doc.points
    ]
    payload = {"type": "FeatureCollection", "features": features}
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=True).encode("utf-8")


def points_from_geojson(data: bytes | str) -> list[GeoPoint]:
    """Parse emit_geojson output back into GeoPoints (lon, lat order on disk)."""
    obj = json.loads(data)
    if obj.get("type") != "FeatureCollection":
        raise ValueError("not a FeatureCollection")
    points = []
    for feature in obj["features"]:
        lon, lat = feature["geometry"]["coordinates"]
        props = feature["properties"]
        points.append(GeoPoint(name=props["name"], lat=lat, lon=lon,
                               mentions=props["mentions"]))
    return points


_LEAFLET_CSS = "https://unpkg.com/leaflet@1.9.4/dist/leaflet.css"
_LEAFLET_JS = "https://unpkg.com/leaflet@1.9.4/dist/leaflet.js"
_TILES = "https://tile.openstreetmap.org/{z}/{x}/{y}.png"

_HTML_TEMPLATE = """<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>Hijacking incident point map</title>
<link rel="stylesheet" href="%(css)s">
<style>
  body { margin: 0; font-family: sans-serif; }
  #map { height: 100vh; }
  #fallback { padding: 1em; white-space: pre-wrap; word-break: break-all; }
</style>
</head>
<body>
<div id="map"></div>
<p id="note">Marker area scales with the number of relevant posts mentioning
each place. If the map stays blank the raw GeoJSON listing below is the data.</p>
<pre id="geojson">%(geojson)s</pre>
<script src="%(js)s"></script>
<script>
(function () {
  if (typeof L === "undefined") { return; }  // offline: keep the listing
  var raw = document.getElementById("geojson");
  var data = JSON.parse(raw.textContent);
  raw.id = "fallback";
  raw.style.display = "none";
  document.getElementById("note").style.display = "none";
  var map = L.map("map").setView([%(center_lat)s, %(center_lon)s], 11);
  L.tileLayer("%(tiles)s", {maxZoom: 18}).addTo(map);
  L.geoJSON(data, {
    pointToLayer: function (feature, latlng) {
      var mentions = feature.properties.mentions;
      return L.circleMarker(latlng, {
        radius: 6 + 4 * Math.sqrt(mentions),
        color: "#b30000",
        fillOpacity: 0.6
      }).bindPopup(feature.properties.name + ": " + mentions + " mention(s)");
    }
  }).addTo(map);
})();
</script>
</body>
</html>
"""


def emit_html_map(doc: MapDocument) -> bytes:
    """Self-contained HTML point map.

    Embeds the exact emit_geojson bytes in a <pre> block, renders scaled
    circle markers with Leaflet loaded from its CDN, and leaves the raw
    listing visible whenever scripts are unavailable.
    """
    geojson = emit_geojson(doc).decode("utf-8")
    html = _HTML_TEMPLATE % {
        "css": _LEAFLET_CSS,
        "js": _LEAFLET_JS,
        "tiles": _TILES,
        "geojson": geojson,
        "center_lat": repr(doc.center[0]),
        "center_lon": repr(doc.center[1]),
    }
    return html.encode("utf-8")
