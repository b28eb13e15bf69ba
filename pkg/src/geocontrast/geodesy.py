"""Great-circle distances on the spherical Earth model.

All angle math is done in radians with double precision. Distances are
exact Haversine geodesics on a sphere of radius 6,371,000 m; the arcsine
argument is clamped to [0, 1] so floating-point overshoot near antipodal
points can never produce a domain error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

EARTH_RADIUS_M = 6_371_000.0

#: Largest possible great-circle distance (antipodal points), in meters.
MAX_DISTANCE_M = math.pi * EARTH_RADIUS_M

#: Meters per degree of latitude (and of longitude at the equator).
METERS_PER_DEGREE = math.pi / 180.0 * EARTH_RADIUS_M


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in degrees.

    Coordinates are validated on construction: both must be finite,
    latitude in [-90, 90] and longitude in [-180, 180].
    """

    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat_deg) and math.isfinite(self.lon_deg)):
            raise InvalidInputError(
                f"coordinates must be finite, got ({self.lat_deg}, {self.lon_deg})"
            )
        if not -90.0 <= self.lat_deg <= 90.0:
            raise InvalidInputError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise InvalidInputError(f"longitude {self.lon_deg} outside [-180, 180]")

    @property
    def lat_rad(self) -> float:
        return math.radians(self.lat_deg)

    @property
    def lon_rad(self) -> float:
        return math.radians(self.lon_deg)


@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise geodesic distances in meters.

    The matrix is symmetric with an exactly zero diagonal; each unordered
    pair is computed once and mirrored.
    """

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters.

    Evaluates 2 * R * arcsin(sqrt(h)) where h is the haversine of the
    angular separation, clamping h into [0, 1] before the square root.
    """
    dlat = b.lat_rad - a.lat_rad
    dlon = b.lon_rad - a.lon_rad
    h = (
        math.sin(dlat / 2.0) ** 2
        + math.cos(a.lat_rad) * math.cos(b.lat_rad) * math.sin(dlon / 2.0) ** 2
    )
    h = min(1.0, max(0.0, h))
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def distance_matrix(points: Sequence[GeoPoint]) -> DistanceMatrix:
    """All-pairs Haversine distances for a list of points.

    Entry (i, j) equals ``haversine(points[i], points[j])``. The result is
    exactly symmetric: the upper triangle is computed and mirrored.

    Raises:
        InvalidInputError: if ``points`` is empty.
    """
    if len(points) == 0:
        raise InvalidInputError("distance_matrix requires at least one point")
    lat = np.array([p.lat_rad for p in points], dtype=np.float64)
    lon = np.array([p.lon_rad for p in points], dtype=np.float64)
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    h = (
        np.sin(dlat / 2.0) ** 2
        + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2.0) ** 2
    )
    d = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    upper = np.triu(d, k=1)
    return DistanceMatrix(values=upper + upper.T)
