"""Geodesic distances checked against analytic values and a 50-digit oracle."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geocontrast.errors import InvalidInputError
from geocontrast.geodesy import (
    EARTH_RADIUS_M,
    MAX_DISTANCE_M,
    GeoPoint,
    distance_matrix,
    haversine,
)

from _oracles import law_of_cosines_distance

# Frozen reference values, computed once at 50 decimal digits and pasted in.
QUARTER_CIRCLE_M = 10_007_543.398010286  # R * pi / 2
ANTIPODAL_M = 20_015_086.79602057  # R * pi
GLASGOW_LONDON_M = 555_150.6595745089  # law-of-cosines oracle
MILLIDEG_LAT_M = 111.19492664455874  # 0.001 degrees along a meridian

lats = st.floats(min_value=-90.0, max_value=90.0)
lons = st.floats(min_value=-180.0, max_value=180.0)


def test_quarter_circle():
    assert haversine(GeoPoint(0.0, 0.0), GeoPoint(90.0, 0.0)) == pytest.approx(
        QUARTER_CIRCLE_M, abs=1e-6
    )


def test_antipodal_is_half_circumference():
    d = haversine(GeoPoint(0.0, 0.0), GeoPoint(0.0, 180.0))
    assert d == pytest.approx(ANTIPODAL_M, abs=1e-6)
    assert d == pytest.approx(MAX_DISTANCE_M, abs=1e-6)


def test_city_pair_matches_frozen_oracle():
    glasgow = GeoPoint(55.8642, -4.2518)
    london = GeoPoint(51.5074, -0.1278)
    assert haversine(glasgow, london) == pytest.approx(GLASGOW_LONDON_M, abs=1e-3)


def test_short_meridian_arc():
    d = haversine(GeoPoint(0.0, 0.0), GeoPoint(0.001, 0.0))
    assert d == pytest.approx(MILLIDEG_LAT_M, abs=1e-6)


def test_identical_points_are_zero():
    p = GeoPoint(54.0, -2.0)
    assert haversine(p, p) == 0.0


def test_near_antipodal_clamp_never_domain_errors():
    # Without the [0, 1] clamp these arguments can overshoot sqrt's domain.
    d = haversine(GeoPoint(1e-7, 0.0), GeoPoint(-1e-7, 180.0))
    assert math.isfinite(d)
    assert d <= MAX_DISTANCE_M


@given(lats, lons, lats, lons)
def test_symmetry_and_range(lat1, lon1, lat2, lon2):
    a, b = GeoPoint(lat1, lon1), GeoPoint(lat2, lon2)
    d_ab, d_ba = haversine(a, b), haversine(b, a)
    assert d_ab == d_ba
    assert 0.0 <= d_ab <= MAX_DISTANCE_M


@given(lats, lons)
def test_oracle_agreement_random_points(lat, lon):
    a = GeoPoint(lat, lon)
    b = GeoPoint(54.5, -3.25)
    assert haversine(a, b) == pytest.approx(law_of_cosines_distance(a, b), abs=1e-3)


def test_point_validation():
    with pytest.raises(InvalidInputError):
        GeoPoint(90.5, 0.0)
    with pytest.raises(InvalidInputError):
        GeoPoint(0.0, -180.5)
    with pytest.raises(InvalidInputError):
        GeoPoint(float("nan"), 0.0)
    with pytest.raises(InvalidInputError):
        GeoPoint(0.0, float("inf"))


def test_matrix_matches_pairwise_calls():
    pts = [
        GeoPoint(51.5, -0.1),
        GeoPoint(55.9, -4.3),
        GeoPoint(52.5, 13.4),
        GeoPoint(48.9, 2.3),
    ]
    d = distance_matrix(pts).values
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            assert d[i, j] == pytest.approx(haversine(a, b), abs=1e-6)


def test_matrix_exactly_symmetric_zero_diagonal(rng):
    pts = [
        GeoPoint(float(lat), float(lon))
        for lat, lon in zip(
            rng.uniform(-90, 90, size=40), rng.uniform(-180, 180, size=40)
        )
    ]
    d = distance_matrix(pts).values
    assert np.array_equal(d, d.T)  # bitwise, not approximate
    assert np.all(np.diag(d) == 0.0)


def test_matrix_rejects_empty():
    with pytest.raises(InvalidInputError):
        distance_matrix([])
