"""Synthetic geo-world generation and the persisted dataset format.

The generator lays out a configurable number of cities inside a UK-like
bounding box, scatters street centers around each city, and jitters
samples around each street. Image features are a seeded multiscale
random-Fourier map of position plus Gaussian noise, padded with
pure-noise dimensions, so encoders have to learn feature selection.

Datasets persist as line-delimited JSON, one sample per line, with the
rendered location caption stored alongside each record for inspection.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DatasetFormatError, InvalidInputError
from .geodesy import EARTH_RADIUS_M, METERS_PER_DEGREE, GeoPoint

logger = logging.getLogger(__name__)

LAT_MIN, LAT_MAX = 50.0, 58.0
LON_MIN, LON_MAX = -6.0, 2.0

#: Longitude compression at the middle latitude of the bounding box.
_LON_SHRINK = math.cos(math.radians(0.5 * (LAT_MIN + LAT_MAX)))


@dataclass(frozen=True, eq=False)
class Sample:
    """One geo-tagged observation."""

    id: str
    point: GeoPoint
    street: str
    city: str
    country: str
    region_id: int
    image_feature: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.id == other.id
            and self.point == other.point
            and self.street == other.street
            and self.city == other.city
            and self.country == other.country
            and self.region_id == other.region_id
            and np.array_equal(self.image_feature, other.image_feature)
        )


@dataclass(frozen=True)
class WorldConfig:
    """Layout and feature parameters of the synthetic geo-world."""

    n_cities: int = 8
    streets_per_city: int = 50
    samples_per_street: int = 2
    city_spread_m: float = 2000.0
    street_spread_m: float = 150.0
    feature_dim: int = 64
    signal_dim: int = 32
    noise_sigma: float = 0.25
    seed: int = 7

    def validate(self) -> None:
        if min(self.n_cities, self.streets_per_city, self.samples_per_street) < 1:
            raise InvalidInputError("all world counts must be >= 1")
        if self.city_spread_m <= 0 or self.street_spread_m <= 0:
            raise InvalidInputError("spreads must be > 0")
        if self.feature_dim < 1 or self.signal_dim < 1:
            raise InvalidInputError("feature dims must be >= 1")
        if self.signal_dim > self.feature_dim:
            raise InvalidInputError("signal_dim must not exceed feature_dim")
        if self.noise_sigma < 0:
            raise InvalidInputError("noise_sigma must be >= 0")


#: Spatial lengthscales (meters) of the smooth feature map, coarsest first.
#: Each entry owns an equal block of signal dims, so repeating a scale
#: weights it. Most variance sits at street scale (300/150 m): coarse
#: structure is present but faint, so recovering geography is a feature
#: selection problem rather than a property of raw feature distance.
FEATURE_MAP_SCALES_M = (
    500_000.0, 500_000.0, 20_000.0,
    600.0, 600.0,
    300.0, 300.0, 300.0, 300.0, 300.0, 300.0,
    150.0, 150.0, 150.0, 150.0, 150.0,
)


def build_feature_map(
    rng: np.random.Generator, signal_dim: int
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Draw a seeded smooth map from coordinates to `signal_dim` features.

    The map is a random Fourier expansion: each output dimension is
    sqrt(2) * cos(w . u + b) with w drawn at one of the lengthscales in
    FEATURE_MAP_SCALES_M, so each dimension has unit variance and the map
    is deterministic given the generator state.
    """
    blocks = np.array_split(np.arange(signal_dim), len(FEATURE_MAP_SCALES_M))
    omegas = np.zeros((signal_dim, 2))
    for block, scale_m in zip(blocks, FEATURE_MAP_SCALES_M):
        scale_rad = scale_m / EARTH_RADIUS_M
        omegas[block] = rng.normal(0.0, 1.0 / scale_rad, size=(len(block), 2))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=signal_dim)

    def smooth_map(lat_deg: np.ndarray, lon_deg: np.ndarray) -> np.ndarray:
        # Project onto a locally isometric plane so lengthscales are metric.
        u = np.stack(
            [np.radians(lat_deg), np.radians(lon_deg) * _LON_SHRINK], axis=-1
        )
        return math.sqrt(2.0) * np.cos(u @ omegas.T + phases)

    return smooth_map


def _meters_to_deg(lat_m: float, lon_m: float, at_lat_deg: float) -> tuple[float, float]:
    return (
        lat_m / METERS_PER_DEGREE,
        lon_m / (METERS_PER_DEGREE * math.cos(math.radians(at_lat_deg))),
    )


def generate_world(cfg: WorldConfig) -> list[Sample]:
    """Generate the seeded synthetic geo-world described by ``cfg``.

    Region ids equal city indices. All coordinates are clipped into the
    bounding box, and the output is fully determined by ``cfg``.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    smooth_map = build_feature_map(rng, cfg.signal_dim)

    # Keep city centers away from the box edge so jitter rarely clips.
    margin_lat = (3 * cfg.city_spread_m + 5 * cfg.street_spread_m) / METERS_PER_DEGREE
    margin_lon = margin_lat / _LON_SHRINK

    samples: list[Sample] = []
    k = 0
    for ci in range(cfg.n_cities):
        city_lat = rng.uniform(LAT_MIN + margin_lat, LAT_MAX - margin_lat)
        city_lon = rng.uniform(LON_MIN + margin_lon, LON_MAX - margin_lon)
        city_name = f"city{ci:02d}"
        for sj in range(cfg.streets_per_city):
            dlat, dlon = _meters_to_deg(
                rng.normal(0.0, cfg.city_spread_m),
                rng.normal(0.0, cfg.city_spread_m),
                city_lat,
            )
            street_lat, street_lon = city_lat + dlat, city_lon + dlon
            street_name = f"st{ci:02d}x{sj:02d}"
            for _ in range(cfg.samples_per_street):
                jlat, jlon = _meters_to_deg(
                    rng.normal(0.0, cfg.street_spread_m),
                    rng.normal(0.0, cfg.street_spread_m),
                    street_lat,
                )
                lat = float(np.clip(street_lat + jlat, LAT_MIN, LAT_MAX))
                lon = float(np.clip(street_lon + jlon, LON_MIN, LON_MAX))
                signal = smooth_map(np.array([lat]), np.array([lon]))[0]
                feature = np.zeros(cfg.feature_dim)
                feature[: cfg.signal_dim] = signal
                feature += rng.normal(0.0, cfg.noise_sigma, size=cfg.feature_dim)
                samples.append(
                    Sample(
                        id=f"s{k:05d}",
                        point=GeoPoint(lat, lon),
                        street=street_name,
                        city=city_name,
                        country="UK",
                        region_id=ci,
                        image_feature=feature,
                    )
                )
                k += 1
    return samples


def save_dataset(samples: list[Sample], path: str) -> None:
    """Write samples as line-delimited JSON records.

    Coordinates and features keep full double precision (shortest
    round-trip float rendering). The rendered location caption is stored
    with each record for inspection; it is derived data and ignored on
    load.

    Raises:
        InvalidInputError: on duplicate ids or an empty sample list.
    """
    from .locfeat import render_caption

    if not samples:
        raise InvalidInputError("refusing to save an empty dataset")
    seen: set[str] = set()
    for s in samples:
        if s.id in seen:
            raise InvalidInputError(f"duplicate sample id {s.id!r}")
        seen.add(s.id)
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            record = {
                "id": s.id,
                "lat": s.point.lat_deg,
                "lon": s.point.lon_deg,
                "street": s.street,
                "city": s.city,
                "country": s.country,
                "region_id": s.region_id,
                "image_feature": [float(x) for x in s.image_feature],
                "caption": render_caption(s).text,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


_REQUIRED_FIELDS = {
    "id": str,
    "lat": (int, float),
    "lon": (int, float),
    "street": str,
    "city": str,
    "country": str,
    "region_id": int,
    "image_feature": list,
}


def _parse_record(raw: dict, path: str, lineno: int) -> Sample:
    for field, typ in _REQUIRED_FIELDS.items():
        if field not in raw:
            raise DatasetFormatError(f"{path}:{lineno}: missing field {field!r}")
        if not isinstance(raw[field], typ) or isinstance(raw[field], bool):
            raise DatasetFormatError(
                f"{path}:{lineno}: field {field!r} has wrong type"
            )
    try:
        point = GeoPoint(float(raw["lat"]), float(raw["lon"]))
    except InvalidInputError as e:
        raise DatasetFormatError(f"{path}:{lineno}: field 'lat'/'lon': {e}") from e
    feature = np.asarray(raw["image_feature"], dtype=np.float64)
    if feature.ndim != 1 or feature.size == 0:
        raise DatasetFormatError(
            f"{path}:{lineno}: field 'image_feature' must be a non-empty flat array"
        )
    if not np.all(np.isfinite(feature)):
        raise DatasetFormatError(
            f"{path}:{lineno}: field 'image_feature' contains non-finite values"
        )
    if raw["region_id"] < 0:
        raise DatasetFormatError(f"{path}:{lineno}: field 'region_id' must be >= 0")
    for field in ("street", "city", "country"):
        if not raw[field]:
            raise DatasetFormatError(f"{path}:{lineno}: field {field!r} is empty")
    return Sample(
        id=raw["id"],
        point=point,
        street=raw["street"],
        city=raw["city"],
        country=raw["country"],
        region_id=raw["region_id"],
        image_feature=feature,
    )


def load_dataset(path: str) -> list[Sample]:
    """Load a line-delimited dataset file, validating every record.

    Raises:
        DatasetFormatError: naming the offending line and field, or on
            duplicate ids, inconsistent feature lengths, or an empty file.
    """
    samples: list[Sample] = []
    seen: set[str] = set()
    feature_len: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"{path}:{lineno}: invalid JSON: {e}") from e
            if not isinstance(raw, dict):
                raise DatasetFormatError(f"{path}:{lineno}: record is not an object")
            sample = _parse_record(raw, path, lineno)
            if sample.id in seen:
                raise DatasetFormatError(
                    f"{path}:{lineno}: field 'id': duplicate id {sample.id!r}"
                )
            seen.add(sample.id)
            if feature_len is None:
                feature_len = sample.image_feature.size
            elif sample.image_feature.size != feature_len:
                raise DatasetFormatError(
                    f"{path}:{lineno}: field 'image_feature': length "
                    f"{sample.image_feature.size} != {feature_len}"
                )
            samples.append(sample)
    if not samples:
        raise DatasetFormatError(f"{path}: empty dataset")
    return samples


def split(
    samples: list[Sample], train_frac: float, seed: int
) -> tuple[list[Sample], list[Sample]]:
    """Seeded train/test split, stratified by city.

    Every city contributes to both splits whenever it has at least two
    samples; single-sample cities go to train and are logged. Within a
    city, test picks are dealt round-robin across streets so the test
    side covers as many distinct streets as possible instead of
    clustering several picks on one street. The two splits are disjoint
    and their union is the input dataset.
    """
    if not 0.0 < train_frac < 1.0:
        raise InvalidInputError(f"train_frac {train_frac} outside (0, 1)")
    if not samples:
        raise InvalidInputError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    by_city: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_city.setdefault(s.city, []).append(i)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for city in sorted(by_city):
        idx = by_city[city]
        if len(idx) == 1:
            logger.info("city %s has a single sample; assigned to train", city)
            train_idx.extend(idx)
            continue
        n_train = int(round(train_frac * len(idx)))
        n_train = min(max(n_train, 1), len(idx) - 1)
        n_test = len(idx) - n_train

        by_street: dict[str, list[int]] = {}
        for i in idx:
            by_street.setdefault(samples[i].street, []).append(i)
        streets = sorted(by_street)
        rng.shuffle(streets)
        queues = []
        for street in streets:
            q = np.array(by_street[street])
            rng.shuffle(q)
            queues.append(list(q))
        picks: list[int] = []
        while len(picks) < n_test:
            for q in queues:
                if q and len(picks) < n_test:
                    picks.append(int(q.pop()))
            queues = [q for q in queues if q]
        picked = set(picks)
        test_idx.extend(picks)
        train_idx.extend(i for i in idx if i not in picked)
    train_idx.sort()
    test_idx.sort()
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]
