"""Location-as-text featurization.

A sample's location is rendered as an address-style caption, tokenized,
and hashed into a fixed vocabulary; raw coordinates additionally get a
multi-frequency Fourier expansion so the text tower sees position at
resolutions the caption digits alone cannot express.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import InvalidInputError

if TYPE_CHECKING:
    from .data import Sample
    from .geodesy import GeoPoint

CAPTION_TEMPLATE = "Street: {street}, City: {city}, Country: {country}. Lat: {lat:.5f}, Lon: {lon:.5f}."

_TOKEN_RE = re.compile(r"[a-z0-9]+")

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class LocationCaption:
    """Rendered caption text with its token sequence."""

    text: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class LocationFeature:
    """Hashed token indices plus the coordinate Fourier expansion."""

    token_indices: np.ndarray
    fourier: np.ndarray


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase and split into maximal alphanumeric runs."""
    return tuple(_TOKEN_RE.findall(text.lower()))


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def render_caption(sample: "Sample") -> LocationCaption:
    """Render the address caption for a sample and tokenize it."""
    for field in ("street", "city", "country"):
        if not getattr(sample, field):
            raise InvalidInputError(f"sample {sample.id!r} has an empty {field} label")
    text = CAPTION_TEMPLATE.format(
        street=sample.street,
        city=sample.city,
        country=sample.country,
        lat=sample.point.lat_deg,
        lon=sample.point.lon_deg,
    )
    return LocationCaption(text=text, tokens=tokenize(text))


def fourier_features(lat_rad: float, lon_rad: float, n_freqs: int) -> np.ndarray:
    """Multi-frequency coordinate expansion of length 4 * n_freqs.

    Frequency m contributes the block
    [sin(2^m pi lat), cos(2^m pi lat), sin(2^m pi lon), cos(2^m pi lon)]
    with angles in radians; blocks are concatenated in increasing m.
    """
    if n_freqs < 1:
        raise InvalidInputError(f"n_freqs must be >= 1, got {n_freqs}")
    out = np.empty(4 * n_freqs)
    for m in range(n_freqs):
        a_lat = (2.0**m) * math.pi * lat_rad
        a_lon = (2.0**m) * math.pi * lon_rad
        out[4 * m : 4 * m + 4] = (
            math.sin(a_lat),
            math.cos(a_lat),
            math.sin(a_lon),
            math.cos(a_lon),
        )
    return out


def featurize(
    caption: LocationCaption,
    point: "GeoPoint",
    vocab_size: int = 4096,
    n_freqs: int = 6,
) -> LocationFeature:
    """Turn a caption and its coordinates into model-ready inputs.

    Caption tokens hash into [0, vocab_size) via 64-bit FNV-1a; the
    template guarantees at least its fixed words, so the index list is
    never empty. Fourier features consume full-precision radians, so the
    5-decimal caption rounding never limits coordinate resolution.
    """
    if vocab_size < 2:
        raise InvalidInputError(f"vocab_size must be >= 2, got {vocab_size}")
    indices = np.array(
        [fnv1a64(t.encode("utf-8")) % vocab_size for t in caption.tokens],
        dtype=np.int64,
    )
    return LocationFeature(
        token_indices=indices,
        fourier=fourier_features(point.lat_rad, point.lon_rad, n_freqs),
    )


def featurize_sample(
    sample: "Sample", vocab_size: int = 4096, n_freqs: int = 6
) -> LocationFeature:
    """Render, tokenize, and featurize a sample's location in one call."""
    return featurize(render_caption(sample), sample.point, vocab_size, n_freqs)
