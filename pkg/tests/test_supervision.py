"""Spatial soft-label construction: kernel, prior, and normalization."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geocontrast.errors import InvalidInputError
from geocontrast.geodesy import GeoPoint, distance_matrix
from geocontrast.supervision import (
    KernelConfig,
    hierarchical_prior,
    identity_labels,
    local_kernel,
    soft_labels,
)

from conftest import grid_points


def _sample_at(point: GeoPoint, street: str, city: str, ident: str):
    from geocontrast.data import Sample

    return Sample(
        id=ident,
        point=point,
        street=street,
        city=city,
        country="UK",
        region_id=0,
        image_feature=np.zeros(4),
    )


def _line_samples(n: int, step_deg: float = 0.001) -> list:
    pts = grid_points(n, step_deg)
    return [
        _sample_at(p, street=f"s{i}", city="c0", ident=f"id{i}")
        for i, p in enumerate(pts)
    ]


def test_kernel_diagonal_is_one():
    d = distance_matrix(grid_points(5))
    k = local_kernel(d, KernelConfig())
    assert np.all(np.diag(k) == 1.0)


def test_kernel_zero_at_and_beyond_cutoff():
    # 0.01 deg of latitude is ~1112 m, past the default 1000 m cutoff.
    d = distance_matrix(grid_points(3, step_deg=0.01))
    k = local_kernel(d, KernelConfig())
    assert k[0, 1] == 0.0
    assert k[0, 2] == 0.0
    assert k[0, 0] == 1.0


def test_kernel_cutoff_is_strict_at_the_boundary():
    d = distance_matrix(grid_points(2, step_deg=0.001))
    boundary = float(d.values[0, 1])
    at = local_kernel(d, KernelConfig(sigma=150.0, d_cut=boundary))
    below = local_kernel(d, KernelConfig(sigma=150.0, d_cut=boundary + 1e-6))
    assert at[0, 1] == 0.0  # d == d_cut excluded
    assert below[0, 1] > 0.0


def test_kernel_monotone_decay():
    d = distance_matrix(grid_points(8, step_deg=0.001))
    k = local_kernel(d, KernelConfig(sigma=300.0, d_cut=10_000.0))
    row = k[0]
    assert np.all(np.diff(row) < 0)  # strictly farther, strictly smaller


def test_prior_levels():
    cfg = KernelConfig(alpha_street=0.5, beta_city=0.25)
    pts = grid_points(4)
    samples = [
        _sample_at(pts[0], "high st", "alpha", "a0"),
        _sample_at(pts[1], "high st", "alpha", "a1"),  # same street, same city
        _sample_at(pts[2], "low rd", "alpha", "a2"),  # same city only
        _sample_at(pts[3], "high st", "beta", "b0"),  # unrelated city
    ]
    p = hierarchical_prior(samples, cfg)
    assert p[0, 0] == 1.75
    assert p[0, 1] == 1.75
    assert p[0, 2] == 1.25
    assert p[0, 3] == 1.0  # street name matches but city differs


def test_prior_requires_labels():
    s = _sample_at(GeoPoint(51.0, -1.0), street="", city="c", ident="x")
    with pytest.raises(InvalidInputError):
        hierarchical_prior([s], KernelConfig())


def test_soft_labels_frozen_row():
    # Two points sigma apart, third past the cutoff:
    # row 0 of kernel*prior is [1, exp(-1/2), 0] with the prior disabled,
    # normalizing to the frozen values below.
    cfg = KernelConfig(sigma=150.0, d_cut=1000.0, alpha_street=0.0, beta_city=0.0)
    step = 150.0 / 111_194.92664455874  # 150 m in degrees of latitude
    samples = [
        _sample_at(GeoPoint(51.0 + i * step * f, -1.0), f"s{i}", f"c{i}", f"i{i}")
        for i, f in ((0, 0.0), (1, 1.0), (2, 60.0))
    ]
    d = distance_matrix([s.point for s in samples])
    w = soft_labels(d, samples, cfg).values
    assert w[0] == pytest.approx([0.62245933, 0.37754067, 0.0], abs=1e-7)
    assert w[0, 2] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=10**6))
def test_soft_label_rows_sum_to_one(n, seed):
    rng = np.random.default_rng(seed)
    pts = [
        GeoPoint(51.0 + float(x), -1.0 + float(y))
        for x, y in rng.uniform(0, 0.05, size=(n, 2))
    ]
    samples = [
        _sample_at(p, f"s{i % 3}", f"c{i % 2}", f"i{i}") for i, p in enumerate(pts)
    ]
    w = soft_labels(distance_matrix(pts), samples, KernelConfig()).values
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(w >= 0.0)


def test_cutoff_below_min_distance_degenerates_to_identity():
    samples = _line_samples(6, step_deg=0.001)  # neighbors ~111 m apart
    d = distance_matrix([s.point for s in samples])
    cfg = KernelConfig(sigma=150.0, d_cut=50.0)  # below every off-diagonal distance
    w = soft_labels(d, samples, cfg).values
    assert np.array_equal(w, np.eye(6))


def test_identity_labels():
    w = identity_labels(4).values
    assert np.array_equal(w, np.eye(4))
    with pytest.raises(InvalidInputError):
        identity_labels(0)


def test_soft_labels_shape_mismatch_rejected():
    samples = _line_samples(3)
    d = distance_matrix([s.point for s in samples[:2]])
    with pytest.raises(InvalidInputError):
        soft_labels(d, samples, KernelConfig())


def test_kernel_config_validation():
    with pytest.raises(InvalidInputError):
        KernelConfig(sigma=0.0)
    with pytest.raises(InvalidInputError):
        KernelConfig(d_cut=-1.0)
    with pytest.raises(InvalidInputError):
        KernelConfig(alpha_street=-0.1)
    with pytest.raises(InvalidInputError):
        KernelConfig(beta_city=-0.5)
