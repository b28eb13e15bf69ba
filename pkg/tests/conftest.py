from __future__ import annotations

import numpy as np
import pytest

from geocontrast.data import Sample, WorldConfig, generate_world
from geocontrast.geodesy import GeoPoint
from geocontrast.locfeat import LocationFeature, featurize_sample
from geocontrast.model import EncoderParams, init_params


@pytest.fixture(scope="session")
def tiny_world() -> list[Sample]:
    """36 samples, 3 cities; small enough for per-test training loops."""
    cfg = WorldConfig(
        n_cities=3,
        streets_per_city=3,
        samples_per_street=4,
        city_spread_m=2000.0,
        street_spread_m=60.0,
        feature_dim=24,
        signal_dim=12,
        noise_sigma=0.2,
        seed=11,
    )
    return generate_world(cfg)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture()
def small_params() -> EncoderParams:
    return init_params(
        seed=5, d_img=6, hidden_dim=8, embed_dim=5, vocab_size=30, n_freqs=2
    )


def random_batch(
    params: EncoderParams, n: int, seed: int
) -> tuple[np.ndarray, list[LocationFeature]]:
    """Random image features plus synthetic location features sized for params."""
    gen = np.random.default_rng(seed)
    image_feats = gen.normal(size=(n, params.d_img))
    locs = []
    for _ in range(n):
        n_tok = int(gen.integers(3, 9))
        locs.append(
            LocationFeature(
                token_indices=gen.integers(
                    0, params.vocab_size, size=n_tok
                ).astype(np.int64),
                fourier=gen.normal(size=4 * params.n_freqs),
            )
        )
    return image_feats, locs


def grid_points(n: int, step_deg: float = 0.01) -> list[GeoPoint]:
    """Deterministic line of points marching north from a fixed origin."""
    return [GeoPoint(51.0 + step_deg * i, -1.0) for i in range(n)]
