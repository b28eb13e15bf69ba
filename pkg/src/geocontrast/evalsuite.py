"""Retrieval evaluation and spatial-structure diagnostics.

Geo-localization is scored as cross-modal retrieval: every test image
queries the gallery of the split's location texts. Alongside recall and
geolocation error, three structure metrics probe whether the embedding
space respects geography: rank agreement between similarity and
proximity, a neighbor-vs-far cosine contrast, and nearest-neighbor city
purity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .data import Sample
from .errors import InvalidInputError
from .geodesy import DistanceMatrix, GeoPoint, distance_matrix, haversine
from .locfeat import featurize_sample
from .model import EncoderParams, forward

DEFAULT_KS = (1, 5, 10)
DEFAULT_D_NBR_M = 1000.0


@dataclass(frozen=True)
class EvalReport:
    """One model's metrics on one split.

    median_ge_m uses the lower-median convention for even counts. ssi is
    None when the split has no pair on one side of the neighbor radius,
    which distinguishes "undefined" from a true zero contrast.
    """

    median_ge_m: float
    mean_ge_m: float
    recall_at: dict[int, float]
    geo_align: float
    ssi: float | None
    city_align: float
    n_queries: int

    def to_dict(self) -> dict:
        d = {
            "med_ge_m": self.median_ge_m,
            "mean_ge_m": self.mean_ge_m,
            "geo_align": self.geo_align,
            "ssi": self.ssi,
            "city_align": self.city_align,
            "n_queries": self.n_queries,
        }
        for k in sorted(self.recall_at):
            d[f"r_at_{k}"] = self.recall_at[k]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        recall_at = {
            int(key[len("r_at_") :]): float(val)
            for key, val in d.items()
            if key.startswith("r_at_")
        }
        if not recall_at:
            raise InvalidInputError("report has no r_at_K entries")
        return cls(
            median_ge_m=float(d["med_ge_m"]),
            mean_ge_m=float(d["mean_ge_m"]),
            recall_at=recall_at,
            geo_align=float(d["geo_align"]),
            ssi=None if d["ssi"] is None else float(d["ssi"]),
            city_align=float(d["city_align"]),
            n_queries=int(d["n_queries"]),
        )


def save_report(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_report(path: str) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return EvalReport.from_dict(json.load(fh))


def retrieve(
    queries: np.ndarray, gallery: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Top-k gallery indices per query by dot product, descending.

    Ties break toward the lower gallery index. Returns (indices, scores),
    both (n_queries, k).
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    gallery = np.atleast_2d(np.asarray(gallery, dtype=np.float64))
    if queries.shape[1] != gallery.shape[1]:
        raise InvalidInputError(
            f"query dim {queries.shape[1]} != gallery dim {gallery.shape[1]}"
        )
    if not 1 <= k <= gallery.shape[0]:
        raise InvalidInputError(
            f"k must lie in [1, {gallery.shape[0]}], got {k}"
        )
    scores = queries @ gallery.T
    # Stable sort on negated scores: equal scores keep ascending index.
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(scores, order, axis=1)


def geolocation_error(
    top1: np.ndarray,
    gallery_points: list[GeoPoint],
    true_points: list[GeoPoint],
) -> tuple[float, float, np.ndarray]:
    """Great-circle error between each retrieved location and the truth.

    Returns (lower median, mean, per-query errors in meters).
    """
    top1 = np.asarray(top1, dtype=np.int64).reshape(-1)
    if top1.size != len(true_points):
        raise InvalidInputError(
            f"{top1.size} retrievals vs {len(true_points)} queries"
        )
    errors = np.array(
        [haversine(gallery_points[j], p) for j, p in zip(top1, true_points)]
    )
    median = float(np.sort(errors)[(errors.size - 1) // 2])
    return median, float(errors.mean()), errors


def recall_at_k(topk: np.ndarray, true_index: np.ndarray, k: int) -> float:
    """Fraction of queries whose true gallery index appears in the top k."""
    topk = np.asarray(topk)
    if not 1 <= k <= topk.shape[1]:
        raise InvalidInputError(f"k must lie in [1, {topk.shape[1]}], got {k}")
    true_index = np.asarray(true_index).reshape(-1, 1)
    return float(np.mean(np.any(topk[:, :k] == true_index, axis=1)))


def geo_align(sims: np.ndarray, d: DistanceMatrix) -> float:
    """Mean per-query Spearman correlation of similarity vs proximity.

    For each query i, rank-correlates {sim[i, j]}_j against {-d_ij}_j
    over j != i and averages over queries. A query whose similarities or
    distances are all tied carries no rank information and contributes 0.
    """
    sims = np.asarray(sims, dtype=np.float64)
    n = d.n
    if sims.shape != (n, n):
        raise InvalidInputError(
            f"similarity shape {sims.shape} does not match {n} points"
        )
    if n < 3:
        raise InvalidInputError(f"geo_align needs >= 3 gallery items, got {n}")
    rhos = np.empty(n)
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        rho = spearmanr(sims[i, mask[i]], -d.values[i, mask[i]]).statistic
        rhos[i] = rho if np.isfinite(rho) else 0.0
    return float(rhos.mean())


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / (norms + 1e-12)


def ssi(
    embeddings: np.ndarray, d: DistanceMatrix, d_nbr: float = DEFAULT_D_NBR_M
) -> float | None:
    """Spatial smoothness: near-pair minus far-pair mean cosine similarity.

    Unordered pairs with d_ij < d_nbr are "near", the rest "far"; the
    contrast of their mean cosines is clipped to [0, 1]. Returns None
    when either side of the partition is empty.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.shape[0] != d.n:
        raise InvalidInputError(
            f"{embeddings.shape[0]} embeddings vs {d.n} distance rows"
        )
    if d_nbr <= 0:
        raise InvalidInputError(f"d_nbr must be > 0, got {d_nbr}")
    iu = np.triu_indices(d.n, k=1)
    near = d.values[iu] < d_nbr
    if not near.any() or near.all():
        return None
    cos = (_unit_rows(embeddings) @ _unit_rows(embeddings).T)[iu]
    contrast = cos[near].mean() - cos[~near].mean()
    return float(np.clip(contrast, 0.0, 1.0))


def city_align(embeddings: np.ndarray, cities: list[str]) -> float:
    """Fraction of samples whose nearest image neighbor shares their city.

    Neighbors are ranked by cosine similarity excluding self; ties break
    toward the lower index.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n = embeddings.shape[0]
    if n != len(cities):
        raise InvalidInputError(f"{n} embeddings vs {len(cities)} city labels")
    if n < 2:
        raise InvalidInputError("city_align needs at least 2 samples")
    unit = _unit_rows(embeddings)
    sims = unit @ unit.T
    np.fill_diagonal(sims, -np.inf)
    nn = sims.argmax(axis=1)  # argmax returns the first (lowest) maximizer
    return float(np.mean([cities[i] == cities[j] for i, j in enumerate(nn)]))


def evaluate(
    params: EncoderParams,
    samples: list[Sample],
    ks: tuple[int, ...] = DEFAULT_KS,
    d_nbr: float = DEFAULT_D_NBR_M,
) -> tuple[EvalReport, np.ndarray]:
    """Score a model on a split; gallery = the split's own location texts.

    Returns the report plus per-query geolocation errors (meters, query
    order). Recall is computed for every requested K that fits the
    gallery.
    """
    if len(samples) < 3:
        raise InvalidInputError("evaluation needs at least 3 samples")
    d_img = samples[0].image_feature.size
    if d_img != params.d_img:
        raise InvalidInputError(
            f"dataset feature dim {d_img} != model d_img {params.d_img}"
        )
    images = np.stack([s.image_feature for s in samples]).astype(np.float64)
    loc_feats = [
        featurize_sample(s, vocab_size=params.vocab_size, n_freqs=params.n_freqs)
        for s in samples
    ]
    emb, _ = forward(params, images, loc_feats)

    n = len(samples)
    usable_ks = sorted(k for k in set(ks) if 1 <= k <= n)
    if not usable_ks:
        raise InvalidInputError(f"no requested K in {ks} fits gallery size {n}")
    k_max = usable_ks[-1]
    topk, _ = retrieve(emb.V, emb.T, k_max)
    points = [s.point for s in samples]
    median, mean, errors = geolocation_error(topk[:, 0], points, points)
    true_index = np.arange(n)
    recall = {k: recall_at_k(topk, true_index, k) for k in usable_ks}

    d = distance_matrix(points)
    sims = emb.V @ emb.T.T
    report = EvalReport(
        median_ge_m=median,
        mean_ge_m=mean,
        recall_at=recall,
        geo_align=geo_align(sims, d),
        ssi=ssi(emb.V, d, d_nbr),
        city_align=city_align(emb.V, [s.city for s in samples]),
        n_queries=n,
    )
    return report, errors
