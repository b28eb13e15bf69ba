"""Two-tower encoder with exact hand-written gradients.

The image tower maps precomputed image features through a two-layer tanh
MLP; the location tower averages learned token embeddings of the address
caption, concatenates the coordinate Fourier expansion, and runs its own
two-layer tanh MLP. Both outputs are L2-normalized and compared by
temperature-scaled dot products.

Everything is plain numpy. backward() consumes the cache produced by
forward() and returns gradients for every parameter, including the
embedding table and the log inverse temperature.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import Any

import numpy as np

from .errors import ContractViolationError, InvalidInputError
from .locfeat import LocationFeature

TOKEN_EMBED_DIM = 32

#: Initial log inverse temperature, i.e. log(1 / 0.07).
LOG_INV_TAU_INIT = math.log(1.0 / 0.07)

#: Allowed range of exp(log_inv_tau); training clamps back into it.
TAU_SCALE_MIN = 1.0
TAU_SCALE_MAX = 100.0

_NORM_EPS = 1e-12


@dataclass
class EncoderParams:
    """All trainable arrays of both towers.

    Arrays are updated in place by the optimizer; log_inv_tau is a 0-d
    array for the same reason.
    """

    img_w1: np.ndarray
    img_b1: np.ndarray
    img_w2: np.ndarray
    img_b2: np.ndarray
    loc_embed: np.ndarray
    loc_w1: np.ndarray
    loc_b1: np.ndarray
    loc_w2: np.ndarray
    loc_b2: np.ndarray
    log_inv_tau: np.ndarray

    @property
    def d_img(self) -> int:
        return self.img_w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.img_w1.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.img_w2.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.loc_embed.shape[0]

    @property
    def n_freqs(self) -> int:
        return (self.loc_w1.shape[0] - TOKEN_EMBED_DIM) // 4

    def as_dict(self) -> dict[str, np.ndarray]:
        """Name-to-array view of the live parameter arrays (no copies)."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "EncoderParams":
        return EncoderParams(**{k: v.copy() for k, v in self.as_dict().items()})


PARAM_NAMES = tuple(f.name for f in fields(EncoderParams))

#: Parameters excluded from weight decay: biases, the embedding table,
#: and the temperature.
NO_DECAY = frozenset(
    {"img_b1", "img_b2", "loc_b1", "loc_b2", "loc_embed", "log_inv_tau"}
)


def init_params(
    seed: int,
    d_img: int,
    hidden_dim: int = 64,
    embed_dim: int = 32,
    vocab_size: int = 4096,
    n_freqs: int = 6,
) -> EncoderParams:
    """Seeded initialization.

    Weight matrices draw uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases
    start at zero, token embeddings at N(0, 0.02), and the temperature at
    log(1/0.07).
    """
    if min(d_img, hidden_dim, embed_dim) < 1:
        raise InvalidInputError("all encoder dims must be >= 1")
    if vocab_size < 2:
        raise InvalidInputError(f"vocab_size must be >= 2, got {vocab_size}")
    if n_freqs < 1:
        raise InvalidInputError(f"n_freqs must be >= 1, got {n_freqs}")
    rng = np.random.default_rng(seed)
    d_loc = TOKEN_EMBED_DIM + 4 * n_freqs

    def w(fan_in: int, fan_out: int) -> np.ndarray:
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return EncoderParams(
        img_w1=w(d_img, hidden_dim),
        img_b1=np.zeros(hidden_dim),
        img_w2=w(hidden_dim, embed_dim),
        img_b2=np.zeros(embed_dim),
        loc_embed=rng.normal(0.0, 0.02, size=(vocab_size, TOKEN_EMBED_DIM)),
        loc_w1=w(d_loc, hidden_dim),
        loc_b1=np.zeros(hidden_dim),
        loc_w2=w(hidden_dim, embed_dim),
        loc_b2=np.zeros(embed_dim),
        log_inv_tau=np.array(LOG_INV_TAU_INIT),
    )


def _normalize_rows(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return v / (norms + _NORM_EPS), norms


def _normalize_rows_backward(
    du: np.ndarray, v: np.ndarray, norms: np.ndarray
) -> np.ndarray:
    # d/dv [v / (n + eps)] = I/(n+eps) - v v^T / (n (n+eps)^2); at n = 0
    # the map is v/eps, so the Jacobian degenerates to I/eps.
    dot = np.sum(du * v, axis=1, keepdims=True)
    safe_n = np.where(norms == 0.0, 1.0, norms)
    correction = v * dot / (safe_n * (norms + _NORM_EPS) ** 2)
    return np.where(norms == 0.0, du / _NORM_EPS, du / (norms + _NORM_EPS) - correction)


@dataclass(frozen=True)
class EmbeddingBatch:
    """Unit-norm embeddings of one batch: V image rows, T location rows."""

    V: np.ndarray
    T: np.ndarray


@dataclass
class ForwardCache:
    """Intermediates from one forward pass, consumed by backward()."""

    params: EncoderParams
    image_feats: np.ndarray
    loc_feats: list[LocationFeature]
    loc_inputs: np.ndarray
    img_h: np.ndarray
    loc_h: np.ndarray
    img_pre: np.ndarray
    loc_pre: np.ndarray
    img_norms: np.ndarray
    loc_norms: np.ndarray
    image_emb: np.ndarray
    loc_emb: np.ndarray


def forward(
    params: EncoderParams,
    image_feats: np.ndarray,
    loc_feats: list[LocationFeature],
) -> tuple[EmbeddingBatch, ForwardCache]:
    """Encode a batch through both towers.

    image_feats is (B, d_img); loc_feats holds B featurized locations.
    Returns unit-norm embeddings plus the activation cache backward()
    consumes.
    """
    image_feats = np.asarray(image_feats, dtype=np.float64)
    if image_feats.ndim != 2:
        raise InvalidInputError(
            f"image_feats must be 2-d, got shape {image_feats.shape}"
        )
    if image_feats.shape[0] != len(loc_feats):
        raise InvalidInputError(
            f"{image_feats.shape[0]} image rows vs {len(loc_feats)} locations"
        )
    if image_feats.shape[0] == 0:
        raise InvalidInputError("cannot encode an empty batch")
    if image_feats.shape[1] != params.d_img:
        raise InvalidInputError(
            f"image_feats dim {image_feats.shape[1]} != model d_img {params.d_img}"
        )
    if not np.all(np.isfinite(image_feats)):
        raise InvalidInputError("image_feats contains non-finite values")

    d_loc = TOKEN_EMBED_DIM + 4 * params.n_freqs
    loc_inputs = np.empty((len(loc_feats), d_loc))
    for i, lf in enumerate(loc_feats):
        if lf.token_indices.size == 0:
            raise InvalidInputError(f"location {i} has no tokens")
        if lf.fourier.size != 4 * params.n_freqs:
            raise InvalidInputError(
                f"location {i} has {lf.fourier.size} coordinate features, "
                f"model expects {4 * params.n_freqs}"
            )
        if int(lf.token_indices.max()) >= params.vocab_size:
            raise InvalidInputError(
                f"location {i} has token index >= vocab size {params.vocab_size}"
            )
        loc_inputs[i, :TOKEN_EMBED_DIM] = params.loc_embed[lf.token_indices].mean(
            axis=0
        )
        loc_inputs[i, TOKEN_EMBED_DIM:] = lf.fourier

    img_h = np.tanh(image_feats @ params.img_w1 + params.img_b1)
    img_pre = img_h @ params.img_w2 + params.img_b2
    image_emb, img_norms = _normalize_rows(img_pre)

    loc_h = np.tanh(loc_inputs @ params.loc_w1 + params.loc_b1)
    loc_pre = loc_h @ params.loc_w2 + params.loc_b2
    loc_emb, loc_norms = _normalize_rows(loc_pre)

    cache = ForwardCache(
        params=params,
        image_feats=image_feats,
        loc_feats=loc_feats,
        loc_inputs=loc_inputs,
        img_h=img_h,
        loc_h=loc_h,
        img_pre=img_pre,
        loc_pre=loc_pre,
        img_norms=img_norms,
        loc_norms=loc_norms,
        image_emb=image_emb,
        loc_emb=loc_emb,
    )
    return EmbeddingBatch(V=image_emb, T=loc_emb), cache


def similarity(emb: EmbeddingBatch, params: EncoderParams) -> np.ndarray:
    """Temperature-scaled logits exp(log_inv_tau) * (V @ T.T).

    Rows are unit-norm, so the dot product is cosine similarity.
    """
    scale = float(np.exp(params.log_inv_tau))
    return scale * (emb.V @ emb.T.T)


def backward(
    params: EncoderParams, cache: ForwardCache, d_logits: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of sum(d_logits * logits) w.r.t. every parameter."""
    if cache.params is not params:
        raise ContractViolationError(
            "cache was produced by a different parameter set"
        )
    b = cache.image_emb.shape[0]
    if d_logits.shape != (b, b):
        raise InvalidInputError(
            f"d_logits shape {d_logits.shape} does not match batch size {b}"
        )
    scale = float(np.exp(params.log_inv_tau))
    raw = cache.image_emb @ cache.loc_emb.T
    d_log_inv_tau = np.array(scale * np.sum(d_logits * raw))

    d_image_emb = scale * d_logits @ cache.loc_emb
    d_loc_emb = scale * d_logits.T @ cache.image_emb

    d_img_pre = _normalize_rows_backward(d_image_emb, cache.img_pre, cache.img_norms)
    d_loc_pre = _normalize_rows_backward(d_loc_emb, cache.loc_pre, cache.loc_norms)

    d_img_w2 = cache.img_h.T @ d_img_pre
    d_img_b2 = d_img_pre.sum(axis=0)
    d_img_h = (d_img_pre @ params.img_w2.T) * (1.0 - cache.img_h**2)
    d_img_w1 = cache.image_feats.T @ d_img_h
    d_img_b1 = d_img_h.sum(axis=0)

    d_loc_w2 = cache.loc_h.T @ d_loc_pre
    d_loc_b2 = d_loc_pre.sum(axis=0)
    d_loc_h = (d_loc_pre @ params.loc_w2.T) * (1.0 - cache.loc_h**2)
    d_loc_in = d_loc_h @ params.loc_w1.T
    d_loc_w1 = cache.loc_inputs.T @ d_loc_h
    d_loc_b1 = d_loc_h.sum(axis=0)

    d_loc_embed = np.zeros_like(params.loc_embed)
    for i, lf in enumerate(cache.loc_feats):
        # Mean pooling sends 1/L of the upstream gradient to each token.
        share = d_loc_in[i, :TOKEN_EMBED_DIM] / lf.token_indices.size
        np.add.at(d_loc_embed, lf.token_indices, share)

    return {
        "img_w1": d_img_w1,
        "img_b1": d_img_b1,
        "img_w2": d_img_w2,
        "img_b2": d_img_b2,
        "loc_embed": d_loc_embed,
        "loc_w1": d_loc_w1,
        "loc_b1": d_loc_b1,
        "loc_w2": d_loc_w2,
        "loc_b2": d_loc_b2,
        "log_inv_tau": d_log_inv_tau,
    }


CHECKPOINT_FORMAT = "geocontrast-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: EncoderParams, meta: dict[str, Any], path: str) -> None:
    """Write parameters and metadata as JSON with full float fidelity."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": meta,
        "params": {
            name: {"shape": list(arr.shape), "data": [float(x) for x in arr.ravel()]}
            for name, arr in params.as_dict().items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str) -> tuple[EncoderParams, dict[str, Any]]:
    """Load a checkpoint, validating structure, shapes and finiteness."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as e:
            raise ContractViolationError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ContractViolationError(f"{path}: not a checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ContractViolationError(
            f"{path}: unsupported checkpoint version {payload.get('version')!r}"
        )
    raw = payload.get("params")
    if not isinstance(raw, dict) or set(raw) != set(PARAM_NAMES):
        raise ContractViolationError(f"{path}: checkpoint parameter set mismatch")
    arrays: dict[str, np.ndarray] = {}
    for name in PARAM_NAMES:
        entry = raw[name]
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if not np.all(np.isfinite(arr)):
            raise ContractViolationError(f"{path}: parameter {name} is non-finite")
        arrays[name] = arr
    params = EncoderParams(**arrays)
    if params.loc_embed.shape[1] != TOKEN_EMBED_DIM:
        raise ContractViolationError(
            f"{path}: embedding width {params.loc_embed.shape[1]} != {TOKEN_EMBED_DIM}"
        )
    if (params.loc_w1.shape[0] - TOKEN_EMBED_DIM) % 4 != 0:
        raise ContractViolationError(f"{path}: location tower input width invalid")
    meta = payload.get("meta")
    return params, meta if isinstance(meta, dict) else {}
