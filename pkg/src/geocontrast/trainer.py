"""Training loop: batching, AdamW, cosine learning rate, reproducibility.

The loop is fully determined by the dataset and config seed. Soft labels
are built per batch from within-batch pairwise distances; the baseline
mode degenerates to hard one-hot targets with the fairness penalty off.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .data import Sample
from .errors import InvalidInputError, NonFiniteGradientError
from .geodesy import distance_matrix
from .locfeat import featurize_sample
from .model import (
    NO_DECAY,
    TAU_SCALE_MAX,
    TAU_SCALE_MIN,
    EncoderParams,
    backward,
    forward,
    init_params,
    similarity,
)
from .objective import total_loss
from .supervision import KernelConfig, identity_labels, soft_labels

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MODES = ("sw", "baseline")


@dataclass(frozen=True)
class TrainConfig:
    """Everything the training loop depends on besides the dataset."""

    epochs: int = 60
    batch_size: int = 64
    base_lr: float = 3e-3
    weight_decay: float = 1e-2
    lambda_fair: float = 0.1
    seed: int = 0
    stratify_regions: bool = False
    kernel: KernelConfig = field(default_factory=KernelConfig)
    symmetric_loss: bool = False
    freeze_tau: bool = False
    warmup_frac: float = 0.05
    hidden_dim: int = 64
    embed_dim: int = 32
    vocab_size: int = 4096
    n_freqs: int = 6
    train_frac: float = 0.8

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise InvalidInputError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise InvalidInputError(
                f"batch_size must be >= 2 (contrastive loss needs negatives), "
                f"got {self.batch_size}"
            )
        if not self.base_lr > 0:
            raise InvalidInputError(f"base_lr must be > 0, got {self.base_lr}")
        if self.weight_decay < 0 or self.lambda_fair < 0:
            raise InvalidInputError("weight_decay and lambda_fair must be >= 0")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise InvalidInputError(
                f"warmup_frac must lie in [0, 1), got {self.warmup_frac}"
            )
        if not 0.0 < self.train_frac < 1.0:
            raise InvalidInputError(
                f"train_frac must lie in (0, 1), got {self.train_frac}"
            )

    def to_dict(self) -> dict[str, Any]:
        d = {k: v for k, v in self.__dict__.items() if k != "kernel"}
        d["kernel"] = dict(self.kernel.__dict__)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainConfig":
        d = dict(d)
        kernel = d.pop("kernel", None)
        if kernel is not None:
            d["kernel"] = KernelConfig(**kernel)
        return cls(**d)


@dataclass
class OptimizerState:
    """AdamW first/second moment accumulators plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step_count: int = 0


def init_optimizer(params: EncoderParams) -> OptimizerState:
    return OptimizerState(
        m={k: np.zeros_like(a) for k, a in params.as_dict().items()},
        v={k: np.zeros_like(a) for k, a in params.as_dict().items()},
    )


def cosine_lr(
    step: int, total_steps: int, base_lr: float, warmup_steps: int
) -> float:
    """Linear warmup to base_lr, then cosine decay to 0 at total_steps."""
    if not 0 <= step <= total_steps:
        raise InvalidInputError(
            f"step {step} outside schedule range [0, {total_steps}]"
        )
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * step / warmup_steps
    denom = total_steps - warmup_steps
    progress = (step - warmup_steps) / denom if denom > 0 else 1.0
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def adamw_step(
    params: EncoderParams,
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    weight_decay: float,
) -> None:
    """One decoupled-weight-decay Adam update, in place.

    Weight decay skips biases, the embedding table, and the temperature.

    Raises:
        NonFiniteGradientError: naming the step, parameter, and max |grad|.
    """
    arrays = params.as_dict()
    if set(grads) != set(arrays):
        raise InvalidInputError("gradient keys do not match parameter names")
    state.step_count += 1
    t = state.step_count
    for name, arr in arrays.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != arr.shape:
            raise InvalidInputError(
                f"gradient shape {g.shape} != parameter {name} shape {arr.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(
                f"non-finite gradient at step {t} in parameter {name} "
                f"(max |grad| = {np.max(np.abs(g[np.isfinite(g)]), initial=0.0)})"
            )
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g**2
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        update = lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        if name not in NO_DECAY and weight_decay > 0.0:
            update = update + lr * weight_decay * arr
        arr -= update


def _batch_order(
    rng: np.random.Generator,
    regions: np.ndarray,
    stratify: bool,
) -> np.ndarray:
    n = regions.size
    if not stratify:
        return rng.permutation(n)
    # Deal one index per region in round robin so every chunk spans as
    # many regions as the dataset composition allows.
    order: list[int] = []
    queues = []
    for r in np.unique(regions):
        idx = np.flatnonzero(regions == r)
        rng.shuffle(idx)
        queues.append(list(idx))
    while queues:
        still = []
        for q in queues:
            order.append(int(q.pop()))
            if q:
                still.append(q)
        queues = still
    return np.array(order, dtype=np.int64)


@dataclass
class TrainResult:
    """Final parameters, the per-step log, and the resolved run settings."""

    params: EncoderParams
    records: list[dict[str, Any]]
    mode: str
    config: TrainConfig


def train(samples: list[Sample], cfg: TrainConfig, mode: str = "sw") -> TrainResult:
    """Run the full optimization loop over ``samples``.

    mode "sw" trains with spatial soft labels plus the fairness penalty;
    mode "baseline" forces one-hot targets and lambda_fair = 0, leaving
    every other knob identical. Epoch-tail batches of size 1 are dropped.
    """
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    if not samples:
        raise InvalidInputError("cannot train on an empty dataset")
    d_img = samples[0].image_feature.size
    if any(s.image_feature.size != d_img for s in samples):
        raise InvalidInputError("image feature length varies across the dataset")

    lam = 0.0 if mode == "baseline" else cfg.lambda_fair
    images = np.stack([s.image_feature for s in samples]).astype(np.float64)
    loc_feats = [
        featurize_sample(s, vocab_size=cfg.vocab_size, n_freqs=cfg.n_freqs)
        for s in samples
    ]
    regions = np.array([s.region_id for s in samples], dtype=np.int64)
    n_regions = int(regions.max()) + 1

    params = init_params(
        seed=cfg.seed,
        d_img=d_img,
        hidden_dim=cfg.hidden_dim,
        embed_dim=cfg.embed_dim,
        vocab_size=cfg.vocab_size,
        n_freqs=cfg.n_freqs,
    )
    state = init_optimizer(params)
    rng = np.random.default_rng(cfg.seed)

    n = len(samples)
    batches_per_epoch = n // cfg.batch_size + (1 if n % cfg.batch_size >= 2 else 0)
    if batches_per_epoch == 0:
        raise InvalidInputError(
            f"dataset of {n} samples yields no usable batch at size {cfg.batch_size}"
        )
    total_steps = cfg.epochs * batches_per_epoch
    warmup_steps = int(round(cfg.warmup_frac * total_steps))

    records: list[dict[str, Any]] = []
    step = 0
    for epoch in range(cfg.epochs):
        order = _batch_order(rng, regions, cfg.stratify_regions)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if idx.size < 2:
                logger.info(
                    "epoch %d: dropping tail batch of size %d", epoch, idx.size
                )
                continue
            batch = [samples[i] for i in idx]
            d = distance_matrix([s.point for s in batch])
            if mode == "sw":
                w = soft_labels(d, batch, cfg.kernel)
            else:
                w = identity_labels(idx.size)

            emb, cache = forward(params, images[idx], [loc_feats[i] for i in idx])
            logits = similarity(emb, params)
            breakdown, g_logits = total_loss(
                logits, w, regions[idx], n_regions, lam, symmetric=cfg.symmetric_loss
            )
            grads = backward(params, cache, g_logits)
            if cfg.freeze_tau:
                grads["log_inv_tau"] = np.zeros_like(params.log_inv_tau)

            lr = cosine_lr(step, total_steps, cfg.base_lr, warmup_steps)
            adamw_step(params, grads, state, lr, cfg.weight_decay)
            params.log_inv_tau[...] = np.clip(
                params.log_inv_tau, math.log(TAU_SCALE_MIN), math.log(TAU_SCALE_MAX)
            )
            for name, arr in params.as_dict().items():
                if not np.all(np.isfinite(arr)):
                    raise NonFiniteGradientError(
                        f"parameter {name} became non-finite at step {step}"
                    )
            records.append(
                {
                    "step": step,
                    "epoch": epoch,
                    "l_clip": breakdown.l_clip,
                    "l_sw": breakdown.l_sw,
                    "l_fair": breakdown.l_fair,
                    "l_total": breakdown.l_total,
                    "lr": lr,
                    "tau": float(np.exp(-params.log_inv_tau)),
                }
            )
            step += 1
    return TrainResult(params=params, records=records, mode=mode, config=cfg)


def write_training_log(records: list[dict[str, Any]], path: str) -> None:
    """Append-free write of the per-step log as line-delimited records."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
