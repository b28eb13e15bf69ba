"""Contrastive losses over a batch of logits, with exact gradients.

Every loss returns (scalar, dLoss/dlogits). The hard-label loss treats
the diagonal as the only positive; the soft-label loss spreads each
row's target mass according to a row-stochastic weight matrix; the
fairness penalty is the variance of per-region mean diagonal softmax
probability across regions present in the batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, InvalidInputError
from .supervision import SpatialWeightMatrix

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LossBreakdown:
    """All loss components of one step. l_clip is diagnostic only."""

    l_clip: float
    l_sw: float
    l_fair: float
    l_total: float
    lambda_fair: float


def _check_square(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] != logits.shape[1]:
        raise InvalidInputError(f"logits must be square, got shape {logits.shape}")
    if logits.shape[0] == 0:
        raise InvalidInputError("logits matrix is empty")
    return logits


def row_softmax(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise softmax and log-softmax, shift-stabilized."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    return np.exp(log_p), log_p


def clip_loss(logits: np.ndarray) -> tuple[float, np.ndarray]:
    """Hard-label contrastive loss: -mean_i log softmax(logits_i)[i].

    Gradient is (softmax - I) / B.
    """
    logits = _check_square(logits)
    b = logits.shape[0]
    p, log_p = row_softmax(logits)
    loss = -float(np.mean(np.diag(log_p)))
    grad = (p - np.eye(b)) / b
    return loss, grad


def sw_loss(
    logits: np.ndarray, w: SpatialWeightMatrix
) -> tuple[float, np.ndarray]:
    """Soft-label contrastive loss: -(1/B) sum_ij w_ij log softmax(logits_i)[j].

    Gradient is (softmax - w) / B, valid exactly because each w row sums
    to 1.

    Raises:
        ContractViolationError: if w is not row-stochastic.
    """
    logits = _check_square(logits)
    b = logits.shape[0]
    if w.values.shape != logits.shape:
        raise InvalidInputError(
            f"weight shape {w.values.shape} != logits shape {logits.shape}"
        )
    row_sums = w.values.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > _ROW_SUM_TOL):
        worst = int(np.argmax(np.abs(row_sums - 1.0)))
        raise ContractViolationError(
            f"soft-label row {worst} sums to {row_sums[worst]!r}, expected 1"
        )
    if np.any(w.values < 0.0) or np.any(w.values > 1.0 + _ROW_SUM_TOL):
        raise ContractViolationError("soft-label entries must lie in [0, 1]")
    p, log_p = row_softmax(logits)
    loss = -float(np.sum(w.values * log_p)) / b
    grad = (p - w.values) / b
    return loss, grad


def fair_loss(
    logits: np.ndarray, region_ids: np.ndarray, n_regions: int
) -> tuple[float, np.ndarray]:
    """Variance of per-region mean diagonal probability, present regions only.

    Perf_r = mean over batch members of region r of softmax(logits_i)[i];
    loss = sum over present regions of (Perf_r - mean)^2. Regions absent
    from the batch contribute nothing. With a single present region the
    loss and gradient are exactly zero.
    """
    logits = _check_square(logits)
    b = logits.shape[0]
    region_ids = np.asarray(region_ids)
    if region_ids.shape != (b,):
        raise InvalidInputError(
            f"region_ids shape {region_ids.shape} does not match batch size {b}"
        )
    if n_regions < 1:
        raise InvalidInputError(f"n_regions must be >= 1, got {n_regions}")
    if np.any(region_ids < 0) or np.any(region_ids >= n_regions):
        raise InvalidInputError(f"region ids must lie in [0, {n_regions})")

    p, _ = row_softmax(logits)
    diag = np.diag(p)
    present = np.unique(region_ids)
    if present.size == 1:
        return 0.0, np.zeros_like(logits)

    perf = np.array([diag[region_ids == r].mean() for r in present])
    counts = np.array([(region_ids == r).sum() for r in present])
    mean_perf = perf.mean()
    loss = float(np.sum((perf - mean_perf) ** 2))

    # dLoss/dPerf_r = 2 (Perf_r - mean); the mean's own dependence cancels
    # because the deviations sum to zero. Each diagonal prob then feeds its
    # region's Perf with weight 1/|B_r|, and d p_ii / d logits[i, j]
    # = p_ii (delta_ij - p_ij).
    coef_by_region = 2.0 * (perf - mean_perf) / counts
    region_pos = {int(r): k for k, r in enumerate(present)}
    c = np.array([coef_by_region[region_pos[int(r)]] for r in region_ids])
    grad = (c * diag)[:, None] * (np.eye(b) - p)
    return loss, grad


def total_loss(
    logits: np.ndarray,
    w: SpatialWeightMatrix,
    region_ids: np.ndarray,
    n_regions: int,
    lambda_fair: float,
    symmetric: bool = False,
) -> tuple[LossBreakdown, np.ndarray]:
    """Combine the soft-label loss and the fairness penalty.

    l_total = l_sw + lambda_fair * l_fair. l_clip is evaluated on the
    same logits as a frozen diagnostic and never contributes to the
    gradient. With symmetric=True the soft-label term averages the
    image-to-text direction with a text-to-image direction whose targets
    are the renormalized rows of w transposed.
    """
    if lambda_fair < 0:
        raise InvalidInputError(f"lambda_fair must be >= 0, got {lambda_fair}")
    l_clip, _ = clip_loss(logits)
    l_sw, g_sw = sw_loss(logits, w)
    if symmetric:
        wt = w.values.T.copy()
        wt /= wt.sum(axis=1, keepdims=True)
        l_t2i, g_t2i = sw_loss(logits.T, SpatialWeightMatrix(values=wt))
        l_sw = 0.5 * (l_sw + l_t2i)
        g_sw = 0.5 * (g_sw + g_t2i.T)
    l_fair, g_fair = fair_loss(logits, region_ids, n_regions)
    l_total = l_sw + lambda_fair * l_fair
    grad = g_sw + lambda_fair * g_fair
    breakdown = LossBreakdown(
        l_clip=l_clip,
        l_sw=l_sw,
        l_fair=l_fair,
        l_total=l_total,
        lambda_fair=lambda_fair,
    )
    return breakdown, grad
