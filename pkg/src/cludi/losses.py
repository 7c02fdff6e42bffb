"""Training losses: diffusion regression plus batch-regularized classification.

The classification term is what prevents assignment collapse.  Teacher
probabilities are rebuilt from the shared logits with a softmax taken down
each column (items compete for a cluster) under a uniform prior, and student
probabilities are rescaled so every cluster receives the same total mass
across the minibatch.  A symmetric cross-entropy between the two then makes
"all items in one cluster" expensive while plain row-wise cross-entropy
would happily accept it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, ValidationError


@dataclass(frozen=True)
class LossConfig:
    """Knobs of the combined objective.

    lam: classification-term multiplier.
    gamma: SNR clip level for per-timestep weights.
    snr_clip_mode: "max" floors the SNR at gamma (weights in (0, gamma]),
        "min" caps it (classic bounded weighting).
    naive_ce_ablation: replace the regularized symmetric term with plain
        row-wise cross-entropy; exists to demonstrate assignment collapse.
    prob_floor: probabilities are floored at this value inside logs.
    """

    lam: float = 50.0
    gamma: float = 5.0
    snr_clip_mode: str = "max"
    naive_ce_ablation: bool = False
    prob_floor: float = 1e-12

    def __post_init__(self) -> None:
        if self.lam < 0.0:
            raise ValidationError(f"lam must be >= 0, got {self.lam}")
        if self.gamma <= 0.0:
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")
        if self.snr_clip_mode not in ("max", "min"):
            raise ValidationError(
                f"snr_clip_mode must be 'max' or 'min', got {self.snr_clip_mode!r}"
            )
        if not 0.0 < self.prob_floor < 1e-3:
            raise ValidationError(
                f"prob_floor must be in (0, 1e-3), got {self.prob_floor}"
            )


def diffusion_loss(z0_target: np.ndarray, z0_pred: np.ndarray) -> np.ndarray:
    """Squared L2 distance per row, summed over embedding dimensions."""
    z0_target = np.asarray(z0_target, dtype=np.float64)
    z0_pred = np.asarray(z0_pred, dtype=np.float64)
    if z0_target.shape != z0_pred.shape:
        raise ValidationError(
            f"shape mismatch: {z0_target.shape} vs {z0_pred.shape}"
        )
    diff = z0_target - z0_pred
    return np.sum(diff * diff, axis=-1)


def column_softmax(logits: np.ndarray, tau_col: float) -> np.ndarray:
    """Tempered softmax down each column (over items, per cluster)."""
    logits = _check_matrix(logits, "logits")
    if tau_col <= 0.0 or not np.isfinite(tau_col):
        raise ValidationError(f"tau_col must be positive, got {tau_col}")
    scaled = logits / tau_col
    shifted = scaled - scaled.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def teacher_regularized_probs(teacher_logits: np.ndarray, tau_col: float) -> np.ndarray:
    """Row-normalized column softmax: the uniform-prior posterior per item.

    For a single-item batch every column softmax is 1, so the result is the
    uniform distribution whatever the logits are; the construction only
    carries information when items compete.
    """
    col = column_softmax(teacher_logits, tau_col)
    return col / col.sum(axis=1, keepdims=True)


def student_regularized_probs(student_probs: np.ndarray) -> np.ndarray:
    """Rescale rows so each cluster's column mass becomes M/K.

    Keeps rows proportional to the input but removes any incentive to dump
    every item into one cluster.  Columns with (near-)zero mass stay zero.
    """
    u = _check_probs(student_probs)
    m, k = u.shape
    colsum = u.sum(axis=0, keepdims=True)
    return (m / k) * u / np.maximum(colsum, 1e-300)


def class_loss(
    teacher_logits: np.ndarray,
    student_probs: np.ndarray,
    config: LossConfig,
    tau: float,
    tau_col: float,
) -> np.ndarray:
    """Per-item classification loss, shape (M,).

    Default: symmetric cross-entropy between the teacher's regularized
    posterior q and the student's batch-normalized distribution,
    1/2 [ -sum_k q log s_hat - sum_k s_hat log q ].  Under
    ``config.naive_ce_ablation``: plain row-wise cross-entropy
    -sum_k u log u_hat with u the row softmax of the teacher logits at
    temperature ``tau`` (``tau`` is used only by this branch).
    """
    parts = class_loss_parts(teacher_logits, student_probs, config, tau, tau_col)
    return parts["per_item"]


def class_loss_parts(
    teacher_logits: np.ndarray,
    student_probs: np.ndarray,
    config: LossConfig,
    tau: float,
    tau_col: float,
) -> dict:
    """class_loss plus the intermediates its gradient needs."""
    logits = _check_matrix(teacher_logits, "teacher_logits")
    u_hat = _check_probs(student_probs)
    if logits.shape != u_hat.shape:
        raise ValidationError(
            f"teacher_logits {logits.shape} and student_probs "
            f"{u_hat.shape} must match"
        )
    if tau <= 0.0 or not np.isfinite(tau):
        raise ValidationError(f"tau must be positive, got {tau}")
    floor = config.prob_floor
    log_floor = np.log(floor)

    if config.naive_ce_ablation:
        scaled = logits / tau
        shifted = scaled - scaled.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        u = e / e.sum(axis=1, keepdims=True)
        log_u_hat = np.log(np.maximum(u_hat, floor))
        per_item = -np.sum(u * log_u_hat, axis=1)
        return {"per_item": per_item, "u": u, "log_u_hat": log_u_hat,
                "floored_u_hat": u_hat < floor}

    q = teacher_regularized_probs(logits, tau_col)
    log_q = np.maximum(np.log(np.maximum(q, 1e-300)), log_floor)
    s_hat = student_regularized_probs(u_hat)
    log_s_hat = np.maximum(np.log(np.maximum(s_hat, 1e-300)), log_floor)
    floored_s = s_hat < floor
    term_q_s = -np.sum(q * log_s_hat, axis=1)
    term_s_q = -np.sum(s_hat * log_q, axis=1)
    per_item = 0.5 * (term_q_s + term_s_q)
    return {
        "per_item": per_item,
        "q": q,
        "log_q": log_q,
        "s_hat": s_hat,
        "log_s_hat": log_s_hat,
        "floored_s": floored_s,
        "u_hat_colsum": u_hat.sum(axis=0),
    }


def total_loss(
    dif_losses: np.ndarray,
    cls_losses: np.ndarray,
    weights: np.ndarray,
    lam: float,
) -> float:
    """Weighted mean over the minibatch: mean_m w_m (dif_m + lam cls_m)."""
    dif = np.asarray(dif_losses, dtype=np.float64)
    cls = np.asarray(cls_losses, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if not dif.shape == cls.shape == w.shape or dif.ndim != 1:
        raise ValidationError(
            f"per-item arrays must share one shape, got {dif.shape}, "
            f"{cls.shape}, {w.shape}"
        )
    if lam < 0.0:
        raise ValidationError(f"lam must be >= 0, got {lam}")
    for name, arr in (("diffusion", dif), ("classification", cls),
                      ("weight", w)):
        if not np.all(np.isfinite(arr)):
            raise NumericalFailure(f"total_loss: non-finite {name} term")
    return float(np.mean(w * (dif + lam * cls)))


def _check_matrix(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 2:
        raise ValidationError(
            f"{name} must be a 2-d matrix with >= 2 columns, got shape {a.shape}"
        )
    return a


def _check_probs(u: np.ndarray) -> np.ndarray:
    u = _check_matrix(u, "student_probs")
    if np.any(u < 0.0):
        raise ValidationError("student_probs must be non-negative")
    if np.any(np.abs(u.sum(axis=1) - 1.0) > 1e-6):
        raise ValidationError("student_probs rows must sum to 1")
    return u
