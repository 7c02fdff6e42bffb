"""Noise schedule and stochastic denoising steps over assignment embeddings.

The forward process is variance-shrinking rather than variance-preserving:
latents live at an amplified scale, and the scale factor multiplies the
standard deviation of every Gaussian involved (initial latent, forward
noising, and the stochastic part of each reverse step).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError

DenoiseFn = Callable[[np.ndarray, np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed signal-retention table for a sqrt-shaped schedule.

    ``alpha_bar[t]`` is the fraction of signal variance surviving after t
    noising steps: exactly 1 at t = 0, then ``1 - sqrt(t/horizon + shift)``
    clamped from below at ``floor``.  The clamp keeps the tail positive
    (the raw expression goes negative at t = horizon); with the default
    parameters it is active only at the final step.
    """

    horizon: int
    shift: float
    floor: float
    alpha_bar: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.alpha_bar.shape != (self.horizon + 1,):
            raise ValidationError(
                f"alpha_bar must have shape ({self.horizon + 1},), "
                f"got {self.alpha_bar.shape}"
            )


def build_sqrt_schedule(
    horizon: int = 1000,
    shift: float = 1e-4,
    floor: float = 1e-5,
) -> NoiseSchedule:
    """Construct the sqrt schedule table for timesteps 0..horizon.

    Args:
        horizon: number of diffusion steps T; at least 1.
        shift: small offset added inside the square root so the first
            noising step is non-trivial.
        floor: lower clamp keeping alpha_bar strictly positive.

    Returns:
        A NoiseSchedule whose table is non-increasing, starts at exactly
        1.0, and never drops below ``floor``.
    """
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if not 0.0 < shift < 1.0:
        raise ValidationError(f"shift must be in (0, 1), got {shift}")
    if not 0.0 < floor < 1.0:
        raise ValidationError(f"floor must be in (0, 1), got {floor}")
    t = np.arange(horizon + 1, dtype=np.float64)
    table = np.maximum(1.0 - np.sqrt(t / horizon + shift), floor)
    table[0] = 1.0
    table.flags.writeable = False
    return NoiseSchedule(horizon=horizon, shift=shift, floor=floor, alpha_bar=table)


def _check_t(schedule: NoiseSchedule, t, *, minimum: int) -> np.ndarray:
    t = np.asarray(t)
    if not np.issubdtype(t.dtype, np.integer):
        raise ValidationError(f"timesteps must be integers, got dtype {t.dtype}")
    if np.any(t < minimum) or np.any(t > schedule.horizon):
        raise ValidationError(
            f"timesteps must lie in [{minimum}, {schedule.horizon}]"
        )
    return t


def snr(schedule: NoiseSchedule, t) -> np.ndarray | float:
    """Signal-to-noise ratio alpha_bar / (1 - alpha_bar) at timestep t.

    Defined for t >= 1 only; at t = 0 the noise variance is zero and the
    ratio diverges.  Accepts a scalar or an integer array.
    """
    t_arr = _check_t(schedule, t, minimum=1)
    ab = schedule.alpha_bar[t_arr]
    out = ab / (1.0 - ab)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def min_snr_weight(schedule: NoiseSchedule, t, gamma: float, mode: str = "max"):
    """Per-timestep loss weight clip(SNR, gamma) / (SNR + 1).

    ``mode`` selects the clip direction: "max" applies a floor
    (max(SNR, gamma), weights in (0, gamma]) and "min" a ceiling
    (min(SNR, gamma), weights bounded by 1).  Both converge to 1 as
    SNR grows with mode "max", and to gamma/(SNR+1) -> 0 with "min".
    """
    if gamma <= 0.0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    if mode not in ("max", "min"):
        raise ValidationError(f"mode must be 'max' or 'min', got {mode!r}")
    s = snr(schedule, t)
    clipped = np.maximum(s, gamma) if mode == "max" else np.minimum(s, gamma)
    out = clipped / (np.asarray(s) + 1.0)
    return float(out) if np.isscalar(t) else out


def forward_noise(
    z0: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
    scale: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample z_t ~ N(sqrt(alpha_bar_t) z0, (1 - alpha_bar_t) scale^2 I).

    Always consumes one standard-normal draw of z0's shape from ``rng``,
    including at t = 0 where the noise coefficient is exactly zero; this
    keeps stream consumption uniform so batched callers can pre-draw.
    """
    t_i = int(_check_t(schedule, t, minimum=0))
    z0 = np.asarray(z0, dtype=np.float64)
    _check_scale(scale)
    ab = schedule.alpha_bar[t_i]
    eta = rng.standard_normal(z0.shape)
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * scale * eta


def epsilon_from_prediction(
    z_t: np.ndarray,
    z0_pred: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Recover the implied scaled noise (z_t - sqrt(ab_t) z0_pred) / sqrt(1 - ab_t).

    The latent amplification factor is deliberately not divided out: the
    estimate feeds the reverse step at the same scale z_t carries.
    Requires t >= 1 (at t = 0 the denominator vanishes).
    """
    t_i = int(_check_t(schedule, t, minimum=1))
    z_t = np.asarray(z_t, dtype=np.float64)
    z0_pred = np.asarray(z0_pred, dtype=np.float64)
    if z_t.shape != z0_pred.shape:
        raise ValidationError(
            f"z_t and z0_pred shapes differ: {z_t.shape} vs {z0_pred.shape}"
        )
    ab = schedule.alpha_bar[t_i]
    return (z_t - np.sqrt(ab) * z0_pred) / np.sqrt(1.0 - ab)


def ddim_sigma(schedule: NoiseSchedule, s: int, t: int) -> float:
    """Stochastic step noise level sigma_{s|t}.

    sigma^2 = (1 - ab_s) / (1 - ab_t) * (1 - ab_t / ab_s), the variance of
    the posterior-matched jump from t down to s.  Zero when s = 0 (the jump
    lands on a deterministic point) and zero when ab_s = ab_t.
    """
    s_i = int(_check_t(schedule, s, minimum=0))
    t_i = int(_check_t(schedule, t, minimum=1))
    if s_i >= t_i:
        raise ValidationError(f"need s < t, got s={s_i}, t={t_i}")
    ab_s = schedule.alpha_bar[s_i]
    ab_t = schedule.alpha_bar[t_i]
    var = (1.0 - ab_s) / (1.0 - ab_t) * (1.0 - ab_t / ab_s)
    return float(np.sqrt(max(var, 0.0)))


def ddim_step(
    z_t: np.ndarray,
    z0_pred: np.ndarray,
    s: int,
    t: int,
    schedule: NoiseSchedule,
    scale: float,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
) -> np.ndarray:
    """One reverse jump from timestep t down to s < t.

    Combines the clean prediction with the implied noise direction and,
    unless ``deterministic`` is set, adds fresh noise with standard
    deviation ``scale * sigma_{s|t}``.  Stochastic mode always consumes one
    draw from ``rng`` even when sigma is zero (final jump to s = 0), so
    stream consumption is independent of the grid position.
    """
    _check_scale(scale)
    sigma = 0.0 if deterministic else ddim_sigma(schedule, s, t)
    if not deterministic and rng is None:
        raise ValidationError("stochastic ddim_step requires an rng")
    eps_hat = epsilon_from_prediction(z_t, z0_pred, t, schedule)
    ab_s = schedule.alpha_bar[int(s)]
    direction = np.sqrt(max(1.0 - ab_s - sigma * sigma, 0.0))
    out = np.sqrt(ab_s) * z0_pred + direction * eps_hat
    if not deterministic:
        out = out + scale * sigma * rng.standard_normal(z_t.shape)
    return out


def make_time_grid(horizon: int, n_points: int) -> np.ndarray:
    """Equally spaced integer timesteps from horizon down to 0, inclusive.

    Spacing is horizon / (n_points - 1) rounded half-up, which keeps the
    grid strictly decreasing whenever n_points <= horizon + 1.
    """
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if not 2 <= n_points <= horizon + 1:
        raise ValidationError(
            f"n_points must be in [2, horizon + 1], got {n_points}"
        )
    raw = np.linspace(horizon, 0.0, n_points)
    grid = np.floor(raw + 0.5).astype(np.int64)
    if np.any(np.diff(grid) >= 0):
        raise ValidationError("rounded grid is not strictly decreasing")
    return grid


def reverse_sample(
    denoise_fn: DenoiseFn,
    x: np.ndarray,
    grid: np.ndarray,
    schedule: NoiseSchedule,
    scale: float,
    embed_dim: int,
    rng: np.random.Generator,
    deterministic: bool = False,
) -> np.ndarray:
    """Run one full reverse chain conditioned on feature vector x.

    Draws the initial latent N(0, scale^2 I) at the grid's first timestep,
    then repeatedly predicts the clean embedding with ``denoise_fn(z, x, t)``
    and jumps to the next grid point.  When the grid ends at 0, the result
    equals the final clean prediction exactly.

    This is the single-chain reference path; batched execution lives in
    cludi._kernels and is tested for equivalence against it.
    """
    _check_scale(scale)
    grid = np.asarray(grid)
    if grid.ndim != 1 or grid.size < 2:
        raise ValidationError("grid must be a 1-d array with at least 2 points")
    if not np.issubdtype(grid.dtype, np.integer):
        raise ValidationError("grid entries must be integers")
    if np.any(np.diff(grid) >= 0):
        raise ValidationError("grid must be strictly decreasing")
    if grid[0] > schedule.horizon or grid[-1] < 0:
        raise ValidationError("grid must lie within [0, horizon]")
    x = np.asarray(x, dtype=np.float64)
    z = scale * rng.standard_normal(embed_dim)
    for i in range(grid.size - 1):
        t = int(grid[i])
        s = int(grid[i + 1])
        z0_pred = np.asarray(denoise_fn(z, x, t), dtype=np.float64)
        if z0_pred.shape != z.shape:
            raise ValidationError(
                f"denoise_fn returned shape {z0_pred.shape}, expected {z.shape}"
            )
        z = ddim_step(z, z0_pred, s, t, schedule, scale,
                      rng=rng, deterministic=deterministic)
    return z


def _check_scale(scale: float) -> None:
    if not np.isfinite(scale) or scale <= 0.0:
        raise ValidationError(f"scale must be a positive finite float, got {scale}")
