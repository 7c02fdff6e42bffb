"""Backend dispatch for the batched reverse-chain kernel.

The compiled extension fuses the per-step MLP forward and jump update for
all chains at once; a pure numpy fallback with identical semantics is used
when the extension is unavailable or CLUDI_FORCE_FALLBACK is set to a
non-empty value other than "0".  Both consume pre-drawn noise tensors, so a
batched run reproduces per-row chains drawn from per-row streams exactly.
"""

from __future__ import annotations

import os

import numpy as np

from ..denoiser import DenoiserParams, time_embedding
from ..diffusion import NoiseSchedule, ddim_sigma
from ..errors import ValidationError

_FORCE_FALLBACK = os.environ.get("CLUDI_FORCE_FALLBACK", "0") not in ("", "0")

if _FORCE_FALLBACK:
    from . import fallback as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _chain as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import fallback as _impl

        BACKEND = "numpy"


def backend_name() -> str:
    return BACKEND


def _pack_params(params: DenoiserParams):
    dims = np.array(
        [params.input_dim] + [w.shape[1] for w in params.weights],
        dtype=np.int64,
    )
    w_flat = np.concatenate(
        [np.ascontiguousarray(w, dtype=np.float64).ravel()
         for w in params.weights]
    )
    b_flat = np.concatenate(
        [np.ascontiguousarray(b, dtype=np.float64) for b in params.biases]
    )
    w_off = np.zeros(dims.size, dtype=np.int64)
    b_off = np.zeros(dims.size, dtype=np.int64)
    np.cumsum(dims[:-1] * dims[1:], out=w_off[1:])
    np.cumsum(dims[1:], out=b_off[1:])
    return w_flat, w_off, b_flat, b_off, dims


def _step_constants(
    grid: np.ndarray,
    schedule: NoiseSchedule,
    scale: float,
    deterministic: bool,
) -> np.ndarray:
    n_jumps = grid.size - 1
    const = np.empty((n_jumps, 5))
    ab = schedule.alpha_bar
    for i in range(n_jumps):
        t, s = int(grid[i]), int(grid[i + 1])
        sigma = 0.0 if deterministic else ddim_sigma(schedule, s, t)
        const[i, 0] = np.sqrt(ab[t])
        const[i, 1] = 1.0 / np.sqrt(1.0 - ab[t])
        const[i, 2] = np.sqrt(ab[s])
        const[i, 3] = np.sqrt(max(1.0 - ab[s] - sigma * sigma, 0.0))
        const[i, 4] = scale * sigma
    return const


def predraw_chain_noise(rng: np.random.Generator, n_jumps: int, embed_dim: int):
    """Draw one chain's noise in the reference consumption order."""
    z_init = rng.standard_normal(embed_dim)
    steps = rng.standard_normal((n_jumps, embed_dim))
    return z_init, steps


def run_chains(
    params: DenoiserParams,
    x: np.ndarray,
    grid: np.ndarray,
    schedule: NoiseSchedule,
    scale: float,
    z_init: np.ndarray,
    step_noise: np.ndarray | None = None,
    deterministic: bool = False,
) -> np.ndarray:
    """Run one reverse chain per row of ``x``; returns final latents (M, d).

    z_init holds standard-normal draws (scaled inside); step_noise has
    shape (len(grid) - 1, M, d) and may be omitted in deterministic mode.
    Equivalent to looping cludi.diffusion.reverse_sample per row with the
    same pre-drawn noise, up to floating-point reassociation.
    """
    grid = np.asarray(grid)
    if grid.ndim != 1 or grid.size < 2 or not np.issubdtype(grid.dtype, np.integer):
        raise ValidationError("grid must be a 1-d integer array, >= 2 points")
    if np.any(np.diff(grid) >= 0) or grid[0] > schedule.horizon or grid[-1] < 0:
        raise ValidationError("grid must be strictly decreasing within "
                              "[0, horizon]")
    if not np.isfinite(scale) or scale <= 0.0:
        raise ValidationError(f"scale must be positive, got {scale}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    z_init = np.asarray(z_init, dtype=np.float64)
    m = x.shape[0]
    d = params.embed_dim
    n_jumps = grid.size - 1
    if x.ndim != 2 or x.shape[1] != params.feature_dim:
        raise ValidationError(
            f"x must be (M, {params.feature_dim}), got {x.shape}"
        )
    if z_init.shape != (m, d):
        raise ValidationError(f"z_init must be ({m}, {d}), got {z_init.shape}")
    if step_noise is None:
        if not deterministic:
            raise ValidationError("step_noise required in stochastic mode")
        step_noise = np.zeros((n_jumps, m, d))
    step_noise = np.ascontiguousarray(step_noise, dtype=np.float64)
    if step_noise.shape != (n_jumps, m, d):
        raise ValidationError(
            f"step_noise must be ({n_jumps}, {m}, {d}), got {step_noise.shape}"
        )
    temb_grid = np.ascontiguousarray(
        time_embedding(grid[:-1], params.time_dim, params.horizon)
    )
    const = _step_constants(grid, schedule, scale, deterministic)
    w_flat, w_off, b_flat, b_off, dims = _pack_params(params)
    z = scale * z_init
    return _impl.chain_batch(
        w_flat, w_off, b_flat, b_off, dims, x, temb_grid, const,
        np.ascontiguousarray(z), step_noise,
    )
