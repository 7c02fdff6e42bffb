"""Pure numpy implementation of the fused reverse-chain kernel.

Same packed-parameter interface as the compiled backend so the dispatcher
can swap them freely; see cludi._kernels.run_chains for the public entry.
"""

from __future__ import annotations

import numpy as np

from ..denoiser import gelu


def chain_batch(
    w_flat: np.ndarray,
    w_off: np.ndarray,
    b_flat: np.ndarray,
    b_off: np.ndarray,
    dims: np.ndarray,
    x: np.ndarray,
    temb_grid: np.ndarray,
    step_const: np.ndarray,
    z: np.ndarray,
    step_noise: np.ndarray,
) -> np.ndarray:
    """Run all rows' reverse chains in lockstep over the grid.

    step_const rows hold (sqrt_ab_t, inv_sqrt_one_minus_ab_t, sqrt_ab_s,
    direction_coef, noise_std) per jump; ``z`` is the already-scaled initial
    latent and is consumed destructively.
    """
    n_layers = dims.size - 1
    weights = [
        w_flat[w_off[i]:w_off[i + 1]].reshape(dims[i], dims[i + 1])
        for i in range(n_layers)
    ]
    biases = [b_flat[b_off[i]:b_off[i + 1]] for i in range(n_layers)]
    m = z.shape[0]
    n_jumps = step_const.shape[0]
    for i in range(n_jumps):
        sq_t, inv_rt, sq_s, direction, noise_std = step_const[i]
        inp = np.concatenate(
            [z, x, np.broadcast_to(temb_grid[i], (m, temb_grid.shape[1]))],
            axis=1,
        )
        h = inp
        for l in range(n_layers):
            h = h @ weights[l] + biases[l]
            if l != n_layers - 1:
                h = gelu(h)
        eps = (z - sq_t * h) * inv_rt
        z = sq_s * h + direction * eps
        if noise_std != 0.0:
            z = z + noise_std * step_noise[i]
    return z
