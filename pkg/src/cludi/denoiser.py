"""Conditional denoiser MLP and its optimizer.

The network predicts the clean assignment embedding from a noisy latent,
the conditioning feature vector, and a sinusoidal encoding of the timestep,
all concatenated into one input row.  Everything is float64 numpy; the
hand-written backward pass in the trainer relies on the exact activation
formulas here, so both backends of the sampling kernel use the same tanh
form of GELU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715


def gelu(x: np.ndarray) -> np.ndarray:
    """tanh-form GELU, 0.5 x (1 + tanh(c (x + a x^3)))."""
    inner = _GELU_C * (x + _GELU_A * x * x * x)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """Derivative of the tanh-form GELU."""
    inner = _GELU_C * (x + _GELU_A * x * x * x)
    t = np.tanh(inner)
    sech2 = 1.0 - t * t
    return 0.5 * (1.0 + t) + 0.5 * x * sech2 * _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)


def time_embedding(t, time_dim: int, horizon: int) -> np.ndarray:
    """Sinusoidal timestep features, [sin block | cos block].

    Frequencies fall geometrically from 1 to 1/horizon, so the slowest
    component spans the whole horizon within one radian while the fastest
    separates adjacent integer steps.  ``t`` may be a scalar or an array;
    the embedding axis is appended last.
    """
    if time_dim < 2 or time_dim % 2 != 0:
        raise ValidationError(f"time_dim must be even and >= 2, got {time_dim}")
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    t_arr = np.asarray(t, dtype=np.float64)
    half = time_dim // 2
    exponents = np.arange(half) / max(half - 1, 1)
    freqs = float(horizon) ** -exponents
    angles = t_arr[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


@dataclass
class DenoiserParams:
    """MLP weights plus the sizes needed to build its input rows.

    weights[i] has shape (fan_in, fan_out); hidden layers apply GELU, the
    final layer is linear with output width embed_dim.
    """

    embed_dim: int
    feature_dim: int
    time_dim: int
    horizon: int
    weights: list
    biases: list

    def __post_init__(self) -> None:
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValidationError("weights and biases must pair up")
        expect_in = self.embed_dim + self.feature_dim + self.time_dim
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValidationError(f"layer {i} has inconsistent shapes")
            if w.shape[0] != expect_in:
                raise ValidationError(
                    f"layer {i} expects fan-in {expect_in}, got {w.shape[0]}"
                )
            expect_in = w.shape[1]
        if expect_in != self.embed_dim:
            raise ValidationError(
                f"final layer must output embed_dim={self.embed_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.embed_dim + self.feature_dim + self.time_dim

    def parameter_list(self) -> list:
        """Flat [W0, b0, W1, b1, ...] view used by the optimizer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_denoiser(
    embed_dim: int,
    feature_dim: int,
    time_dim: int,
    hidden_sizes: tuple,
    horizon: int,
    rng: np.random.Generator,
) -> DenoiserParams:
    """Seeded scaled-uniform fan-in initialization, zero biases."""
    if embed_dim < 1 or feature_dim < 1:
        raise ValidationError("embed_dim and feature_dim must be >= 1")
    if not hidden_sizes or any(h < 1 for h in hidden_sizes):
        raise ValidationError(f"hidden_sizes must be non-empty positive, "
                              f"got {hidden_sizes}")
    dims = [embed_dim + feature_dim + time_dim, *hidden_sizes, embed_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenoiserParams(
        embed_dim=embed_dim,
        feature_dim=feature_dim,
        time_dim=time_dim,
        horizon=horizon,
        weights=weights,
        biases=biases,
    )


def _stack_inputs(params: DenoiserParams, z_t, x, t):
    z_t = np.asarray(z_t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    single = z_t.ndim == 1
    z2 = np.atleast_2d(z_t)
    x2 = np.atleast_2d(x)
    t2 = np.atleast_1d(np.asarray(t))
    if z2.shape[1] != params.embed_dim:
        raise ValidationError(
            f"z_t width must be {params.embed_dim}, got {z2.shape[1]}"
        )
    if x2.shape[1] != params.feature_dim:
        raise ValidationError(
            f"x width must be {params.feature_dim}, got {x2.shape[1]}"
        )
    if t2.shape == (1,) and z2.shape[0] > 1:
        t2 = np.broadcast_to(t2, (z2.shape[0],))
    if not (z2.shape[0] == x2.shape[0] == t2.shape[0]):
        raise ValidationError(
            f"row counts differ: z_t {z2.shape[0]}, x {x2.shape[0]}, "
            f"t {t2.shape[0]}"
        )
    emb = time_embedding(t2, params.time_dim, params.horizon)
    return np.concatenate([z2, x2, emb], axis=1), single


def forward_cached(params: DenoiserParams, z_t, x, t):
    """Batched forward pass keeping pre- and post-activation caches.

    Returns (prediction, cache); the cache carries the per-layer
    pre-activations and activations the backward pass consumes.
    """
    inp, single = _stack_inputs(params, z_t, x, t)
    activations = [inp]
    pre = []
    h = inp
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        s = h @ w + b
        pre.append(s)
        h = s if i == last else gelu(s)
        activations.append(h)
    out = h[0] if single else h
    return out, {"activations": activations, "pre": pre, "single": single}


def denoiser_forward(params: DenoiserParams, z_t, x, t) -> np.ndarray:
    """Predict the clean embedding for one row or a batch of rows.

    Accepts (d,), (n,), scalar t or (M, d), (M, n), (M,) t; a scalar t is
    broadcast across a batch.  Pure: inputs are never written to.
    """
    out, _ = forward_cached(params, z_t, x, t)
    return out


@dataclass
class OptimizerState:
    """Adam moments, one pair per parameter array."""

    step: int
    m: list
    v: list


def init_optimizer(params_list: list) -> OptimizerState:
    return OptimizerState(
        step=0,
        m=[np.zeros_like(p) for p in params_list],
        v=[np.zeros_like(p) for p in params_list],
    )


def adam_step(
    params_list: list,
    grads_list: list,
    state: OptimizerState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update; returns (new_params, new_state).

    Pure: input arrays and the input state are left untouched.
    """
    if len(params_list) != len(grads_list) or len(params_list) != len(state.m):
        raise ValidationError("parameter, gradient and state lengths differ")
    if lr <= 0.0 or not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0 or eps <= 0.0:
        raise ValidationError("invalid Adam hyperparameters")
    for p, g in zip(params_list, grads_list):
        if p.shape != g.shape:
            raise ValidationError(
                f"gradient shape {g.shape} does not match parameter {p.shape}"
            )
    step = state.step + 1
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params_list, grads_list, state.m, state.v):
        m_new = beta1 * m + (1.0 - beta1) * g
        v_new = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m_new / bc1
        v_hat = v_new / bc2
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m_new)
        new_v.append(v_new)
    return new_params, OptimizerState(step=step, m=new_m, v=new_v)
