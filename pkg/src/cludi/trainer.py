"""Self-distillation training loop.

Teacher and student share every parameter.  Each step the teacher runs
short reverse chains on clean features to propose cluster assignments and
target embeddings; those targets are frozen (stored read-only, never
differentiated) and the student learns to denoise toward them from
augmented views in a single network evaluation.  Gradients flow to the
denoiser through both loss terms, to the assignment head only through the
student's probabilities, and to the target map only through the regression
target, which is recomputed live from the frozen teacher distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import inference
from ._kernels import run_chains
from .denoiser import (
    DenoiserParams,
    OptimizerState,
    adam_step,
    forward_cached,
    gelu_grad,
    init_denoiser,
    init_optimizer,
)
from .diffusion import NoiseSchedule, build_sqrt_schedule, make_time_grid, min_snr_weight
from .errors import NumericalFailure, ValidationError
from .heads import HeadParams, init_heads, softmax_rows, target_embedding
from .losses import LossConfig, class_loss_parts, diffusion_loss, total_loss

_TINY = 1e-300


@dataclass(frozen=True)
class TrainConfig:
    """Everything that defines a training run; defaults follow the method's
    reference setting (embedding width 64, noise variance 25, weight 50)."""

    n_clusters: int
    feature_dim: int
    embed_dim: int = 64
    hidden_sizes: tuple = (512, 512)
    time_dim: int = 64
    horizon: int = 1000
    schedule_shift: float = 1e-4
    schedule_floor: float = 1e-5
    f2: float = 25.0
    tau: float = 0.1
    tau_col: float = 0.05
    lam: float = 50.0
    gamma: float = 5.0
    snr_clip_mode: str = "max"
    naive_ce_ablation: bool = False
    n_views: int = 4
    teacher_steps: int = 25
    drop_prob: float = 0.2
    noise_var_range: tuple = (0.1, 0.3)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_items: int = 100
    epochs: int = 100
    seed: int = 0
    eval_every: int = 0
    eval_chains: int = 4
    eval_steps: int = 100

    def __post_init__(self) -> None:
        if self.n_clusters < 2:
            raise ValidationError("n_clusters must be >= 2")
        if self.feature_dim < 1 or self.embed_dim < 1:
            raise ValidationError("feature_dim and embed_dim must be >= 1")
        if self.f2 <= 0.0:
            raise ValidationError(f"f2 must be > 0, got {self.f2}")
        if self.tau <= 0.0 or self.tau_col <= 0.0:
            raise ValidationError("temperatures must be > 0")
        if self.n_views < 1:
            raise ValidationError("n_views must be >= 1")
        if not 2 <= self.teacher_steps <= self.horizon + 1:
            raise ValidationError("teacher_steps out of range")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValidationError("drop_prob must be in [0, 1)")
        lo, hi = self.noise_var_range
        if lo < 0.0 or hi < lo:
            raise ValidationError("noise_var_range must satisfy 0 <= lo <= hi")
        if self.lr <= 0.0 or self.batch_items < 1 or self.epochs < 0:
            raise ValidationError("invalid lr, batch_items, or epochs")
        if self.eval_every < 0 or self.eval_chains < 1:
            raise ValidationError("invalid eval settings")
        # delegate loss-field validation
        self.loss_config()

    def loss_config(self) -> LossConfig:
        return LossConfig(
            lam=self.lam,
            gamma=self.gamma,
            snr_clip_mode=self.snr_clip_mode,
            naive_ce_ablation=self.naive_ce_ablation,
        )

    @property
    def scale(self) -> float:
        """Std multiplier of every latent Gaussian, sqrt(f2)."""
        return float(np.sqrt(self.f2))


@dataclass
class Model:
    config: TrainConfig
    schedule: NoiseSchedule
    denoiser: DenoiserParams
    heads: HeadParams


def init_model(config: TrainConfig) -> Model:
    """Build a freshly initialized model; fully determined by config.seed."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    schedule = build_sqrt_schedule(config.horizon, config.schedule_shift,
                                   config.schedule_floor)
    denoiser = init_denoiser(
        config.embed_dim, config.feature_dim, config.time_dim,
        config.hidden_sizes, config.horizon, rng,
    )
    heads = init_heads(config.n_clusters, config.embed_dim, rng)
    return Model(config=config, schedule=schedule, denoiser=denoiser,
                 heads=heads)


def model_parameters(model: Model) -> list:
    """Flat trainable-parameter list: MLP layers, then both head matrices."""
    return [*model.denoiser.parameter_list(), model.heads.assignment,
            model.heads.targets]


def augment_features(
    x: np.ndarray,
    drop_prob: float,
    noise_var_range: tuple,
    rng: np.random.Generator,
) -> np.ndarray:
    """One augmented view: coordinate dropout, then additive Gaussian noise
    with a single variance drawn once for the whole view."""
    if not 0.0 <= drop_prob < 1.0:
        raise ValidationError(f"drop_prob must be in [0, 1), got {drop_prob}")
    lo, hi = noise_var_range
    if lo < 0.0 or hi < lo:
        raise ValidationError("noise_var_range must satisfy 0 <= lo <= hi")
    x = np.asarray(x, dtype=np.float64)
    keep = rng.random(x.shape) >= drop_prob
    var = rng.uniform(lo, hi)
    noise = rng.standard_normal(x.shape)
    return x * keep + np.sqrt(var) * noise


def _augment_batch(x_rep: np.ndarray, config: TrainConfig,
                   rng: np.random.Generator) -> np.ndarray:
    m, n = x_rep.shape
    keep = rng.random((m, n)) >= config.drop_prob
    lo, hi = config.noise_var_range
    var = rng.uniform(lo, hi, size=(m, 1))
    noise = rng.standard_normal((m, n))
    return x_rep * keep + np.sqrt(var) * noise


@dataclass
class TrainingBatch:
    """One minibatch of M = items x views rows, item-major.

    The teacher-produced arrays (z0_target, u_target, teacher_logits) are
    frozen constants: construction refuses them unless they are marked
    read-only, which is how detachment is made structural rather than a
    convention.
    """

    x_aug: np.ndarray         # (M, n) augmented student views
    t: np.ndarray             # (M,) timesteps in [1, horizon]
    z_t: np.ndarray           # (M, d) noised targets
    z0_target: np.ndarray     # (M, d) frozen teacher targets
    u_target: np.ndarray      # (M, K) frozen teacher distributions
    teacher_logits: np.ndarray  # (M, K) frozen raw teacher logits
    weights: np.ndarray       # (M,) per-row SNR weights

    def __post_init__(self) -> None:
        m = self.x_aug.shape[0]
        shapes = {
            "t": (self.t, 1), "z_t": (self.z_t, 2),
            "z0_target": (self.z0_target, 2), "u_target": (self.u_target, 2),
            "teacher_logits": (self.teacher_logits, 2),
            "weights": (self.weights, 1),
        }
        for name, (arr, ndim) in shapes.items():
            if arr.ndim != ndim or arr.shape[0] != m:
                raise ValidationError(f"{name} must have {m} rows")
        for name in ("z0_target", "u_target", "teacher_logits"):
            if getattr(self, name).flags.writeable:
                raise ValidationError(
                    f"{name} must be read-only (teacher outputs are frozen)"
                )
        if not np.issubdtype(self.t.dtype, np.integer) or np.any(self.t < 1):
            raise ValidationError("t must be integers >= 1")

    @property
    def size(self) -> int:
        return self.x_aug.shape[0]


def teacher_generate(model: Model, x_batch: np.ndarray,
                     rng: np.random.Generator):
    """Run the teacher's reverse chains on clean features.

    Returns (z0_raw, u_target, z0_target, teacher_logits), each with
    n_views rows per item (item-major) and all marked read-only.  Draw
    order from ``rng``: initial latents (M, d), then per-jump noise.
    """
    cfg = model.config
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 2 or x_batch.shape[1] != cfg.feature_dim:
        raise ValidationError(
            f"x_batch must be (N, {cfg.feature_dim}), got {x_batch.shape}"
        )
    x_rep = np.repeat(x_batch, cfg.n_views, axis=0)
    m = x_rep.shape[0]
    grid = make_time_grid(cfg.horizon, cfg.teacher_steps)
    z_init = rng.standard_normal((m, cfg.embed_dim))
    step_noise = rng.standard_normal((grid.size - 1, m, cfg.embed_dim))
    z0_raw = run_chains(model.denoiser, x_rep, grid, model.schedule,
                        cfg.scale, z_init, step_noise)
    teacher_logits = z0_raw @ model.heads.assignment.T
    u_target = softmax_rows(teacher_logits / cfg.tau)
    # recomputed from u inside backprop for the E gradient; this copy is the
    # frozen snapshot consumed by the forward pass
    z0_target = target_embedding(model.heads, u_target)
    for arr in (z0_raw, u_target, z0_target, teacher_logits):
        arr.flags.writeable = False
    return z0_raw, u_target, z0_target, teacher_logits


def student_forward(denoiser: DenoiserParams, heads: HeadParams,
                    batch: TrainingBatch, tau: float):
    """Single denoiser evaluation per row plus the tempered assignment.

    Returns (z_pred (M, d), probs (M, K)); no sampling chain is involved.
    """
    z_pred, _ = forward_cached(denoiser, batch.z_t, batch.x_aug, batch.t)
    probs = softmax_rows((z_pred @ heads.assignment.T) / tau)
    return z_pred, probs


@dataclass
class GradientBundle:
    """Gradients for every trainable parameter, shaped like the parameters.

    Contains entries only for parameters; teacher targets are constants and
    have no slot here by construction.
    """

    weights: list
    biases: list
    assignment: np.ndarray
    targets: np.ndarray

    def parameter_list(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return [*out, self.assignment, self.targets]


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return num / np.maximum(den, _TINY)


def backprop(denoiser: DenoiserParams, heads: HeadParams,
             batch: TrainingBatch, config: LossConfig,
             tau: float, tau_col: float):
    """Loss and exact gradients of the combined objective on one batch.

    The regression target sqrt(d) E u / ||E u|| is recomputed live from the
    frozen teacher distribution, so the target map E is trained by the
    diffusion term only; the assignment head A is trained by the
    classification term only (through the student softmax); the denoiser
    receives both.  Gradients are averaged over rows with the stored
    per-row SNR weights, matching total_loss exactly.
    """
    m = batch.size
    d = denoiser.embed_dim
    a_head = heads.assignment
    e_map = heads.targets

    z_pred, cache = forward_cached(denoiser, batch.z_t, batch.x_aug, batch.t)
    student_logits = z_pred @ a_head.T
    u_hat = softmax_rows(student_logits / tau)
    parts = class_loss_parts(batch.teacher_logits, u_hat, config, tau, tau_col)

    v = batch.u_target @ e_map.T
    rho = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(rho < 1e-12):
        raise NumericalFailure("backprop: target map collapsed (||E u|| ~ 0)")
    target = np.sqrt(d) * v / rho
    dif = diffusion_loss(target, z_pred)
    loss = total_loss(dif, parts["per_item"], batch.weights, config.lam)

    w_m = batch.weights / m
    d_zpred = (2.0 * w_m)[:, None] * (z_pred - target)
    d_target = (2.0 * w_m)[:, None] * (target - z_pred)

    if config.lam > 0.0:
        if config.naive_ce_ablation:
            coef = (config.lam * w_m)[:, None]
            keep = ~parts["floored_u_hat"]
            d_uhat = -coef * parts["u"] * keep
            d_uhat = _safe_div(d_uhat, u_hat)
        else:
            coef = (0.5 * config.lam * w_m)[:, None]
            s_hat = parts["s_hat"]
            colsum = np.maximum(parts["u_hat_colsum"], _TINY)[None, :]
            ratio = float(m) / u_hat.shape[1]
            # -sum q log s_hat(floored): d/d log s_hat, masked where floored
            d_logs = -coef * parts["q"] * ~parts["floored_s"]
            d_uhat = _safe_div(d_logs, u_hat) - d_logs.sum(axis=0) / colsum
            # -sum s_hat log q: d/d s_hat, then through the column rescale
            d_shat = -coef * parts["log_q"]
            d_uhat += ratio * d_shat / colsum
            d_uhat -= (d_shat * s_hat).sum(axis=0)[None, :] / colsum
        # tempered softmax backward
        inner = d_uhat * u_hat
        d_logits = (inner - u_hat * inner.sum(axis=1, keepdims=True)) / tau
        d_zpred = d_zpred + d_logits @ a_head
        d_assignment = d_logits.T @ z_pred
    else:
        d_assignment = np.zeros_like(a_head)

    v_hat = v / rho
    proj = np.sum(d_target * v_hat, axis=1, keepdims=True)
    d_v = (np.sqrt(d) / rho) * (d_target - v_hat * proj)
    d_targets_map = d_v.T @ batch.u_target

    # MLP backward
    weights_g = [None] * len(denoiser.weights)
    biases_g = [None] * len(denoiser.biases)
    delta = d_zpred
    acts = cache["activations"]
    pre = cache["pre"]
    for layer in range(len(denoiser.weights) - 1, -1, -1):
        weights_g[layer] = acts[layer].T @ delta
        biases_g[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ denoiser.weights[layer].T) * gelu_grad(pre[layer - 1])

    return loss, GradientBundle(
        weights=weights_g, biases=biases_g,
        assignment=d_assignment, targets=d_targets_map,
    )


def train_step(model: Model, opt_state: OptimizerState, x_batch: np.ndarray,
               rng: np.random.Generator):
    """One teacher-student-update cycle; returns (model, opt_state, loss).

    Pure in its array inputs: new parameter arrays are produced, nothing is
    updated in place.
    """
    cfg = model.config
    _, u_target, z0_target, teacher_logits = teacher_generate(model, x_batch, rng)
    m = u_target.shape[0]
    x_rep = np.repeat(np.asarray(x_batch, dtype=np.float64), cfg.n_views, axis=0)
    x_aug = _augment_batch(x_rep, cfg, rng)
    t = rng.integers(1, cfg.horizon + 1, size=m)
    ab = model.schedule.alpha_bar[t][:, None]
    z_t = (np.sqrt(ab) * z0_target
           + np.sqrt((1.0 - ab) * cfg.f2) * rng.standard_normal((m, cfg.embed_dim)))
    weights = min_snr_weight(model.schedule, t, cfg.gamma, cfg.snr_clip_mode)
    batch = TrainingBatch(
        x_aug=x_aug, t=t, z_t=z_t, z0_target=z0_target, u_target=u_target,
        teacher_logits=teacher_logits, weights=weights,
    )
    loss, grads = backprop(model.denoiser, model.heads, batch,
                           cfg.loss_config(), cfg.tau, cfg.tau_col)
    new_params, new_state = adam_step(
        model_parameters(model), grads.parameter_list(), opt_state,
        lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps,
    )
    n_layer_arrays = 2 * len(model.denoiser.weights)
    new_denoiser = replace(
        model.denoiser,
        weights=new_params[0:n_layer_arrays:2],
        biases=new_params[1:n_layer_arrays:2],
    )
    new_heads = HeadParams(assignment=new_params[-2], targets=new_params[-1])
    new_model = Model(config=cfg, schedule=model.schedule,
                      denoiser=new_denoiser, heads=new_heads)
    return new_model, new_state, loss


def train(model: Model, features: np.ndarray, labels=None):
    """Run the configured number of epochs; returns (model, history).

    History has one row per epoch: dict with epoch, loss (item-weighted
    mean over steps), and nmi/acc/ari (NaN unless labels are given and the
    epoch index hits eval_every).  epochs = 0 returns the model unchanged
    with empty history.
    """
    cfg = model.config
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != cfg.feature_dim:
        raise ValidationError(
            f"features must be (N, {cfg.feature_dim}), got {features.shape}"
        )
    n_items = features.shape[0]
    if n_items < 1:
        raise ValidationError("features must be non-empty")
    if labels is not None and len(labels) != n_items:
        raise ValidationError("labels length must match features")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    opt_state = init_optimizer(model_parameters(model))
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_items)
        total = 0.0
        for start in range(0, n_items, cfg.batch_items):
            chunk = order[start:start + cfg.batch_items]
            model, opt_state, loss = train_step(model, opt_state,
                                                features[chunk], rng)
            total += loss * chunk.size
        row = {"epoch": epoch, "loss": total / n_items,
               "nmi": float("nan"), "acc": float("nan"), "ari": float("nan")}
        if (labels is not None and cfg.eval_every > 0
                and (epoch + 1) % cfg.eval_every == 0):
            report = inference.evaluate(
                model, features, labels,
                inference.InferenceConfig(n_chains=cfg.eval_chains,
                                          n_steps=cfg.eval_steps,
                                          seed=cfg.seed),
            )
            row.update(nmi=report["nmi"], acc=report["acc"], ari=report["ari"])
        history.append(row)
    return model, history
