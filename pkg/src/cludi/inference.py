"""Monte-Carlo classification with trained models.

Each item is classified by running several independent stochastic reverse
chains conditioned on its features and averaging the tempered assignment
distributions of the resulting clean embeddings.  Every (item, chain) pair
owns its own deterministic random stream, so results are identical whether
items are classified one at a time, in one large batch, or in any
partition — and independent of how the batch is chunked internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import run_chains
from .diffusion import make_time_grid
from .errors import ValidationError
from .heads import softmax_rows
from .metrics import ari, clustering_accuracy, marginal_entropy, nmi

# Per-chunk cap on pre-drawn noise, in bytes; chunking never changes results.
_NOISE_BUDGET = 64 * 1024 * 1024


@dataclass(frozen=True)
class InferenceConfig:
    """How to run classification chains.

    n_steps counts grid points (the grid spans horizon..0, so n_steps
    points make n_steps - 1 denoising jumps).  deterministic switches all
    chains to noise-free updates, collapsing the Monte-Carlo average.
    """

    n_chains: int = 8
    n_steps: int = 100
    seed: int = 0
    deterministic: bool = False

    def __post_init__(self) -> None:
        if self.n_chains < 1:
            raise ValidationError("n_chains must be >= 1")
        if self.n_steps < 2:
            raise ValidationError("n_steps must be >= 2")


def _chain_rng(seed: int, item_index: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(item_index, chain))
    )


def _run_item_chains(model, x: np.ndarray, config: InferenceConfig,
                     item_indices: np.ndarray) -> np.ndarray:
    """Clean embeddings (N, B, d) for the given items.

    item_indices are the items' global stream identities; they, not array
    positions, determine the random draws.
    """
    cfg = model.config
    grid = make_time_grid(cfg.horizon, config.n_steps)
    n_jumps = grid.size - 1
    n_items = x.shape[0]
    b = config.n_chains
    d = cfg.embed_dim

    per_item = b * (n_jumps + 1) * d * 8
    chunk_items = max(1, int(_NOISE_BUDGET // max(per_item, 1)))
    out = np.empty((n_items, b, d))
    for start in range(0, n_items, chunk_items):
        stop = min(start + chunk_items, n_items)
        rows = (stop - start) * b
        z_init = np.empty((rows, d))
        step_noise = np.empty((n_jumps, rows, d))
        for local, item in enumerate(range(start, stop)):
            for chain in range(b):
                rng = _chain_rng(config.seed, int(item_indices[item]), chain)
                row = local * b + chain
                z_init[row] = rng.standard_normal(d)
                step_noise[:, row, :] = rng.standard_normal((n_jumps, d))
        x_rep = np.repeat(x[start:stop], b, axis=0)
        z0 = run_chains(model.denoiser, x_rep, grid, model.schedule,
                        cfg.scale, z_init, step_noise,
                        deterministic=config.deterministic)
        out[start:stop] = z0.reshape(stop - start, b, d)
    return out


def _check_features(model, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.config.feature_dim:
        raise ValidationError(
            f"features must be (N, {model.config.feature_dim}), got {x.shape}"
        )
    if x.shape[0] < 1:
        raise ValidationError("features must be non-empty")
    return x


def classify(model, x: np.ndarray, config: InferenceConfig = InferenceConfig(),
             item_index: int = 0):
    """Classify a single feature vector.

    Returns (probs (K,), label).  item_index selects the item's random
    stream; classify(X[i], item_index=i) equals row i of
    classify_batch(X).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"x must be 1-d, got shape {x.shape}")
    probs, labels = classify_batch(model, x[None, :], config,
                                   item_indices=np.array([item_index]))
    return probs[0], int(labels[0])


def classify_batch(model, x: np.ndarray,
                   config: InferenceConfig = InferenceConfig(),
                   item_indices=None):
    """Classify N items; returns (probs (N, K), labels (N,)).

    item_indices defaults to 0..N-1.  Results for each row depend only on
    its own features and stream identity, never on the other rows.
    """
    x = _check_features(model, x)
    n_items = x.shape[0]
    if item_indices is None:
        item_indices = np.arange(n_items)
    item_indices = np.asarray(item_indices)
    if item_indices.shape != (n_items,):
        raise ValidationError("item_indices must have one entry per row")
    z0 = _run_item_chains(model, x, config, item_indices)
    flat = z0.reshape(n_items * config.n_chains, model.config.embed_dim)
    probs = softmax_rows((flat @ model.heads.assignment.T) / model.config.tau)
    probs = probs.reshape(n_items, config.n_chains, -1).mean(axis=1)
    return probs, np.argmax(probs, axis=1)


def export_embeddings(model, x: np.ndarray,
                      config: InferenceConfig = InferenceConfig()):
    """Mean clean embedding per item over chains.

    Returns (embeddings (N, d), probs (N, K), labels (N,)); probs/labels
    come from the same chains as the embeddings.
    """
    x = _check_features(model, x)
    n_items = x.shape[0]
    z0 = _run_item_chains(model, x, config, np.arange(n_items))
    flat = z0.reshape(n_items * config.n_chains, model.config.embed_dim)
    probs = softmax_rows((flat @ model.heads.assignment.T) / model.config.tau)
    probs = probs.reshape(n_items, config.n_chains, -1).mean(axis=1)
    return z0.mean(axis=1), probs, np.argmax(probs, axis=1)


def evaluate(model, x: np.ndarray, labels,
             config: InferenceConfig = InferenceConfig()) -> dict:
    """Clustering quality of the model's predictions against true labels.

    Returns {"acc", "nmi", "ari", "marginal_entropy", "labels"}.
    """
    labels = np.asarray(labels)
    x = _check_features(model, x)
    if labels.shape != (x.shape[0],):
        raise ValidationError("labels must have one entry per row")
    _, pred = classify_batch(model, x, config)
    return {
        "acc": clustering_accuracy(labels, pred),
        "nmi": nmi(labels, pred),
        "ari": ari(labels, pred),
        "marginal_entropy": marginal_entropy(pred),
        "labels": pred,
    }
