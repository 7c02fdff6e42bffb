"""Cluster heads mapping between assignment embeddings and probabilities.

Two learned matrices sit on either side of the diffusion model: the
assignment head turns a clean embedding into cluster logits, and the target
map turns a cluster distribution back into an embedding for the denoiser to
regress onto.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, ValidationError

_NORM_EPS = 1e-12


@dataclass
class HeadParams:
    """assignment: (K, d) logit head; targets: (d, K) target directions."""

    assignment: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        if self.assignment.ndim != 2 or self.targets.ndim != 2:
            raise ValidationError("head matrices must be 2-d")
        k, d = self.assignment.shape
        if self.targets.shape != (d, k):
            raise ValidationError(
                f"targets must have shape ({d}, {k}), got {self.targets.shape}"
            )

    @property
    def n_clusters(self) -> int:
        return self.assignment.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.assignment.shape[1]


def init_heads(n_clusters: int, embed_dim: int, rng: np.random.Generator) -> HeadParams:
    """Seeded initialization: uniform fan-in head, unit-norm target columns."""
    if n_clusters < 2:
        raise ValidationError(f"n_clusters must be >= 2, got {n_clusters}")
    if embed_dim < 1:
        raise ValidationError(f"embed_dim must be >= 1, got {embed_dim}")
    limit = 1.0 / np.sqrt(embed_dim)
    assignment = rng.uniform(-limit, limit, size=(n_clusters, embed_dim))
    targets = rng.standard_normal((embed_dim, n_clusters))
    targets /= np.linalg.norm(targets, axis=0, keepdims=True)
    return HeadParams(assignment=assignment, targets=targets)


def logits_matrix(heads: HeadParams, z: np.ndarray) -> np.ndarray:
    """Raw cluster logits z @ assignment^T for one embedding or a batch.

    The same logits feed both the row softmax (per-item probabilities) and
    the column softmax used by the regularized loss, so they are exposed
    untempered.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != heads.embed_dim:
        raise ValidationError(
            f"z last dimension must be {heads.embed_dim}, got {z.shape[-1]}"
        )
    return z @ heads.assignment.T


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cluster_probs(heads: HeadParams, z: np.ndarray, tau: float) -> np.ndarray:
    """Tempered assignment distribution softmax(z @ assignment^T / tau)."""
    if tau <= 0.0 or not np.isfinite(tau):
        raise ValidationError(f"tau must be positive and finite, got {tau}")
    return softmax_rows(logits_matrix(heads, z) / tau)


def target_embedding(heads: HeadParams, u: np.ndarray) -> np.ndarray:
    """Map cluster weights u to the embedding sqrt(d) E u / ||E u||.

    Output rows always have norm exactly sqrt(d); the direction depends
    only on the ray of u (positive rescaling of u changes nothing).  Raises
    NumericalFailure when u lies in the target map's null space, which
    during training signals a collapsed head rather than a caller bug.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != heads.n_clusters:
        raise ValidationError(
            f"u last dimension must be {heads.n_clusters}, got {u.shape[-1]}"
        )
    v = u @ heads.targets.T
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm < _NORM_EPS):
        raise NumericalFailure("target_embedding: E u has (near-)zero norm")
    return np.sqrt(heads.embed_dim) * v / norm
