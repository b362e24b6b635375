"""Discrete attraction-repulsion energies for neighbor embeddings.

The KL objective over a point configuration splits exactly into a data-only
term, a kernel-weighted attraction, and a log-mean-Student-t repulsion:

    total_kl = data_shifted + attract + repulse

with the repulsion normalized over distinct pairs so the identity is exact.
A rescaled objective multiplies the attraction by 1/h^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bandwidth import BandwidthProfile
from .density import Dataset

_IDENTITY_RTOL = 1e-9


@dataclass
class Embedding:
    """n embedded points in R^m."""

    y: np.ndarray
    provenance: str = "explicit"

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if not np.all(np.isfinite(self.y)):
            raise ValueError("embedding entries must be finite")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return self.y.shape[1]


@dataclass
class AffinityMatrix:
    """Symmetric pair affinities p_ij plus the row-normalized conditionals."""

    p: np.ndarray
    conditionals: np.ndarray
    profile: BandwidthProfile | None = None


@dataclass
class EnergyBreakdown:
    attract: float
    repulse: float
    data_shifted: float
    total_kl: float
    rescaled_total: float | None = None

    def identity_residual(self) -> float:
        return abs(self.total_kl - (self.data_shifted + self.attract + self.repulse))

    def to_json(self) -> dict:
        return {"attract": self.attract, "repulse": self.repulse,
                "data_shifted": self.data_shifted, "total_kl": self.total_kl,
                "rescaled_total": self.rescaled_total}


def sq_dists(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    b = a if b is None else b
    d2 = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _conditionals(X: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Row-stochastic Gaussian conditionals with the self term excluded."""
    expo = -sq_dists(X) / (2.0 * sigmas[:, None] ** 2)
    np.fill_diagonal(expo, -np.inf)
    m = expo.max(axis=1, keepdims=True)
    w = np.exp(expo - m)
    return w / w.sum(axis=1, keepdims=True)


def affinities_p(dataset: Dataset, profile: BandwidthProfile) -> AffinityMatrix:
    """Symmetrized affinities p_ij = (p_{j|i} + p_{i|j}) / (2n)."""
    n = dataset.n
    if n < 2:
        raise ValueError("need at least 2 points")
    if profile.n != n:
        raise ValueError("profile length must match dataset size")
    cond = _conditionals(dataset.points, profile.sigmas)
    p = (cond + cond.T) / (2.0 * n)
    return AffinityMatrix(p=p, conditionals=cond, profile=profile)


def affinities_q(embedding: Embedding) -> np.ndarray:
    """Student-t pair affinities q_ij normalized over distinct pairs."""
    if embedding.n < 2:
        raise ValueError("need at least 2 points")
    w = 1.0 / (1.0 + sq_dists(embedding.y))
    np.fill_diagonal(w, 0.0)
    return w / w.sum()


def kl_energy(P: AffinityMatrix, embedding: Embedding) -> float:
    """sum_{i != j} p_ij log(p_ij / q_ij) with 0 log 0 = 0."""
    p = P.p
    if p.shape[0] != embedding.n:
        raise ValueError("shape mismatch between affinities and embedding")
    q = affinities_q(embedding)
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def decompose(dataset: Dataset, profile: BandwidthProfile,
              embedding: Embedding, include_diagonal: bool = False) -> EnergyBreakdown:
    """Exact attraction/repulsion/data split of the KL objective.

    ``include_diagonal=True`` switches the repulsion to the variant whose pair
    sum includes the diagonal (each self pair contributing a unit kernel);
    the decomposition identity is then no longer exact.
    """
    n = dataset.n
    P = affinities_p(dataset, profile)
    dy2 = sq_dists(embedding.y)
    log_kernel = np.log1p(dy2)
    attract = float(np.sum(P.conditionals * log_kernel) / n)
    w = 1.0 / (1.0 + dy2)
    np.fill_diagonal(w, 0.0)
    s = float(w.sum())
    repulse = math.log((s + (n if include_diagonal else 0.0)) / n**2)
    mask = P.p > 0
    data_shifted = float(np.sum(P.p[mask] * np.log(P.p[mask]))) + 2.0 * math.log(n)
    total = kl_energy(P, embedding)
    return EnergyBreakdown(attract=attract, repulse=repulse,
                           data_shifted=data_shifted, total_kl=total,
                           rescaled_total=attract / profile.h**2 + repulse)


def rescaled_energy(dataset: Dataset, profile: BandwidthProfile,
                    embedding: Embedding) -> float:
    """attract / h^2 + repulse."""
    if profile.h <= 0:
        raise ValueError("profile.h must be positive")
    br = decompose(dataset, profile, embedding)
    return br.attract / profile.h**2 + br.repulse


def grad_discrete(dataset: Dataset, profile: BandwidthProfile,
                  embedding: Embedding, variant: str = "classic") -> np.ndarray:
    """Analytic gradient of attract + repulse with respect to the embedding.

    ``variant="rescaled"`` scales the attraction part by 1/h^2.
    """
    if variant not in ("classic", "rescaled"):
        raise ValueError("variant must be 'classic' or 'rescaled'")
    P = affinities_p(dataset, profile)
    ga, gr = _grad_parts(P.conditionals, embedding.y)
    if variant == "rescaled":
        ga = ga / profile.h**2
    return ga + gr


def _grad_parts(cond: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(attraction gradient, repulsion gradient) in matrix form."""
    n = y.shape[0]
    w = 1.0 / (1.0 + sq_dists(y))
    np.fill_diagonal(w, 0.0)
    m = (cond + cond.T) * w
    ga = (2.0 / n) * (m.sum(axis=1)[:, None] * y - m @ y)
    w2 = w * w
    s = w.sum()
    gr = (-4.0 / s) * (w2.sum(axis=1)[:, None] * y - w2 @ y)
    return ga, gr


# -- streaming variants for large n (no n x n allocation) -------------------

def attraction_value(X: np.ndarray, sigmas: np.ndarray, Y: np.ndarray,
                     chunk: int = 2048) -> float:
    """Attraction term computed in row blocks; matches decompose().attract."""
    n = X.shape[0]
    total = 0.0
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        d2 = sq_dists(X[start:stop], X)
        expo = -d2 / (2.0 * sigmas[start:stop, None] ** 2)
        rows = np.arange(start, stop)
        expo[rows - start, rows] = -np.inf
        mx = expo.max(axis=1, keepdims=True)
        w = np.exp(expo - mx)
        w /= w.sum(axis=1, keepdims=True)
        total += float(np.sum(w * np.log1p(sq_dists(Y[start:stop], Y))))
    return total / n


def repulsion_value(Y: np.ndarray, chunk: int = 2048) -> float:
    """Distinct-pair repulsion term; matches decompose().repulse."""
    n = Y.shape[0]
    s = 0.0
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        w = 1.0 / (1.0 + sq_dists(Y[start:stop], Y))
        rows = np.arange(start, stop)
        w[rows - start, rows] = 0.0
        s += float(w.sum())
    return math.log(s / n**2)
