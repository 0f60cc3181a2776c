"""Cosine-distance classical MDS (and a PCA baseline) for design samples."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .problems import ConfigError

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """A design vector with zero norm has no cosine distance."""


@dataclass
class Embedding2D:
    coords: np.ndarray  # (N, 2)
    eigenvalues: np.ndarray  # the two largest eigenvalues of the Gram matrix, unclamped
    stress_residual: float
    distances: np.ndarray | None = None  # squared distances the embedding came from
    method: str = "cosineMds"


def cosine_distance(a, b) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DomainError("cosine distance is undefined for a zero vector")
    s = float(a @ b) / (na * nb)
    return float(min(max(1.0 - s, 0.0), 2.0))


def cosine_distance_matrix(X) -> np.ndarray:
    """Squared cosine distances ``D_ij = (1 - s_ij)^2`` between the rows of ``X``."""
    X = np.asarray(X, float)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise DomainError("cosine distance is undefined for a zero vector")
    Xn = X / norms[:, None]
    S = Xn @ Xn.T
    d = np.clip(1.0 - S, 0.0, 2.0)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d**2


def double_center(D) -> np.ndarray:
    """``G = -1/2 H D H`` with the centering matrix ``H = I - 11^T/N``."""
    D = np.asarray(D, float)
    row = D.mean(axis=1, keepdims=True)
    col = D.mean(axis=0, keepdims=True)
    G = -0.5 * (D - row - col + D.mean())
    return 0.5 * (G + G.T)


def _top_eig(G, dim):
    vals, vecs = np.linalg.eigh(G)
    order = np.argsort(vals)[::-1][:dim]
    vals, vecs = vals[order], vecs[:, order]
    # sign convention: largest-magnitude entry of each eigenvector positive
    for k in range(vecs.shape[1]):
        i = np.argmax(np.abs(vecs[:, k]))
        if vecs[i, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return vals, vecs


def _embed_gram(G, dim, method):
    vals, vecs = _top_eig(G, dim)
    tol = 1e-12 * max(float(np.abs(G).max()), 1e-12)
    if np.any(vals <= tol):
        warnings.warn(f"Gram matrix has non-positive eigenvalue(s) among the top {dim}: {vals}; "
                      "the embedding is degenerate (negative values clamped to 0)", RuntimeWarning, stacklevel=3)
    coords = vecs * np.sqrt(np.maximum(vals, 0.0))
    coords = coords - coords.mean(axis=0)
    resid = float(np.linalg.norm(coords @ coords.T - G))
    return Embedding2D(coords, vals, resid, method=method)


def classical_mds(D, dim: int = 2) -> Embedding2D:
    """Classical MDS of a squared-distance matrix."""
    D = np.asarray(D, float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ConfigError("distance matrix must be square")
    if D.shape[0] < 3:
        raise ConfigError(f"classical MDS needs at least 3 samples, got {D.shape[0]}")
    emb = _embed_gram(double_center(D), dim, "cosineMds")
    emb.distances = D
    return emb


def pca_embed(X, dim: int = 2) -> Embedding2D:
    """Project mean-centred rows of ``X`` on their top principal directions.

    Works through the N x N Gram matrix, so the cost is O(N^2 n).
    """
    X = np.asarray(X, float)
    if X.shape[0] < 3:
        raise ConfigError(f"PCA embedding needs at least 3 samples, got {X.shape[0]}")
    Xc = X - X.mean(axis=0)
    G = Xc @ Xc.T
    return _embed_gram(0.5 * (G + G.T), dim, "pca")


def embed_designs(X, method: str = "cosineMds", dim: int = 2) -> Embedding2D:
    if method == "cosineMds":
        return classical_mds(cosine_distance_matrix(X), dim)
    if method == "pca":
        return pca_embed(X, dim)
    raise ConfigError(f"embedding: unknown method {method!r}; expected 'cosineMds' or 'pca'")
