"""Transform factors derived from sensor geometry and from the data.

G comes from the spectral basis of a thresholded-Gaussian-kernel graph
Laplacian over the n*n spatial grid; H from scattering wavelets of a
lazy random walk over per-longitude aggregate features; T from a
truncated SVD of the mode-3 unfolding of an initial tensor estimate.
G and H depend only on the geometry, never on tensor values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_ops import deterministic_svd, mode_unfold
from .transforms import FactorSet, activation

DEFAULT_TARGET_DEGREE = 8


@dataclass(frozen=True, eq=False)
class SpatialGraph:
    """Pairwise distances plus the kernel-thresholded adjacency."""

    distances: np.ndarray
    adjacency: np.ndarray
    sigma: float
    kappa: float

    @property
    def node_count(self) -> int:
        return self.distances.shape[0]


@dataclass(frozen=True)
class WaveletConfig:
    """Scattering-wavelet settings for the H pipeline.

    ``literal_exponent`` keeps the published power 2**j - 1; switching it
    off uses the conventional dyadic 2**(j-1).
    """

    scales: int = 3
    literal_exponent: bool = True

    def __post_init__(self):
        if self.scales < 1:
            raise ValueError(f"wavelet scales must be >= 1, got {self.scales}")

    def exponent(self, j: int) -> int:
        return 2**j - 1 if self.literal_exponent else 2 ** (j - 1)


def _check_distances(dist: np.ndarray) -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ValueError(f"distance matrix must be square, got {dist.shape}")
    if not np.allclose(dist, dist.T):
        raise ValueError("distance matrix must be symmetric")
    if np.diag(dist).any():
        raise ValueError("distance matrix must have a zero diagonal")
    if (dist < 0).any():
        raise ValueError("distances must be nonnegative")
    return dist


def default_sigma(dist: np.ndarray) -> float:
    """Standard deviation of the off-diagonal distances."""
    dist = _check_distances(dist)
    off = dist[~np.eye(dist.shape[0], dtype=bool)]
    s = float(np.std(off))
    return s if s > 0 else 1.0


def default_kappa(dist: np.ndarray, target_degree: int = DEFAULT_TARGET_DEGREE) -> float:
    """Smallest threshold giving an average node degree of ``target_degree``
    (capped at full connectivity); picked from the sorted distance values.
    """
    dist = _check_distances(dist)
    n = dist.shape[0]
    off = np.sort(dist[~np.eye(n, dtype=bool)])
    target = min(int(target_degree), n - 1)
    k = min(target * n, off.size)
    return float(off[k - 1])


def gaussian_adjacency(dist: np.ndarray, sigma: float, kappa: float) -> np.ndarray:
    """Thresholded Gaussian kernel weights:
    a_ij = exp(-d_ij^2 / (2 sigma^2)) when d_ij <= kappa and i != j, else 0.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    dist = _check_distances(dist)
    a = np.exp(-(dist**2) / (2.0 * sigma**2))
    a[dist > kappa] = 0.0
    np.fill_diagonal(a, 0.0)
    return a


def normalized_laplacian(a: np.ndarray) -> np.ndarray:
    """I - D^{-1/2} A D^{-1/2}; isolated nodes contribute identity rows."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = deg[nz] ** -0.5
    return np.eye(a.shape[0]) - (inv_sqrt[:, None] * a) * inv_sqrt[None, :]


def spatial_factor_g(lap: np.ndarray) -> np.ndarray:
    """Spectral spatial factor: transpose of the left singular vectors of
    the normalized Laplacian, under the frozen sign convention."""
    lap = np.asarray(lap, dtype=np.float64)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise ValueError(f"laplacian must be square, got {lap.shape}")
    u, _, _ = deterministic_svd(lap)
    return u.T


def spatiotemporal_factor_h(a: np.ndarray, n: int, cfg: WaveletConfig | None = None) -> np.ndarray:
    """Longitude-aggregate scattering-wavelet factor.

    Per grid column block k: h_k = mean of adjacency columns (k-1)n..kn;
    Gram matrix Hhat_ij = h_i . h_j; lazy walk Theta = (I + Dhat^{-1} Hhat)/2
    (zero-degree nodes become absorbing identity rows); wavelet stack
    summed over the configured scales; factor = U^T of its SVD.
    """
    cfg = cfg or WaveletConfig()
    a = np.asarray(a, dtype=np.float64)
    n = int(n)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    if a.shape[0] != n * n:
        raise ValueError(f"adjacency must be {n * n}x{n * n} for grid side {n}, got {a.shape}")
    feats = np.stack([a[:, k * n : (k + 1) * n].mean(axis=1) for k in range(n)], axis=1)
    hhat = feats.T @ feats
    deg = hhat.sum(axis=1)
    walk = np.zeros_like(hhat)
    nz = deg > 0
    walk[nz] = hhat[nz] / deg[nz, None]
    walk[~nz] = np.eye(n)[~nz]
    theta = 0.5 * (np.eye(n) + walk)
    acc = np.zeros_like(theta)
    for j in range(1, cfg.scales + 1):
        power = np.linalg.matrix_power(theta, cfg.exponent(j))
        acc += power @ (np.eye(n) - power)
    u, _, _ = deterministic_svd(acc)
    return u.T


def temporal_factor_t(x0: np.ndarray, d: int) -> np.ndarray:
    """Truncated temporal factor: first d left singular vectors of the
    mode-3 unfolding, as a d x n3 matrix with orthonormal rows."""
    x0 = np.asarray(x0, dtype=np.float64)
    n3 = x0.shape[2]
    d = int(d)
    if not 1 <= d <= n3:
        raise ValueError(f"d must satisfy 1 <= d <= {n3}, got {d}")
    x3 = mode_unfold(x0, 3)
    full = x3.shape[1] < n3  # need the orthonormal complement when the unfolding is tall
    u, _, _ = deterministic_svd(x3, full_matrices=full)
    return u[:, :d].T


def data_transform(x: np.ndarray) -> np.ndarray:
    """Square orthogonal mode-3 transform from the data's SVD basis."""
    return temporal_factor_t(x, x.shape[2])


def build_spatial_graph(
    distances: np.ndarray, sigma: float | None = None, kappa: float | None = None
) -> SpatialGraph:
    dist = _check_distances(distances)
    sigma = default_sigma(dist) if sigma is None else float(sigma)
    kappa = default_kappa(dist) if kappa is None else float(kappa)
    return SpatialGraph(dist, gaussian_adjacency(dist, sigma, kappa), sigma, kappa)


def build_factor_set(
    distances: np.ndarray,
    grid_side: int,
    x0: np.ndarray,
    d: int | None = None,
    act: str = "tanh",
    sigma: float | None = None,
    kappa: float | None = None,
    wavelets: WaveletConfig | None = None,
) -> FactorSet:
    """Full factor pipeline: geometry-driven G and H plus data-driven T."""
    graph = build_spatial_graph(distances, sigma, kappa)
    if graph.node_count != grid_side * grid_side:
        raise ValueError(
            f"{graph.node_count} nodes do not fill a {grid_side}x{grid_side} grid"
        )
    g = spatial_factor_g(normalized_laplacian(graph.adjacency))
    h = spatiotemporal_factor_h(graph.adjacency, grid_side, wavelets)
    n3 = x0.shape[2]
    d = int(np.ceil(n3 / 4)) if d is None else int(d)
    t = temporal_factor_t(x0, d)
    return FactorSet(g=g, h=h, t=t, activation=activation(act))
