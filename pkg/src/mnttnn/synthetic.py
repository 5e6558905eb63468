"""Synthetic problem generators with recorded ground truth.

Planted low-multirank tensors (random factors in a chosen mode-3 transform
domain) sit inside the exact-recovery regime of convex completion; the
graph-smooth generator plants frontal slices that are smooth over a known
spatial grid so geometry-aware transforms have structure to exploit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_factors import gaussian_adjacency, normalized_laplacian


def _rescale_mean_abs(x: np.ndarray, mean_abs: float) -> np.ndarray:
    current = float(np.mean(np.abs(x)))
    if current == 0:
        return x
    return x * (mean_abs / current)


def _tprod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    fa = np.fft.fft(a, axis=2)
    fb = np.fft.fft(b, axis=2)
    fc = np.einsum("irk,rjk->ijk", fa, fb)
    return np.fft.ifft(fc, axis=2).real


def _band_limited(rng, shape, band):
    """Random time series supported on DFT frequencies 0..band."""
    n3 = shape[-1]
    t = np.arange(n3)
    out = np.zeros(shape)
    for f in range(band + 1):
        amp = rng.standard_normal(shape[:-1])[..., None]
        phase = rng.uniform(0, 2 * np.pi, size=shape[:-1])[..., None]
        out += amp * np.cos(2 * np.pi * f * t / n3 + phase)
    return out


def low_tubal_rank(
    dims: tuple[int, int, int] = (20, 20, 30),
    rank: int = 2,
    seed: int = 0,
    mean_abs: float = 10.0,
    transform="dft",
    band: int | None = None,
) -> np.ndarray:
    """Tensor whose frontal slices have rank <= ``rank`` in the transform
    domain.  "dft" plants the structure in the Fourier domain via a
    t-product of random factors; an orthogonal matrix plants random
    low-rank slices in its domain instead.  ``band`` (dft only) restricts
    the factors to DFT frequencies 0..band, shrinking the degrees of
    freedom so very high missing rates stay recoverable.
    """
    n1, n2, n3 = dims
    rng = np.random.default_rng(seed)
    if isinstance(transform, str):
        if transform != "dft":
            raise ValueError(f"unknown named transform {transform!r}")
        if band is None:
            a = rng.standard_normal((n1, rank, n3))
            b = rng.standard_normal((rank, n2, n3))
        else:
            a = _band_limited(rng, (n1, rank, n3), band)
            b = _band_limited(rng, (rank, n2, n3), band)
        x = _tprod(a, b)
    else:
        if band is not None:
            raise ValueError("band limiting applies to the dft transform only")
        u = np.asarray(transform, dtype=np.float64)
        if u.shape != (n3, n3):
            raise ValueError(f"transform must be {n3}x{n3}, got {u.shape}")
        core = np.einsum(
            "irk,rjk->ijk",
            rng.standard_normal((n1, rank, n3)),
            rng.standard_normal((rank, n2, n3)),
        )
        from .tensor_ops import mode_product

        x = mode_product(core, u.T, 3)
    return _rescale_mean_abs(x, mean_abs)


def grid_distance_matrix(side: int) -> np.ndarray:
    """Euclidean distances between the nodes of a side x side unit grid,
    enumerated first index fastest (matching the slice vectorization)."""
    side = int(side)
    if side < 1:
        raise ValueError("grid side must be positive")
    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    pts = np.stack([rows.ravel(order="F"), cols.ravel(order="F")], axis=1).astype(float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


@dataclass(frozen=True, eq=False)
class GraphSmoothData:
    tensor: np.ndarray
    distances: np.ndarray
    grid_side: int


def graph_smooth(
    side: int = 8,
    n3: int = 30,
    spatial_rank: int = 4,
    seed: int = 0,
    mean_abs: float = 10.0,
) -> GraphSmoothData:
    """Tensor whose frontal slices combine the smoothest Laplacian
    eigenvectors of the grid graph, modulated by slow temporal waves."""
    rng = np.random.default_rng(seed)
    dist = grid_distance_matrix(side)
    adj = gaussian_adjacency(dist, sigma=1.0, kappa=1.5)
    lap = normalized_laplacian(adj)
    eigvals, eigvecs = np.linalg.eigh(lap)
    basis = eigvecs[:, :spatial_rank]  # smoothest modes first
    t = np.arange(n3, dtype=np.float64)
    coeffs = np.zeros((spatial_rank, n3))
    for j in range(spatial_rank):
        for freq in (1, 2):
            amp = rng.standard_normal()
            phase = rng.uniform(0, 2 * np.pi)
            coeffs[j] += amp * np.cos(2 * np.pi * freq * t / n3 + phase)
        coeffs[j] += rng.standard_normal()
    flat = basis @ coeffs  # (side^2, n3), columns are vectorized slices
    x = flat.reshape((side, side, n3), order="F")
    return GraphSmoothData(_rescale_mean_abs(x, mean_abs), dist, side)


def graph_spectral(
    side: int = 8,
    n3: int = 60,
    modes=None,
    freqs_per_mode: int = 6,
    seed: int = 0,
    mean_abs: float = 10.0,
) -> GraphSmoothData:
    """Tensor sparse in the grid-graph spectrum with rich temporal content.

    Each selected Laplacian eigenvector (default: modes 1..12, skipping the
    constant) carries a sum of ``freqs_per_mode`` random temporal waves, so
    spatial-spectrum sparsity is informative while temporal compression
    alone is not enough.
    """
    rng = np.random.default_rng(seed)
    dist = grid_distance_matrix(side)
    adj = gaussian_adjacency(dist, sigma=1.0, kappa=1.5)
    lap = normalized_laplacian(adj)
    _, eigvecs = np.linalg.eigh(lap)
    if modes is None:
        modes = list(range(1, min(13, side * side)))
    basis = eigvecs[:, list(modes)]
    t = np.arange(n3, dtype=np.float64)
    coeffs = np.zeros((len(modes), n3))
    pool = np.arange(1, max(2, n3 // 3))
    for j in range(len(modes)):
        for f in rng.choice(pool, size=min(freqs_per_mode, pool.size), replace=False):
            amp = rng.standard_normal()
            phase = rng.uniform(0, 2 * np.pi)
            coeffs[j] += amp * np.cos(2 * np.pi * f * t / n3 + phase)
    flat = basis @ coeffs
    x = flat.reshape((side, side, n3), order="F")
    return GraphSmoothData(_rescale_mean_abs(x, mean_abs), dist, side)
