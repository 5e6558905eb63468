"""Observation masks: the observed index set, its complement, and seeded
mask generators for random and whole-fiber missing patterns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PATTERNS = ("random", "fiber")


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """Boolean observation indicator over a fixed (n1, n2, n3) grid.

    Linear indices are column-major (first mode fastest), matching the
    on-disk tensor layout.
    """

    dims: tuple[int, int, int]
    observed: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        obs = np.asarray(self.observed, dtype=bool)
        if obs.shape != dims:
            raise ValueError(f"mask shape {obs.shape} does not match dims {dims}")
        object.__setattr__(self, "observed", obs)

    @classmethod
    def from_linear_indices(cls, dims, indices) -> "ObservationMask":
        dims = tuple(int(d) for d in dims)
        idx = np.asarray(indices, dtype=np.int64).ravel()
        total = int(np.prod(dims))
        if idx.size != np.unique(idx).size:
            raise ValueError("observed indices must be unique")
        if idx.size and (idx.min() < 0 or idx.max() >= total):
            raise ValueError(f"observed indices out of range [0, {total})")
        flat = np.zeros(total, dtype=bool)
        flat[idx] = True
        return cls(dims, flat.reshape(dims, order="F"))

    @property
    def hidden(self) -> np.ndarray:
        return ~self.observed

    @property
    def linear_indices(self) -> np.ndarray:
        return np.flatnonzero(self.observed.ravel(order="F"))

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())

    @property
    def n_hidden(self) -> int:
        return int(self.hidden.sum())


@dataclass(frozen=True)
class MaskSpec:
    pattern: str
    missing_rate: float
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if not 0.0 < self.missing_rate < 1.0:
            raise ValueError(f"missing rate must lie strictly in (0, 1), got {self.missing_rate}")


def gen_mask(dims: tuple[int, int, int], spec: MaskSpec) -> ObservationMask:
    """Seeded mask with an exact hidden count.

    random: hides exactly floor(rate * n1*n2*n3) entries via a seeded
    permutation.  fiber: hides all n3 entries of exactly floor(rate * n1*n2)
    seeded-chosen (i, j) tubes.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    n1, n2, n3 = dims
    rng = np.random.default_rng(spec.seed)
    if spec.pattern == "random":
        total = n1 * n2 * n3
        n_hidden = int(np.floor(spec.missing_rate * total))
        if n_hidden >= total:
            raise ValueError("missing rate leaves no observed entries")
        hidden_lin = rng.permutation(total)[:n_hidden]
        flat = np.ones(total, dtype=bool)
        flat[hidden_lin] = False
        return ObservationMask(dims, flat.reshape(dims, order="F"))
    n_tubes = n1 * n2
    n_hidden_tubes = int(np.floor(spec.missing_rate * n_tubes))
    if n_hidden_tubes >= n_tubes:
        raise ValueError("missing rate leaves no observed tubes")
    tubes = rng.permutation(n_tubes)[:n_hidden_tubes]
    observed = np.ones(dims, dtype=bool)
    i = tubes % n1
    j = tubes // n1
    observed[i, j, :] = False
    return ObservationMask(dims, observed)
