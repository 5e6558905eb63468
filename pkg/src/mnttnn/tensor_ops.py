"""Dense order-3 tensor algebra: generalized unfoldings, mode products,
face-wise products, and singular-value machinery.

Index convention (frozen; fold must invert unfold): within the selected
mode subset S the first index of S runs fastest (column-major), and the
complement modes are flattened column-major in ascending mode order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODES = (1, 2, 3)
VARIANTS = ("cartesian", "vectorized")


def as_tensor3(values) -> np.ndarray:
    """Validate and return an order-3 float64 array."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected an order-3 tensor, got ndim={x.ndim}")
    if min(x.shape) < 1:
        raise ValueError(f"tensor dimensions must be positive, got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("tensor values must be finite (no NaN/Inf)")
    return x


@dataclass(frozen=True)
class ModeSubset:
    """Ordered subset of modes {1,2,3} plus the unfolding variant.

    ``cartesian`` keeps the subset modes as separate axes; ``vectorized``
    flattens them into a single row axis (first subset index fastest).
    """

    indices: tuple[int, ...]
    variant: str = "cartesian"

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if not idx:
            raise ValueError("mode subset must be nonempty")
        if len(set(idx)) != len(idx):
            raise ValueError(f"mode subset has repeated modes: {idx}")
        if any(i not in MODES for i in idx):
            raise ValueError(f"modes must be in {MODES}, got {idx}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(i - 1 for i in self.indices)

    @property
    def complement_axes(self) -> tuple[int, ...]:
        return tuple(a for a in range(3) if a not in self.axes)


def unfold(x: np.ndarray, s: ModeSubset) -> np.ndarray:
    """Generalized mode unfolding of an order-3 tensor.

    The cartesian variant returns an array with one axis per subset mode
    plus a trailing axis over the flattened complement (size 1 when the
    subset is all three modes).  The vectorized variant returns a matrix
    whose rows flatten the subset modes.
    """
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError("unfold expects an order-3 tensor")
    perm = s.axes + s.complement_axes
    xp = np.transpose(x, perm)
    sdims = tuple(x.shape[a] for a in s.axes)
    rest = 1
    for a in s.complement_axes:
        rest *= x.shape[a]
    if s.variant == "cartesian":
        return xp.reshape(sdims + (rest,), order="F")
    return xp.reshape((int(np.prod(sdims)), rest), order="F")


def fold(m: np.ndarray, s: ModeSubset, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold` under the same index bijection."""
    m = np.asarray(m)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    sdims = tuple(dims[a] for a in s.axes)
    cdims = tuple(dims[a] for a in s.complement_axes)
    rest = 1
    for d in cdims:
        rest *= d
    if s.variant == "cartesian":
        expected = sdims + (rest,)
    else:
        expected = (int(np.prod(sdims)), rest)
    if m.shape != expected:
        raise ValueError(
            f"matrix shape {m.shape} inconsistent with subset {s.indices} "
            f"({s.variant}) and dims {dims}; expected {expected}"
        )
    xp = m.reshape(sdims + cdims, order="F")
    perm = s.axes + s.complement_axes
    inv = np.argsort(perm)
    return np.transpose(xp, inv)


def mode_unfold(x: np.ndarray, k: int) -> np.ndarray:
    """Classical mode-k unfolding, shape (n_k, prod of the rest)."""
    return unfold(x, ModeSubset((k,)))


def _mode_multiply(x: np.ndarray, m: np.ndarray, k: int) -> np.ndarray:
    s = ModeSubset((k,))
    y = m @ unfold(x, s)
    new_dims = list(x.shape)
    new_dims[k - 1] = m.shape[0]
    return fold(y, s, tuple(new_dims))


def mode_product(x: np.ndarray, m: np.ndarray, k: int) -> np.ndarray:
    """Mode-k product: fold_k(m @ X_(k)); only mode k changes size."""
    if k not in MODES:
        raise ValueError(f"mode must be in {MODES}, got {k}")
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[1] != x.shape[k - 1]:
        raise ValueError(
            f"factor of shape {m.shape} cannot multiply mode {k} of size {x.shape[k - 1]}"
        )
    return _mode_multiply(x, m, k)


def face_product(x: np.ndarray, m: np.ndarray, modes: tuple[int, int]) -> np.ndarray:
    """Face-wise mode-(k,p) product: each frontal slice of the (k,p)
    rearrangement is left-multiplied by ``m``.

    For order-3 tensors this is the mode-k product, so both run the exact
    same arithmetic; the slicewise reading is checked against a naive
    oracle in the tests.
    """
    k, p = int(modes[0]), int(modes[1])
    if k == p:
        raise ValueError("face product needs two distinct modes")
    if k not in MODES or p not in MODES:
        raise ValueError(f"modes must be in {MODES}, got {(k, p)}")
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[1] != x.shape[k - 1]:
        raise ValueError(
            f"factor of shape {m.shape} cannot multiply mode {k} of size {x.shape[k - 1]}"
        )
    return _mode_multiply(x, m, k)


def vec_face_product(
    x: np.ndarray,
    m: np.ndarray,
    modes: tuple[int, int],
    out_dims: tuple[int, int] | None = None,
) -> np.ndarray:
    """Vectorized face product: fold_(k,p)(m @ vec-unfolded slices).

    ``m`` must have n_k*n_p columns.  A non-square ``m`` changes the two
    subset modes, in which case ``out_dims`` must state how its row count
    splits into the new (n_k, n_p).
    """
    k, p = int(modes[0]), int(modes[1])
    if k == p:
        raise ValueError("vec face product needs two distinct modes")
    if k not in MODES or p not in MODES:
        raise ValueError(f"modes must be in {MODES}, got {(k, p)}")
    m = np.asarray(m)
    nk, np_ = x.shape[k - 1], x.shape[p - 1]
    if m.ndim != 2 or m.shape[1] != nk * np_:
        raise ValueError(
            f"factor of shape {m.shape} cannot multiply vectorized slices of size {nk * np_}"
        )
    if out_dims is None:
        if m.shape[0] != nk * np_:
            raise ValueError(
                "non-square factor requires out_dims=(new_nk, new_np) to fold the result"
            )
        out_dims = (nk, np_)
    elif out_dims[0] * out_dims[1] != m.shape[0]:
        raise ValueError(f"out_dims {out_dims} inconsistent with factor rows {m.shape[0]}")
    s = ModeSubset((k, p), "vectorized")
    y = m @ unfold(x, s)
    new_dims = list(x.shape)
    new_dims[k - 1] = out_dims[0]
    new_dims[p - 1] = out_dims[1]
    return fold(y, s, tuple(new_dims))


def deterministic_svd(m: np.ndarray, full_matrices: bool = False):
    """SVD with a frozen sign convention: the largest-magnitude entry of
    each left singular vector is forced nonnegative (ties broken by lowest
    index), flipping the paired right vector to preserve the product.
    """
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=np.float64), full_matrices=full_matrices)
    pivot = np.argmax(np.abs(u), axis=0)
    flip = u[pivot, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    paired = min(u.shape[1], vt.shape[0])  # columns beyond len(s) have no right partner
    vt[:paired][flip[:paired]] *= -1.0
    return u, s, vt


def svt(m: np.ndarray, tau: float) -> np.ndarray:
    """Singular value shrinkage: U * max(sigma - tau, 0) * V^T."""
    if tau < 0:
        raise ValueError(f"shrinkage threshold must be nonnegative, got {tau}")
    m = np.asarray(m)
    if not m.any():
        # all-zero input: skip the SVD backend entirely
        return np.zeros_like(m, dtype=np.float64)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    shrunk = np.maximum(s - tau, 0.0)
    return (u * shrunk) @ vt


def nuclear_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    if not m.any():
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False).sum())


def ttnn_norm(x: np.ndarray, transform: np.ndarray) -> float:
    """Sum of frontal-slice nuclear norms after a mode-3 transform."""
    y = mode_product(x, transform, 3)
    return float(sum(nuclear_norm(y[:, :, i]) for i in range(y.shape[2])))
