"""Multimode nonlinear transform: elementwise activations, the factor
triple (spatial G, spatiotemporal H, temporal T), the composed forward
transform, its linear adjoint, and the induced tensor norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .tensor_ops import face_product, mode_product, nuclear_norm, vec_face_product

ORTH_TOL = 1e-10


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x):
    # overflow-safe: log1p(exp(-|x|)) + max(x, 0)
    x = np.asarray(x, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


@dataclass(frozen=True)
class Activation:
    """Elementwise function with first and second derivatives."""

    name: str
    value: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    second_deriv: Callable = field(repr=False)


_ACTIVATIONS = {
    "identity": Activation(
        "identity",
        lambda x: np.asarray(x, dtype=np.float64),
        lambda x: np.ones_like(np.asarray(x, dtype=np.float64)),
        lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
    ),
    "tanh": Activation(
        "tanh",
        np.tanh,
        lambda x: 1.0 - np.tanh(x) ** 2,
        lambda x: -2.0 * np.tanh(x) * (1.0 - np.tanh(x) ** 2),
    ),
    "sigmoid": Activation(
        "sigmoid",
        _sigmoid,
        lambda x: _sigmoid(x) * (1.0 - _sigmoid(x)),
        lambda x: _sigmoid(x) * (1.0 - _sigmoid(x)) * (1.0 - 2.0 * _sigmoid(x)),
    ),
    "softplus": Activation(
        "softplus",
        _softplus,
        _sigmoid,
        lambda x: _sigmoid(x) * (1.0 - _sigmoid(x)),
    ),
}


def activation(name: str) -> Activation:
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown activation {name!r}; choose from {sorted(_ACTIVATIONS)}"
        ) from None


def orthogonality_residual(m: np.ndarray) -> float:
    """Frobenius norm of M^T M - I (column orthonormality defect)."""
    m = np.asarray(m)
    return float(np.linalg.norm(m.T @ m - np.eye(m.shape[1])))


@dataclass(frozen=True, eq=False)
class FactorSet:
    """Transform factors: g (n1*n2 x n1*n2), h (n1 x n1), t (d x n3) with
    orthonormal rows, and the elementwise activation."""

    g: np.ndarray
    h: np.ndarray
    t: np.ndarray
    activation: Activation = _ACTIVATIONS["identity"]

    @property
    def d(self) -> int:
        return self.t.shape[0]

    def validate(self, dims: tuple[int, int, int], tol: float = ORTH_TOL) -> None:
        n1, n2, n3 = dims
        if self.g.shape != (n1 * n2, n1 * n2):
            raise ValueError(f"G must be {n1 * n2}x{n1 * n2}, got {self.g.shape}")
        if self.h.shape != (n1, n1):
            raise ValueError(f"H must be {n1}x{n1}, got {self.h.shape}")
        if self.t.ndim != 2 or self.t.shape[1] != n3 or not 1 <= self.t.shape[0] <= n3:
            raise ValueError(f"T must be d x {n3} with 1 <= d <= {n3}, got {self.t.shape}")
        for name, m in (("G", self.g), ("H", self.h)):
            r = orthogonality_residual(m)
            if r > tol:
                raise ValueError(f"{name} is not orthogonal: residual {r:.3e} > {tol:.0e}")
        r = float(np.linalg.norm(self.t @ self.t.T - np.eye(self.t.shape[0])))
        if r > tol:
            raise ValueError(f"T rows are not orthonormal: residual {r:.3e} > {tol:.0e}")

    def with_activation(self, name: str) -> "FactorSet":
        return replace(self, activation=activation(name))


def identity_factors(
    dims: tuple[int, int, int], d: int | None = None, act: str = "identity"
) -> FactorSet:
    n1, n2, n3 = dims
    d = n3 if d is None else int(d)
    return FactorSet(
        g=np.eye(n1 * n2),
        h=np.eye(n1),
        t=np.eye(n3)[:d],
        activation=activation(act),
    )


def apply_mnt_linear(x: np.ndarray, f: FactorSet) -> np.ndarray:
    """Linear part of the multimode transform:
    x (vec-face (1,2) by G) (face (1,3) by H) (mode-3 by T), dims (n1, n2, d).
    """
    y = vec_face_product(x, f.g, (1, 2))
    y = face_product(y, f.h, (1, 3))
    return mode_product(y, f.t, 3)


def apply_mnt(x: np.ndarray, f: FactorSet) -> tuple[np.ndarray, np.ndarray]:
    """Full multimode nonlinear transform; returns (linear core, activated core)."""
    c_linear = apply_mnt_linear(x, f)
    return c_linear, f.activation.value(c_linear)


def adjoint_mnt_linear(c: np.ndarray, f: FactorSet) -> np.ndarray:
    """Adjoint of :func:`apply_mnt_linear`: transposed factors in reverse
    order.  With square orthogonal factors it inverts the forward map; with
    d < n3 it projects mode-3 fibers onto the row space of T.
    """
    y = mode_product(c, f.t.T, 3)
    y = face_product(y, f.h.T, (1, 3))
    return vec_face_product(y, f.g.T, (1, 2))


def mnt_tnn_norm(x: np.ndarray, f: FactorSet) -> float:
    """Sum of nuclear norms of the activated core's frontal slices."""
    _, c = apply_mnt(x, f)
    return float(sum(nuclear_norm(c[:, :, i]) for i in range(c.shape[2])))
