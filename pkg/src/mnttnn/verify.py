"""Seeded runtime checks of the library's algebraic identities.

Each check raises AssertionError on failure; the runner prints one
PASS/FAIL line per check and reports the failure count.
"""

from __future__ import annotations

import numpy as np

from .graph_factors import build_factor_set, gaussian_adjacency, normalized_laplacian
from .masks import MaskSpec, gen_mask
from .metrics import mape, rmse
from .solver import update_factor_procrustes
from .synthetic import grid_distance_matrix
from .tensor_ops import ModeSubset, fold, mode_product, svt, ttnn_norm, unfold
from .transforms import (
    FactorSet,
    activation,
    adjoint_mnt_linear,
    apply_mnt_linear,
    mnt_tnn_norm,
)

_SUBSETS = [(1,), (2,), (3,), (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2), (1, 2, 3)]


def _random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def check_unfold_roundtrip(rng):
    for _ in range(10):
        dims = tuple(rng.integers(1, 6, size=3))
        x = rng.standard_normal(dims)
        for idx in _SUBSETS:
            for variant in ("cartesian", "vectorized"):
                s = ModeSubset(idx, variant)
                assert np.array_equal(fold(unfold(x, s), s, dims), x), (idx, variant)


def check_face_equals_mode(rng):
    from .tensor_ops import face_product

    for _ in range(10):
        dims = tuple(rng.integers(2, 6, size=3))
        x = rng.standard_normal(dims)
        for k in (1, 2, 3):
            for p in (1, 2, 3):
                if k == p:
                    continue
                m = rng.standard_normal((rng.integers(1, 5), dims[k - 1]))
                assert np.array_equal(face_product(x, m, (k, p)), mode_product(x, m, k))


def check_kronecker_identity(rng):
    for _ in range(10):
        dims = tuple(rng.integers(2, 5, size=3))
        n1, n2, n3 = dims
        x = rng.standard_normal(dims)
        g = _random_orthogonal(rng, n1 * n2)
        t = _random_orthogonal(rng, n3)
        f = FactorSet(g=g, h=np.eye(n1), t=t)
        core = apply_mnt_linear(x, f)
        lhs = unfold(core, ModeSubset((1, 2, 3), "vectorized")).ravel()
        rhs = np.kron(t, g) @ unfold(x, ModeSubset((1, 2, 3), "vectorized")).ravel()
        scale = max(np.linalg.norm(rhs), 1.0)
        assert np.linalg.norm(lhs - rhs) / scale <= 1e-12


def check_adjoint_consistency(rng):
    for _ in range(10):
        dims = tuple(rng.integers(2, 5, size=3))
        n1, n2, n3 = dims
        d = int(rng.integers(1, n3 + 1))
        g = _random_orthogonal(rng, n1 * n2)
        h = _random_orthogonal(rng, n1)
        t = _random_orthogonal(rng, n3)[:d]
        f = FactorSet(g=g, h=h, t=t)
        x = rng.standard_normal(dims)
        c = rng.standard_normal((n1, n2, d))
        lhs = np.sum(apply_mnt_linear(x, f) * c)
        rhs = np.sum(x * adjoint_mnt_linear(c, f))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def check_agent_tensor_equivalence(rng):
    for _ in range(10):
        dims = tuple(rng.integers(2, 5, size=3))
        n1, n2, n3 = dims
        g = _random_orthogonal(rng, n1 * n2)
        h = _random_orthogonal(rng, n1)
        t = _random_orthogonal(rng, n3)
        f = FactorSet(g=g, h=h, t=t)
        x = rng.standard_normal(dims)
        from .tensor_ops import face_product, vec_face_product

        surrogate = face_product(vec_face_product(x, g, (1, 2)), h, (1, 3))
        assert abs(mnt_tnn_norm(x, f) - ttnn_norm(surrogate, t)) <= 1e-10


def check_svt_nonexpansive(rng):
    for _ in range(20):
        a = rng.standard_normal((6, 5))
        b = rng.standard_normal((6, 5))
        tau = float(rng.uniform(0, 2))
        lhs = np.linalg.norm(svt(a, tau) - svt(b, tau))
        assert lhs <= np.linalg.norm(a - b) + 1e-12


def check_factory_orthogonality(rng):
    dist = grid_distance_matrix(3)
    x0 = rng.standard_normal((3, 3, 12))
    f = build_factor_set(dist, 3, x0, d=5)
    f.validate((3, 3, 12))
    lap = normalized_laplacian(gaussian_adjacency(dist, 1.0, 1.5))
    w = np.linalg.eigvalsh(lap)
    assert w.min() >= -1e-10 and w.max() <= 2 + 1e-10


def check_factory_value_independence(rng):
    dist = grid_distance_matrix(3)
    a = build_factor_set(dist, 3, rng.standard_normal((3, 3, 8)), d=4)
    b = build_factor_set(dist, 3, rng.standard_normal((3, 3, 8)) * 37.0, d=4)
    assert np.array_equal(a.g, b.g) and np.array_equal(a.h, b.h)


def check_mask_counts(rng):
    dims = (7, 5, 6)
    for rate in (0.1, 0.37, 0.9):
        seed = int(rng.integers(0, 2**31))
        m1 = gen_mask(dims, MaskSpec("random", rate, seed))
        m2 = gen_mask(dims, MaskSpec("random", rate, seed))
        assert m1.n_hidden == int(np.floor(rate * np.prod(dims)))
        assert np.array_equal(m1.observed, m2.observed)
        fib = gen_mask(dims, MaskSpec("fiber", rate, seed))
        assert fib.n_hidden == int(np.floor(rate * dims[0] * dims[1])) * dims[2]


def check_metrics_ignore_observed(rng):
    dims = (5, 4, 6)
    truth = rng.standard_normal(dims) + 3.0
    est = truth + rng.standard_normal(dims) * 0.1
    mask = gen_mask(dims, MaskSpec("random", 0.4, 3))
    tampered = est.copy()
    tampered[mask.observed] = 1e6
    assert mape(truth, est, mask.hidden) == mape(truth, tampered, mask.hidden)
    assert rmse(truth, est, mask.hidden) == rmse(truth, tampered, mask.hidden)


def check_activation_derivatives(rng):
    eps = 1e-6
    for name in ("identity", "tanh", "sigmoid", "softplus"):
        act = activation(name)
        x = rng.uniform(-4, 4, size=100)
        fd = (act.value(x + eps) - act.value(x - eps)) / (2 * eps)
        assert np.abs(fd - act.deriv(x)).max() <= 1e-6


def check_procrustes_optimality(rng):
    e = rng.standard_normal((5, 5))
    g = update_factor_procrustes(e, (5, 5))
    best = np.trace(e @ g)
    for _ in range(200):
        q = _random_orthogonal(rng, 5)
        assert np.trace(e @ q) <= best + 1e-9


CHECKS = [
    ("unfold/fold round trip", check_unfold_roundtrip),
    ("face product equals mode product", check_face_equals_mode),
    ("separable spatiotemporal filtering identity", check_kronecker_identity),
    ("transform adjoint consistency", check_adjoint_consistency),
    ("composite norm agrees with surrogate-tensor norm", check_agent_tensor_equivalence),
    ("singular value shrinkage is nonexpansive", check_svt_nonexpansive),
    ("factor factory emits orthogonal factors", check_factory_orthogonality),
    ("G and H depend on geometry only", check_factory_value_independence),
    ("mask cardinality and determinism", check_mask_counts),
    ("metrics never read observed entries", check_metrics_ignore_observed),
    ("activation derivatives match finite differences", check_activation_derivatives),
    ("procrustes step beats random rotations", check_procrustes_optimality),
]


def run_checks(seed: int = 0, out=print) -> int:
    failures = 0
    for name, fn in CHECKS:
        rng = np.random.default_rng(seed)
        try:
            fn(rng)
        except AssertionError as exc:
            failures += 1
            out(f"FAIL {name}: {exc}")
        else:
            out(f"PASS {name}")
    out(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
