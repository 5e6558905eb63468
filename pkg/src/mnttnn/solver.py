"""Proximal alternating minimization for multimode-transform tensor
completion.

One iteration updates, in order: the completed tensor X (closed-form
weighted average off the observed set), the low-rank surrogate Z (slicewise
singular value thresholding), the transform core C (entrywise safeguarded
Newton), then the factors G, H, T (orthogonal Procrustes steps).  Each
update solves its proximally regularized subproblem exactly for square
factors, which yields the monotone-decrease guarantee checked at runtime.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .masks import ObservationMask
from .tensor_ops import (
    as_tensor3,
    deterministic_svd,
    face_product,
    mode_product,
    mode_unfold,
    nuclear_norm,
    svt,
    vec_face_product,
)
from .transforms import FactorSet, adjoint_mnt_linear, apply_mnt_linear

log = logging.getLogger(__name__)

DECREASE_MODES = ("off", "warn", "raise")


class InfeasibleStateError(ValueError):
    """An indicator term of the objective is infinite."""


class SubproblemError(RuntimeError):
    """A subproblem solve failed to reach its residual tolerance."""


class SufficientDecreaseError(RuntimeError):
    """The proximally regularized objective increased beyond slack."""


@dataclass
class PamConfig:
    alpha: float = 100.0
    beta: float = 100.0
    rho: tuple[float, ...] = (0.01,) * 6
    max_iters: int = 500
    tol: float = 1e-4
    newton_iters: int = 20
    newton_tol: float = 1e-10
    validation_fraction: float = 0.1
    seed: int = 0
    activation: str = "tanh"
    d: int | None = None  # transformed core depth; None means ceil(n3 / 4)
    update_g: bool = True
    update_h: bool = True
    update_t: bool = True
    rescale: bool = True
    decrease_check: str = "warn"
    decrease_slack: float = 1e-9

    def __post_init__(self):
        rho = self.rho
        if np.isscalar(rho):
            rho = (float(rho),) * 6
        rho = tuple(float(r) for r in rho)
        if len(rho) != 6:
            raise ValueError(f"rho needs one value or six, got {len(rho)}")
        self.rho = rho
        if min(self.alpha, self.beta) <= 0 or min(rho) <= 0:
            raise ValueError("alpha, beta and all rho values must be positive")
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.max_iters < 1 or self.newton_iters < 1:
            raise ValueError("iteration counts must be positive")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.decrease_check not in DECREASE_MODES:
            raise ValueError(f"decrease_check must be one of {DECREASE_MODES}")

    @property
    def rho_min(self) -> float:
        return min(self.rho)


@dataclass
class PamState:
    """Mutable iterates: tensors X, Z, C plus the current factor set."""

    x: np.ndarray
    z: np.ndarray
    c: np.ndarray
    factors: FactorSet
    objective: float = np.inf
    iteration: int = 0


@dataclass
class SolveReport:
    iterations: int
    stop_reason: str
    objective_trace: list[float]
    rel_change_trace: list[float]
    validation_rmse_trace: list[float]
    best_iteration: int
    wall_seconds: float
    scale: float
    decrease_violation_max: float
    decrease_violations: int
    n_train_observed: int
    n_validation: int

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "objective_trace": [float(v) for v in self.objective_trace],
            "rel_change_trace": [float(v) for v in self.rel_change_trace],
            "validation_rmse_trace": [float(v) for v in self.validation_rmse_trace],
            "best_iteration": self.best_iteration,
            "wall_seconds": self.wall_seconds,
            "scale": self.scale,
            "decrease_violation_max": self.decrease_violation_max,
            "decrease_violations": self.decrease_violations,
            "n_train_observed": self.n_train_observed,
            "n_validation": self.n_validation,
        }


def _assert_feasible(x, o, mask):
    obs = mask.observed
    if not np.array_equal(x[obs], o[obs]):
        raise InfeasibleStateError(
            "observed-entry indicator fired: X differs from O on the observed set"
        )


def _objective_value(state: PamState, cfg: PamConfig) -> float:
    c_lin = apply_mnt_linear(state.x, state.factors)
    nuc = sum(nuclear_norm(state.z[:, :, i]) for i in range(state.z.shape[2]))
    fit = state.c - c_lin
    act_fit = state.z - state.factors.activation.value(state.c)
    return float(
        nuc
        + 0.5 * cfg.alpha * np.sum(fit * fit)
        + 0.5 * cfg.beta * np.sum(act_fit * act_fit)
    )


def objective(state: PamState, o: np.ndarray, mask: ObservationMask, cfg: PamConfig) -> float:
    """Value of the splitting objective; the indicator terms are asserted
    zero (feasibility and factor orthogonality) rather than added."""
    _assert_feasible(state.x, o, mask)
    try:
        state.factors.validate(state.x.shape)
    except ValueError as exc:
        raise InfeasibleStateError(f"orthogonality indicator fired: {exc}") from exc
    return _objective_value(state, cfg)


def update_x(state: PamState, o: np.ndarray, mask: ObservationMask, cfg: PamConfig) -> np.ndarray:
    """Closed-form X step: observed entries copy O; the rest average the
    back-transformed core against the previous iterate."""
    k = adjoint_mnt_linear(state.c, state.factors)
    blend = (cfg.alpha * k + cfg.rho[0] * state.x) / (cfg.alpha + cfg.rho[0])
    return np.where(mask.observed, o, blend)


def update_z(state: PamState, cfg: PamConfig) -> np.ndarray:
    """Slicewise singular value thresholding of the activated core."""
    psi_c = state.factors.activation.value(state.c)
    weight = cfg.beta + cfg.rho[1]
    target = (cfg.beta * psi_c + cfg.rho[1] * state.z) / weight
    out = np.empty_like(state.z)
    for i in range(state.z.shape[2]):
        out[:, :, i] = svt(target[:, :, i], 1.0 / weight)
    return out


def _entrywise_grad(c, p, z, quad, beta, act):
    return quad * (c - p) - beta * (z - act.value(c)) * act.deriv(c)


def _bisect_entrywise(p, z, quad, beta, act, tol):
    """Safeguard: bracket a sign change of the gradient by doubling around
    p, then bisect.  The quadratic term dominates far from p, so a bracket
    always exists for the supported activations."""
    width = np.ones_like(p)
    lo = p - width
    hi = p + width
    for _ in range(80):
        g_lo = _entrywise_grad(lo, p, z, quad, beta, act)
        g_hi = _entrywise_grad(hi, p, z, quad, beta, act)
        widen = (g_lo > 0) | (g_hi < 0)
        if not widen.any():
            break
        width[widen] *= 2.0
        lo = p - width
        hi = p + width
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        g_mid = _entrywise_grad(mid, p, z, quad, beta, act)
        live = np.abs(g_mid) > tol
        if not live.any():
            break
        lo = np.where(live & (g_mid < 0), mid, lo)
        hi = np.where(live & (g_mid > 0), mid, hi)
        mid = np.where(live, 0.5 * (lo + hi), mid)
    return mid


def _solve_core_entrywise(p, z, quad, beta, act, max_iters, tol):
    """Stationary points of quad/2 (c-p)^2 + beta/2 (z - psi(c))^2 for every
    entry: Newton from c = p, falling back to safeguarded bisection when the
    residual stalls three times, the iterate leaves [p-10, p+10], or the
    local curvature is unusable."""
    shape = p.shape
    p = p.ravel()
    z = z.ravel()
    if beta == 0:
        return p.copy().reshape(shape)
    c = p.copy()
    g = _entrywise_grad(c, p, z, quad, beta, act)
    fallback = np.zeros(c.size, dtype=bool)
    stall = np.zeros(c.size, dtype=np.int64)
    for _ in range(max_iters):
        live = (np.abs(g) > tol) & ~fallback
        if not live.any():
            break
        cl, gl, pl, zl = c[live], g[live], p[live], z[live]
        curv = quad + beta * (act.deriv(cl) ** 2 - (zl - act.value(cl)) * act.second_deriv(cl))
        bad = curv <= 1e-12
        step = np.where(bad, 0.0, gl / np.where(bad, 1.0, curv))
        cn = cl - step
        gn = _entrywise_grad(cn, pl, zl, quad, beta, act)
        stall_l = np.where(np.abs(gn) < np.abs(gl), 0, stall[live] + 1)
        fb = bad | (np.abs(cn - pl) > 10.0) | (stall_l >= 3)
        c[live] = np.where(fb, cl, cn)
        g[live] = np.where(fb, gl, gn)
        stall[live] = stall_l
        idx = np.flatnonzero(live)
        fallback[idx[fb]] = True
    todo = np.abs(g) > tol
    if todo.any():
        c[todo] = _bisect_entrywise(p[todo], z[todo], quad, beta, act, tol)
        g[todo] = _entrywise_grad(c[todo], p[todo], z[todo], quad, beta, act)
        worst = float(np.abs(g[todo]).max())
        if worst > tol:
            raise SubproblemError(
                f"entrywise core solve failed to converge: worst residual {worst:.3e}"
            )
    return c.reshape(shape)


def update_c(state: PamState, cfg: PamConfig) -> np.ndarray:
    """Entrywise Newton step for the core fitting subproblem."""
    quad = cfg.alpha + cfg.rho[2]
    p = (cfg.alpha * apply_mnt_linear(state.x, state.factors) + cfg.rho[2] * state.c) / quad
    return _solve_core_entrywise(
        p, state.z, quad, cfg.beta, state.factors.activation, cfg.newton_iters, cfg.newton_tol
    )


def update_factor_procrustes(e: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Maximizer of Tr(E @ G) over semi-orthogonal G of the given shape:
    V U^T from the SVD of the trace-coefficient matrix E (cols x rows)."""
    e = np.asarray(e, dtype=np.float64)
    rows, cols = int(shape[0]), int(shape[1])
    if e.shape != (cols, rows):
        raise ValueError(f"coefficient matrix must be {cols}x{rows}, got {e.shape}")
    u, _, vt = deterministic_svd(e)
    return vt.T @ u.T


def _updated_g(state: PamState, cfg: PamConfig) -> np.ndarray:
    f = state.factors
    y = face_product(mode_product(state.c, f.t.T, 3), f.h.T, (1, 3))
    e = cfg.alpha * mode_unfold(state.x, 3).T @ mode_unfold(y, 3) + cfg.rho[3] * f.g.T
    return update_factor_procrustes(e, f.g.shape)


def _updated_h(state: PamState, cfg: PamConfig) -> np.ndarray:
    f = state.factors
    a = vec_face_product(state.x, f.g, (1, 2))
    y = mode_product(state.c, f.t.T, 3)
    e = cfg.alpha * mode_unfold(a, 1) @ mode_unfold(y, 1).T + cfg.rho[4] * f.h.T
    return update_factor_procrustes(e, f.h.shape)


def _updated_t(state: PamState, cfg: PamConfig) -> np.ndarray:
    f = state.factors
    w = face_product(vec_face_product(state.x, f.g, (1, 2)), f.h, (1, 3))
    e = cfg.alpha * mode_unfold(w, 3) @ mode_unfold(state.c, 3).T + cfg.rho[5] * f.t.T
    return update_factor_procrustes(e, f.t.shape)


def linear_interp_init(o: np.ndarray, mask: ObservationMask) -> np.ndarray:
    """Mode-3 fiberwise linear interpolation of the observed entries.

    Boundary gaps copy the nearest observed value; fully missing fibers take
    the global observed mean.
    """
    o = as_tensor3(o)
    obs = mask.observed
    if not obs.any():
        raise ValueError("cannot interpolate a tensor with zero observed entries")
    n1, n2, n3 = o.shape
    t = np.arange(n3, dtype=np.float64)
    global_mean = float(o[obs].mean())
    out = np.empty_like(o)
    for i in range(n1):
        for j in range(n2):
            sel = obs[i, j, :]
            if sel.all():
                out[i, j, :] = o[i, j, :]
            elif sel.any():
                out[i, j, :] = np.interp(t, t[sel], o[i, j, sel])
            else:
                out[i, j, :] = global_mean
    out[obs] = o[obs]
    return out


def split_validation(mask: ObservationMask, fraction: float, rng: np.random.Generator):
    """Carve a seeded validation subset out of the observed entries.

    Returns (train mask, validation selector).  The split must happen
    before any initializer sees the data, otherwise held-out entries leak
    into the init and validation scoring degenerates.
    """
    if fraction == 0:
        return mask, np.zeros(mask.dims, dtype=bool)
    obs_lin = mask.linear_indices
    n_val = int(np.floor(fraction * obs_lin.size))
    if n_val == 0:
        return mask, np.zeros(mask.dims, dtype=bool)
    val_lin = rng.permutation(obs_lin)[:n_val]
    flat = np.zeros(int(np.prod(mask.dims)), dtype=bool)
    flat[val_lin] = True
    val = flat.reshape(mask.dims, order="F")
    return ObservationMask(mask.dims, mask.observed & ~val), val


def _delta_sq(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return float(np.sum(d * d))


def solve_mnt_tnn(
    o: np.ndarray,
    mask: ObservationMask,
    init: np.ndarray,
    factors: FactorSet,
    cfg: PamConfig | None = None,
    validation: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Run the alternating solver until the relative change of X drops to
    ``cfg.tol`` or ``cfg.max_iters`` is hit.

    ``validation`` selects held-out entries of ``o`` that are absent from
    ``mask`` (use :func:`split_validation` before building the init); when
    given, every iterate is scored there and the best one is returned,
    since the nonconvex path is not monotone in imputation error.  Values
    are internally rescaled by the largest observed magnitude so the
    bounded activations operate in their informative range; the output is
    rescaled back and the observed entries re-pinned bit-exactly.
    """
    t0 = time.perf_counter()
    cfg = cfg or PamConfig()
    o = as_tensor3(o)
    init = as_tensor3(init)
    dims = o.shape
    if mask.dims != dims or init.shape != dims:
        raise ValueError("observed tensor, init and mask must share dims")
    _assert_feasible(init, o, mask)
    factors.validate(dims)
    n_val = 0
    if validation is not None:
        validation = np.asarray(validation, dtype=bool)
        if validation.shape != dims:
            raise ValueError("validation selector must match tensor dims")
        if (validation & mask.observed).any():
            raise ValueError("validation entries must be disjoint from the observed mask")
        n_val = int(validation.sum())

    scale = 1.0
    if cfg.rescale:
        observed_abs = np.abs(o[mask.observed])
        peak = float(observed_abs.max()) if observed_abs.size else 0.0
        scale = peak if peak > 0 else 1.0
    o_w = o / scale

    state = PamState(x=init / scale, z=None, c=None, factors=factors)  # type: ignore[arg-type]
    state.c = apply_mnt_linear(state.x, factors)
    state.z = factors.activation.value(state.c)
    state.objective = _objective_value(state, cfg)

    obj_trace = [state.objective]
    rel_trace: list[float] = []
    val_trace: list[float] = []

    def val_rmse(x):
        if n_val == 0:
            return np.nan
        diff = x[validation] - o_w[validation]
        return float(np.sqrt(np.mean(diff * diff))) * scale

    best_rmse = val_rmse(state.x)
    val_trace.append(best_rmse)
    best_x = state.x
    best_iteration = 0

    worst_violation = 0.0
    n_violations = 0
    stop_reason = "max_iters"
    iterations = 0
    rho_decay = 0.5 * cfg.rho_min

    for k in range(1, cfg.max_iters + 1):
        prev = (
            state.x,
            state.z,
            state.c,
            state.factors.g,
            state.factors.h,
            state.factors.t,
        )
        y_prev = state.objective

        state.x = update_x(state, o_w, mask, cfg)
        state.z = update_z(state, cfg)
        state.c = update_c(state, cfg)
        if cfg.update_g:
            state.factors = replace(state.factors, g=_updated_g(state, cfg))
        if cfg.update_h:
            state.factors = replace(state.factors, h=_updated_h(state, cfg))
        if cfg.update_t:
            state.factors = replace(state.factors, t=_updated_t(state, cfg))
        state.iteration = iterations = k
        state.objective = _objective_value(state, cfg)
        obj_trace.append(state.objective)

        if cfg.decrease_check != "off":
            moved = (
                _delta_sq(state.x, prev[0])
                + _delta_sq(state.z, prev[1])
                + _delta_sq(state.c, prev[2])
                + _delta_sq(state.factors.g, prev[3])
                + _delta_sq(state.factors.h, prev[4])
                + _delta_sq(state.factors.t, prev[5])
            )
            violation = state.objective + rho_decay * moved - y_prev
            if violation > worst_violation:
                worst_violation = violation
            if violation > cfg.decrease_slack:
                n_violations += 1
                msg = (
                    f"sufficient decrease violated at iteration {k}: "
                    f"excess {violation:.3e} > slack {cfg.decrease_slack:.0e}"
                )
                if cfg.decrease_check == "raise":
                    raise SufficientDecreaseError(msg)
                if n_violations == 1:
                    # expected with a semi-orthogonal T (d < n3): the closed
                    # forms for X and T solve their subproblems exactly only
                    # for square factors; log once, count in the report
                    log.warning("%s (further violations counted silently)", msg)

        prev_norm = float(np.linalg.norm(prev[0]))
        rel = float(np.linalg.norm(state.x - prev[0])) / max(prev_norm, 1e-12)
        rel_trace.append(rel)

        if n_val:
            current_rmse = val_rmse(state.x)
            val_trace.append(current_rmse)
            if current_rmse < best_rmse:
                best_rmse = current_rmse
                best_x = state.x
                best_iteration = k
        else:
            best_x = state.x
            best_iteration = k

        # The first X step cannot move: the initial core is exactly the
        # transform of the initial X, so the stop test starts at k = 2.
        if rel <= cfg.tol and k >= 2:
            stop_reason = "tol"
            break

    result = best_x * scale
    result[mask.observed] = o[mask.observed]
    report = SolveReport(
        iterations=iterations,
        stop_reason=stop_reason,
        objective_trace=obj_trace,
        rel_change_trace=rel_trace,
        validation_rmse_trace=val_trace,
        best_iteration=best_iteration,
        wall_seconds=time.perf_counter() - t0,
        scale=scale,
        decrease_violation_max=worst_violation,
        decrease_violations=n_violations,
        n_train_observed=mask.n_observed,
        n_validation=n_val,
    )
    return result, report
