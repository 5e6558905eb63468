"""Boosting chain of completion optimizers: convex transform methods first,
then nonlinear multimode methods, each stage warm-starting the next.

The convex stages cope with cold starts; the nonlinear stages are
initialization-hungry but stronger once seeded, so a linear-to-nonlinear
order compensates both weaknesses at high missing rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .convex import ConvexConfig, solve_convex_ttnn
from .graph_factors import data_transform, temporal_factor_t
from .masks import ObservationMask
from .solver import PamConfig, linear_interp_init, solve_mnt_tnn, split_validation
from .transforms import FactorSet, activation

LINEAR_METHODS = ("TNN", "UTNN")
NONLINEAR_METHODS = ("NTTNN", "MNT-TNN")
METHODS = LINEAR_METHODS + NONLINEAR_METHODS
DEFAULT_ORDER = ("TNN", "UTNN", "NTTNN", "MNT-TNN")


@dataclass(frozen=True)
class StageSpec:
    method: str
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")


@dataclass(frozen=True)
class ChainSpec:
    stages: tuple[StageSpec, ...]

    def __post_init__(self):
        stages = tuple(
            s if isinstance(s, StageSpec) else StageSpec(s) for s in self.stages
        )
        if not stages:
            raise ValueError("a chain needs at least one stage")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def from_names(cls, names) -> "ChainSpec":
        return cls(tuple(StageSpec(n) for n in names))


def default_chain() -> ChainSpec:
    return ChainSpec.from_names(DEFAULT_ORDER)


@dataclass
class StageResult:
    method: str
    output: np.ndarray
    report: object


@dataclass
class ChainResult:
    final: np.ndarray
    stages: list[StageResult]


class ChainStageError(RuntimeError):
    """A stage failed; ``completed`` holds the finished prefix."""

    def __init__(self, stage_index: int, method: str, completed: list[StageResult], cause):
        super().__init__(f"chain stage {stage_index} ({method}) failed: {cause}")
        self.stage_index = stage_index
        self.method = method
        self.completed = completed


def _with_overrides(cfg, overrides: dict):
    if not overrides:
        return cfg
    known = {f.name for f in fields(cfg)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown config overrides: {sorted(unknown)}")
    return replace(cfg, **overrides)


def resolve_core_depth(n3: int, d: int | None) -> int:
    return int(np.ceil(n3 / 4)) if d is None else int(d)


def nttnn_config(base: PamConfig) -> PamConfig:
    """Single-mode nonlinear configuration: identity G, H with their
    updates disabled; the MNT-TNN code path runs unchanged."""
    return replace(base, update_g=False, update_h=False)


def _identity_gh_factors(dims, t: np.ndarray, act: str) -> FactorSet:
    n1, n2, _ = dims
    return FactorSet(g=np.eye(n1 * n2), h=np.eye(n1), t=t, activation=activation(act))


def run_stage(
    method: str,
    o: np.ndarray,
    mask: ObservationMask,
    init: np.ndarray,
    pam: PamConfig,
    convex: ConvexConfig,
    factors: FactorSet | None = None,
    validation: np.ndarray | None = None,
):
    """Run one optimizer on (o, mask) from the given feasible init."""
    dims = o.shape
    if method == "TNN":
        return solve_convex_ttnn(o, mask, "dft", convex, init=init)
    if method == "UTNN":
        return solve_convex_ttnn(o, mask, data_transform(init), convex, init=init)
    d = resolve_core_depth(dims[2], pam.d)
    if method == "NTTNN":
        f = _identity_gh_factors(dims, temporal_factor_t(init, d), pam.activation)
        return solve_mnt_tnn(o, mask, init, f, nttnn_config(pam), validation=validation)
    if method == "MNT-TNN":
        f = factors or _identity_gh_factors(dims, temporal_factor_t(init, d), pam.activation)
        return solve_mnt_tnn(o, mask, init, f, pam, validation=validation)
    raise ValueError(f"unknown method {method!r}")


def run_chain(
    o: np.ndarray,
    mask: ObservationMask,
    spec: ChainSpec | None = None,
    factors: FactorSet | None = None,
    pam: PamConfig | None = None,
    convex: ConvexConfig | None = None,
    factor_builder=None,
) -> ChainResult:
    """Run the stages in order.

    Stage 1 starts from fiberwise linear interpolation; every later stage
    starts from the previous output with the observed entries re-pinned, so
    each stage sees a feasible input.  MNT-TNN stages take ``factors`` when
    given, otherwise ``factor_builder(init)`` when given, otherwise identity
    G, H with a data-driven T.
    """
    spec = spec or default_chain()
    pam = pam or PamConfig()
    convex = convex or ConvexConfig()
    # The validation holdout is carved out before initialization so no
    # stage (and no init) ever sees those entries; they only score the
    # nonlinear iterates.  The final output re-pins the full observed set.
    # The split must not depend on the stage list, or removing trailing
    # stages would change earlier stages' outputs.
    rng = np.random.default_rng(pam.seed)
    train_mask, val_sel = split_validation(mask, pam.validation_fraction, rng)
    validation = val_sel if val_sel.any() else None
    current = linear_interp_init(o, train_mask)
    completed: list[StageResult] = []
    for idx, stage in enumerate(spec.stages):
        current = current.copy()
        current[train_mask.observed] = o[train_mask.observed]
        try:
            pam_k = _with_overrides(pam, stage.overrides) if stage.method in NONLINEAR_METHODS else pam
            convex_k = _with_overrides(convex, stage.overrides) if stage.method in LINEAR_METHODS else convex
            stage_factors = None
            if stage.method == "MNT-TNN":
                if factors is not None:
                    stage_factors = factors
                elif factor_builder is not None:
                    stage_factors = factor_builder(current)
            out, report = run_stage(
                stage.method, o, train_mask, current, pam_k, convex_k,
                factors=stage_factors, validation=validation,
            )
        except Exception as exc:
            raise ChainStageError(idx, stage.method, completed, exc) from exc
        completed.append(StageResult(stage.method, out, report))
        current = out
    final = completed[-1].output.copy()
    final[mask.observed] = o[mask.observed]
    return ChainResult(final=final, stages=completed)
