"""Command line surface: impute, bench, mask, factors, verify."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment, tensor_io, verify
from .chain import run_chain
from .convex import ConvexConfig
from .graph_factors import (
    build_spatial_graph,
    normalized_laplacian,
    spatial_factor_g,
    spatiotemporal_factor_h,
    temporal_factor_t,
    WaveletConfig,
)
from .masks import MaskSpec, gen_mask
from .metrics import mape_with_counts, rmse
from .solver import PamConfig


def _dims(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("dims must be three comma-separated integers")
    return tuple(parts)


def _load_tensor_arg(args) -> np.ndarray:
    fmt = getattr(args, "format", "binary")
    dims = getattr(args, "dims", None)
    return tensor_io.load_tensor(args.tensor, fmt, dims)


def _solver_configs(args):
    cfg = {}
    if getattr(args, "config", None):
        cfg = experiment.load_config(args.config)
    pam = PamConfig(**cfg.get("solver", {}))
    convex = ConvexConfig(**cfg.get("convex", {}))
    if getattr(args, "seed", None) is not None:
        pam.seed = args.seed
    return pam, convex, cfg


def cmd_impute(args) -> int:
    truth = _load_tensor_arg(args)
    pam, convex, cfg = _solver_configs(args)
    have_truth = args.mask is None
    if args.mask:
        mask = tensor_io.load_mask(args.mask)
    else:
        mask = gen_mask(truth.shape, MaskSpec(args.pattern, args.missing_rate, args.seed))
    observed = np.where(mask.observed, truth, 0.0)
    spec = experiment._chain_spec_for(args.method, cfg)
    result = run_chain(observed, mask, spec, pam=pam, convex=convex)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    tensor_io.save_tensor(outdir / "imputed.t3d", result.final)
    report = {
        "method": args.method,
        "seed": args.seed,
        "stages": [
            {"method": s.method, **s.report.to_dict()} for s in result.stages
        ],
    }
    if have_truth:
        report["missing_rate"] = args.missing_rate
        report["pattern"] = args.pattern
        m, _, excluded = mape_with_counts(truth, result.final, mask.hidden)
        report["mape_pct"] = m
        report["mape_excluded"] = excluded
        report["rmse"] = rmse(truth, result.final, mask.hidden)
    (outdir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"wrote {outdir / 'imputed.t3d'} and report.json")
    if have_truth:
        print(f"MAPE {report['mape_pct']:.4f}%  RMSE {report['rmse']:.6g}")
    return 0


def cmd_bench(args) -> int:
    config = experiment.load_config(args.config)
    if args.reference:
        config["include_reference"] = True
    report = experiment.run_experiment(config)
    json_path, csv_path = experiment.write_report(report, args.out)
    print(f"wrote {json_path} and {csv_path}")
    for row in report.rows:
        if row.error:
            print(f"{row.method} rate={row.missing_rate} seed={row.seed}: ERROR {row.error}")
        else:
            flag = " [reference]" if row.source != "run" else ""
            print(
                f"{row.method} rate={row.missing_rate} seed={row.seed}: "
                f"MAPE {row.mape_pct:.2f}%  RMSE {row.rmse:.4g}{flag}"
            )
    if report.note:
        print(f"note: {report.note}")
    return 0


def cmd_mask(args) -> int:
    if args.tensor:
        dims = tensor_io.load_tensor(args.tensor).shape
    elif args.dims:
        dims = args.dims
    else:
        print("mask needs --dims or --tensor", file=sys.stderr)
        return 2
    mask = gen_mask(dims, MaskSpec(args.pattern, args.missing_rate, args.seed))
    tensor_io.save_mask(args.out, mask)
    print(f"wrote {args.out}: {mask.n_hidden} of {int(np.prod(dims))} entries hidden")
    return 0


def cmd_factors(args) -> int:
    dist = np.loadtxt(args.distances, delimiter=",")
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        print("distance matrix must be square", file=sys.stderr)
        return 2
    side = args.grid_side
    if side is None:
        side = int(round(np.sqrt(dist.shape[0])))
        if side * side != dist.shape[0]:
            print(
                f"{dist.shape[0]} nodes is not a square grid; pass --grid-side",
                file=sys.stderr,
            )
            return 2
    graph = build_spatial_graph(dist, args.sigma, args.kappa)
    g = spatial_factor_g(normalized_laplacian(graph.adjacency))
    h = spatiotemporal_factor_h(graph.adjacency, side, WaveletConfig(scales=args.scales))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    tensor_io.save_matrix(outdir / "G.t3d", g)
    tensor_io.save_matrix(outdir / "H.t3d", h)
    manifest = {
        "sigma": graph.sigma,
        "kappa": graph.kappa,
        "scales": args.scales,
        "grid_side": side,
        "sign_convention": tensor_io.SIGN_CONVENTION,
    }
    if args.tensor:
        x0 = tensor_io.load_tensor(args.tensor)
        d = args.d or int(np.ceil(x0.shape[2] / 4))
        tensor_io.save_matrix(outdir / "T.t3d", temporal_factor_t(x0, d))
        manifest["d"] = d
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote factors to {outdir}")
    return 0


def cmd_verify(args) -> int:
    failures = verify.run_checks(seed=args.seed)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mnttnn",
        description="Multimode nonlinear transform tensor completion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("impute", help="run one method on one masked tensor")
    p.add_argument("--tensor", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--dims", type=_dims, help="required for csv tensors")
    p.add_argument("--method", default="MNT-TNN", choices=experiment.METHOD_NAMES)
    p.add_argument("--missing-rate", type=float, default=0.5)
    p.add_argument("--pattern", choices=("random", "fiber"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask", help="observation mask file; skips mask generation and metrics")
    p.add_argument("--config", help="JSON file with solver/convex sections")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_impute)

    p = sub.add_parser("bench", help="sweep methods x rates x seeds from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reference", action="store_true",
                   help="append published reference rows (flagged, not reproduced)")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("mask", help="emit an observation mask file")
    p.add_argument("--dims", type=_dims)
    p.add_argument("--tensor", help="infer dims from a tensor file")
    p.add_argument("--missing-rate", type=float, required=True)
    p.add_argument("--pattern", choices=("random", "fiber"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mask)

    p = sub.add_parser("factors", help="build transform factors from a distance matrix")
    p.add_argument("--distances", required=True, help="square distance matrix CSV")
    p.add_argument("--grid-side", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--scales", type=int, default=3)
    p.add_argument("--tensor", help="tensor file for the data-driven temporal factor")
    p.add_argument("--d", type=int, help="temporal factor depth (default ceil(n3/4))")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_factors)

    p = sub.add_parser("verify", help="run the built-in invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
