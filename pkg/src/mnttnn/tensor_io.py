"""On-disk formats.

Binary tensor container ("T3D1"): 4 magic bytes, three unsigned 32-bit
little-endian dims (n1, n2, n3), then n1*n2*n3 little-endian float64
values in column-major order (first mode fastest).  Matrices ride in the
same container as (rows, cols, 1).  CSV triplet files hold 0-indexed
``i,j,t,value`` rows; absent cells default to zero.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .masks import ObservationMask
from .tensor_ops import as_tensor3
from .transforms import FactorSet, activation

log = logging.getLogger(__name__)

MAGIC = b"T3D1"
SIGN_CONVENTION = "largest-abs-entry-nonnegative-v1"


class ParseError(ValueError):
    """Malformed input file."""


def save_tensor_binary(path, x: np.ndarray) -> None:
    x = as_tensor3(x)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.asarray(x.shape, dtype="<u4").tobytes())
        fh.write(x.ravel(order="F").astype("<f8").tobytes())


def load_tensor_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise ParseError(f"{path}: missing {MAGIC!r} magic header")
    dims = tuple(int(v) for v in np.frombuffer(raw[4:16], dtype="<u4"))
    if min(dims) < 1:
        raise ParseError(f"{path}: nonpositive dimension in header {dims}")
    expected = 16 + 8 * dims[0] * dims[1] * dims[2]
    if len(raw) != expected:
        raise ParseError(
            f"{path}: expected {expected} bytes for dims {dims}, found {len(raw)}"
        )
    values = np.frombuffer(raw[16:], dtype="<f8")
    return values.reshape(dims, order="F").copy()


def save_tensor_csv(path, x: np.ndarray) -> None:
    x = as_tensor3(x)
    n1, n2, n3 = x.shape
    with open(path, "w") as fh:
        fh.write("i,j,t,value\n")
        for t in range(n3):
            for j in range(n2):
                for i in range(n1):
                    fh.write(f"{i},{j},{t},{float(x[i, j, t])!r}\n")


def load_tensor_csv(path, dims: tuple[int, int, int]) -> np.ndarray:
    dims = tuple(int(d) for d in dims)
    x = np.zeros(dims)
    filled = np.zeros(dims, dtype=bool)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or (lineno == 1 and line.lower().startswith("i,")):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                i, j, t = int(parts[0]), int(parts[1]), int(parts[2])
                v = float(parts[3])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not (0 <= i < dims[0] and 0 <= j < dims[1] and 0 <= t < dims[2]):
                raise ParseError(
                    f"{path}:{lineno}: index ({i},{j},{t}) outside dims {dims}"
                )
            x[i, j, t] = v
            filled[i, j, t] = True
    n_absent = int((~filled).sum())
    if n_absent:
        log.warning("%s: %d of %d cells absent, defaulted to 0", path, n_absent, x.size)
    return x


def save_tensor(path, x: np.ndarray, fmt: str = "binary") -> None:
    if fmt == "binary":
        save_tensor_binary(path, x)
    elif fmt == "csv":
        save_tensor_csv(path, x)
    else:
        raise ValueError(f"unknown tensor format {fmt!r}")


def load_tensor(path, fmt: str = "binary", dims: tuple[int, int, int] | None = None) -> np.ndarray:
    if fmt == "binary":
        return load_tensor_binary(path)
    if fmt == "csv":
        if dims is None:
            raise ValueError("loading csv triplets requires explicit dims")
        return load_tensor_csv(path, dims)
    raise ValueError(f"unknown tensor format {fmt!r}")


def save_matrix(path, m: np.ndarray) -> None:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    save_tensor_binary(path, m[:, :, None])


def load_matrix(path) -> np.ndarray:
    x = load_tensor_binary(path)
    if x.shape[2] != 1:
        raise ParseError(f"{path}: expected a matrix container (n3=1), got dims {x.shape}")
    return x[:, :, 0]


def save_mask(path, mask: ObservationMask) -> None:
    save_tensor_binary(path, mask.observed.astype(np.float64))


def load_mask(path) -> ObservationMask:
    x = load_tensor_binary(path)
    if not np.isin(x, (0.0, 1.0)).all():
        raise ParseError(f"{path}: mask values must be 0 or 1")
    return ObservationMask(x.shape, x.astype(bool))


def save_factor_set(outdir, factors: FactorSet, params: dict | None = None) -> None:
    """One container file per factor plus a JSON manifest of provenance."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_matrix(outdir / "G.t3d", factors.g)
    save_matrix(outdir / "H.t3d", factors.h)
    save_matrix(outdir / "T.t3d", factors.t)
    manifest = {
        "activation": factors.activation.name,
        "d": factors.d,
        "sign_convention": SIGN_CONVENTION,
    }
    manifest.update(params or {})
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_factor_set(outdir) -> FactorSet:
    outdir = Path(outdir)
    manifest = json.loads((outdir / "manifest.json").read_text())
    return FactorSet(
        g=load_matrix(outdir / "G.t3d"),
        h=load_matrix(outdir / "H.t3d"),
        t=load_matrix(outdir / "T.t3d"),
        activation=activation(manifest.get("activation", "identity")),
    )
