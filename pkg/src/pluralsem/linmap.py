"""Linear form-to-meaning mapping fit by streamed normal equations.

The solver never materializes anything larger than the cross products: it
accumulates X'X and X'Y over row blocks, then applies a pseudoinverse (with
small singular values truncated at rcond, optionally ridge-stabilized).
For duplicated targets, where many feature rows share one target vector,
solve_grouped computes X'Y from per-group feature sums instead of expanding
the target matrix row by row.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import matio
from .errors import EmptyTrainingSet, IoFailure, NonFiniteInput, ShapeMismatch

DEFAULT_RCOND = 1e-10
DEFAULT_BLOCK_ROWS = 4096


@dataclass
class LinearMap:
    """Fitted weights (features x semantic dims) plus fit metadata."""

    weights: np.ndarray
    ridge: float = 0.0
    rcond: float = DEFAULT_RCOND
    provenance: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_outputs(self) -> int:
        return int(self.weights.shape[1])


def _check_finite(name: str, m: np.ndarray) -> None:
    if not np.isfinite(m).all():
        raise NonFiniteInput(f"{name} contains NaN or infinity")


def cross_products(x: np.ndarray, y: np.ndarray,
                   block_rows: int = DEFAULT_BLOCK_ROWS) -> tuple[np.ndarray, np.ndarray]:
    """X'X and X'Y accumulated over row blocks in order."""
    xtx = np.zeros((x.shape[1], x.shape[1]))
    xty = np.zeros((x.shape[1], y.shape[1]))
    for start in range(0, x.shape[0], block_rows):
        xb = x[start:start + block_rows]
        yb = y[start:start + block_rows]
        xtx += xb.T @ xb
        xty += xb.T @ yb
    return xtx, xty


def _solve_from_cross_products(xtx: np.ndarray, xty: np.ndarray, ridge: float,
                               rcond: float) -> np.ndarray:
    if ridge < 0:
        raise ShapeMismatch(f"ridge must be nonnegative, got {ridge}")
    if ridge > 0:
        xtx = xtx + ridge * np.eye(xtx.shape[0])
    return np.linalg.pinv(xtx, rcond=rcond, hermitian=True) @ xty


def solve_least_squares(x: np.ndarray, y: np.ndarray, ridge: float = 0.0,
                        rcond: float = DEFAULT_RCOND,
                        block_rows: int = DEFAULT_BLOCK_ROWS) -> LinearMap:
    """Minimum-norm least squares solution of x @ W = y.

    With ridge 0 the pseudoinverse route reproduces the Moore-Penrose
    solution; larger rcond trades fidelity for stability on ill-conditioned
    feature sets.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise ShapeMismatch("inputs must be 2-d")
    if x.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"{x.shape[0]} feature rows vs {y.shape[0]} target rows")
    if x.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    _check_finite("features", x)
    _check_finite("targets", y)
    xtx, xty = cross_products(x, y, block_rows)
    weights = _solve_from_cross_products(xtx, xty, ridge, rcond)
    return LinearMap(weights=weights, ridge=float(ridge), rcond=float(rcond),
                     provenance={"n_rows": int(x.shape[0]), "grouped": False})


def solve_grouped(x: np.ndarray, group_index: np.ndarray, targets: np.ndarray,
                  ridge: float = 0.0, rcond: float = DEFAULT_RCOND,
                  block_rows: int = DEFAULT_BLOCK_ROWS) -> LinearMap:
    """Least squares where row i's target is targets[group_index[i]].

    Equivalent to solve_least_squares(x, targets[group_index]) but X'Y is
    formed from per-group sums of feature rows, so the duplicated target
    matrix never exists.
    """
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    group_index = np.asarray(group_index)
    if x.ndim != 2 or targets.ndim != 2:
        raise ShapeMismatch("inputs must be 2-d")
    if group_index.shape != (x.shape[0],):
        raise ShapeMismatch(
            f"group index of {group_index.shape} for {x.shape[0]} rows"
        )
    if x.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    if group_index.size and (group_index.min() < 0
                             or group_index.max() >= targets.shape[0]):
        raise ShapeMismatch("group index out of range")
    _check_finite("features", x)
    _check_finite("targets", targets)
    xtx = np.zeros((x.shape[1], x.shape[1]))
    group_sums = np.zeros((targets.shape[0], x.shape[1]))
    for start in range(0, x.shape[0], block_rows):
        xb = x[start:start + block_rows]
        xtx += xb.T @ xb
        np.add.at(group_sums, group_index[start:start + block_rows], xb)
    xty = group_sums.T @ targets
    weights = _solve_from_cross_products(xtx, xty, ridge, rcond)
    return LinearMap(weights=weights, ridge=float(ridge), rcond=float(rcond),
                     provenance={"n_rows": int(x.shape[0]), "grouped": True})


def predict(mapping: LinearMap, x: np.ndarray) -> np.ndarray:
    """Predicted target rows for feature rows x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != mapping.n_features:
        raise ShapeMismatch(
            f"{x.shape[1]} feature columns, map expects {mapping.n_features}"
        )
    _check_finite("features", x)
    return x @ mapping.weights


def _provenance_blob(mapping: LinearMap) -> bytes:
    doc = {
        "kind": "linear-map",
        "n_features": mapping.n_features,
        "n_outputs": mapping.n_outputs,
        "ridge": mapping.ridge,
        "rcond": mapping.rcond,
        "provenance": mapping.provenance,
    }
    return json.dumps(doc, sort_keys=True, indent=2).encode() + b"\n"


def save_map(mapping: LinearMap, path: str | Path) -> None:
    """Write weights to the binary container plus a JSON sidecar.

    The sidecar lands at <path>.provenance.json; its hash is embedded in the
    container header. Weights round to float32 on disk.
    """
    path = Path(path)
    blob = _provenance_blob(mapping)
    matio.write_matrix(path, mapping.weights, hashlib.sha256(blob).digest())
    sidecar = path.with_name(path.name + ".provenance.json")
    try:
        sidecar.write_bytes(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {sidecar}: {exc}") from exc


def load_map(path: str | Path) -> LinearMap:
    path = Path(path)
    values, meta_hash = matio.read_matrix(path)
    sidecar = path.with_name(path.name + ".provenance.json")
    ridge, rcond, provenance = 0.0, DEFAULT_RCOND, {}
    if sidecar.exists():
        blob = sidecar.read_bytes()
        if hashlib.sha256(blob).digest() != meta_hash:
            raise IoFailure(f"{sidecar} does not match the container hash")
        doc = json.loads(blob)
        ridge = float(doc.get("ridge", 0.0))
        rcond = float(doc.get("rcond", DEFAULT_RCOND))
        provenance = doc.get("provenance", {})
    return LinearMap(weights=values.astype(np.float64), ridge=ridge,
                     rcond=rcond, provenance=provenance)
