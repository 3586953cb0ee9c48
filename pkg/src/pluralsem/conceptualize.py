"""Predicting plural meanings from singular meanings.

Two conceptualization strategies over a fixed embedding space:

* CCA, class-conditional averaging: the plural vector is the singular vector
  plus the average singular-to-plural difference of the word's semantic
  class, with the corpus-wide average difference as fallback for classes
  never seen in training (fit_cca / ShiftTable)
* FRACSS, a single global linear map taking every singular vector to its
  plural vector by least squares (fit_fracss / FracssMap)

Both are fit from SemanticPair records and both support the decomposition
plural = singular + systematic part + residual.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyTrainingSet, NonFiniteInput, ShapeMismatch

CLASS_METHOD = "cca"
GLOBAL_METHOD = "fracss"
METHODS = (CLASS_METHOD, GLOBAL_METHOD)


@dataclass(frozen=True)
class SemanticPair:
    """A lexeme's singular and plural vectors plus its semantic class."""

    lexeme_id: str
    semantic_class: str | None
    singular: np.ndarray
    plural: np.ndarray


def _pair_matrices(pairs) -> tuple[np.ndarray, np.ndarray]:
    if not pairs:
        raise EmptyTrainingSet("no training pairs")
    dim = pairs[0].singular.shape[-1]
    for p in pairs:
        if p.singular.shape != (dim,) or p.plural.shape != (dim,):
            raise ShapeMismatch(
                f"pair {p.lexeme_id}: expected vectors of {dim} components"
            )
    s = np.stack([p.singular for p in pairs]).astype(np.float64)
    t = np.stack([p.plural for p in pairs]).astype(np.float64)
    if not (np.isfinite(s).all() and np.isfinite(t).all()):
        raise NonFiniteInput("pair vectors contain NaN or infinity")
    return s, t


@dataclass(frozen=True)
class ShiftTable:
    """Per-class average shift vectors with a global fallback.

    class_shifts maps class name to the mean plural-minus-singular vector of
    the training pairs in that class; global_shift is the mean over all
    training pairs and is used for classes never seen in training.
    """

    class_shifts: dict[str, np.ndarray]
    global_shift: np.ndarray
    class_counts: dict[str, int]
    n_pairs: int

    @property
    def dim(self) -> int:
        return int(self.global_shift.shape[0])

    def is_known(self, semantic_class: str | None) -> bool:
        return semantic_class in self.class_shifts

    def shift_for(self, semantic_class: str | None) -> tuple[np.ndarray, bool]:
        """The shift to apply for a class, plus whether a fallback was used."""
        known = self.is_known(semantic_class)
        if known:
            return self.class_shifts[semantic_class], False
        return self.global_shift, True


def fit_cca(pairs: list[SemanticPair]) -> ShiftTable:
    """Average the plural-minus-singular differences within each class.

    Pairs without a class contribute to the global mean only. Classes are
    averaged in sorted order so the result is independent of input order.
    """
    s, t = _pair_matrices(pairs)
    diffs = t - s
    by_class: dict[str, list[int]] = {}
    for i, p in enumerate(pairs):
        if p.semantic_class is not None:
            by_class.setdefault(p.semantic_class, []).append(i)
    class_shifts = {}
    class_counts = {}
    for cls in sorted(by_class):
        rows = by_class[cls]
        class_shifts[cls] = diffs[rows].mean(axis=0)
        class_counts[cls] = len(rows)
    return ShiftTable(
        class_shifts=class_shifts,
        global_shift=diffs.mean(axis=0),
        class_counts=class_counts,
        n_pairs=len(pairs),
    )


def predict_cca(singular: np.ndarray, semantic_class: str | None,
                table: ShiftTable) -> np.ndarray:
    """singular + class shift; unseen classes fall back to the global shift.

    Use table.is_known / table.shift_for when the caller needs the fallback
    flag.
    """
    singular = np.asarray(singular, dtype=np.float64)
    if singular.shape != (table.dim,):
        raise ShapeMismatch(
            f"expected vector of {table.dim} components, got {singular.shape}"
        )
    shift, _ = table.shift_for(semantic_class)
    return singular + shift


@dataclass(frozen=True)
class FracssMap:
    """One linear map sending any singular vector to a predicted plural."""

    weights: np.ndarray
    ridge: float
    n_pairs: int

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])


def fit_fracss(singulars: np.ndarray, plurals: np.ndarray,
               ridge: float = 0.0) -> FracssMap:
    """Least squares fit of plurals = singulars @ weights.

    No intercept. ridge > 0 switches to a ridge solution via the normal
    equations; ridge 0 (the default) gives the minimum-norm least squares
    solution.
    """
    s = np.asarray(singulars, dtype=np.float64)
    t = np.asarray(plurals, dtype=np.float64)
    if s.ndim != 2 or t.ndim != 2:
        raise ShapeMismatch("training matrices must be 2-d")
    if s.shape != t.shape:
        raise ShapeMismatch(f"singulars {s.shape} vs plurals {t.shape}")
    if s.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    if not (np.isfinite(s).all() and np.isfinite(t).all()):
        raise NonFiniteInput("training matrices contain NaN or infinity")
    if ridge < 0:
        raise ShapeMismatch(f"ridge must be nonnegative, got {ridge}")
    if ridge == 0.0:
        weights = np.linalg.lstsq(s, t, rcond=None)[0]
    else:
        gram = s.T @ s + ridge * np.eye(s.shape[1])
        weights = np.linalg.pinv(gram, hermitian=True) @ (s.T @ t)
    return FracssMap(weights=weights, ridge=float(ridge), n_pairs=s.shape[0])


def fit_fracss_from_pairs(pairs: list[SemanticPair],
                          ridge: float = 0.0) -> FracssMap:
    s, t = _pair_matrices(pairs)
    return fit_fracss(s, t, ridge=ridge)


def predict_fracss(singular: np.ndarray, mapping: FracssMap) -> np.ndarray:
    """Apply the fitted map to one vector or to rows of a matrix."""
    singular = np.asarray(singular, dtype=np.float64)
    if singular.shape[-1] != mapping.dim:
        raise ShapeMismatch(
            f"expected {mapping.dim} components, got {singular.shape[-1]}"
        )
    return singular @ mapping.weights


def decompose(pair: SemanticPair, predicted_plural: np.ndarray) -> np.ndarray:
    """Residual that completes singular + systematic part + residual = plural.

    predicted_plural is whatever a conceptualizer produced for the pair's
    singular; the returned vector is the gold plural minus that prediction.
    """
    predicted_plural = np.asarray(predicted_plural, dtype=np.float64)
    if predicted_plural.shape != pair.plural.shape:
        raise ShapeMismatch(
            f"prediction {predicted_plural.shape} vs plural {pair.plural.shape}"
        )
    return np.asarray(pair.plural, dtype=np.float64) - predicted_plural


def pairs_from_types(types, vectors: dict[str, np.ndarray],
                     restrict_to: set[str] | None = None) -> list[SemanticPair]:
    """Build training pairs from word types and type-keyed vectors.

    A pair is emitted for every lexeme whose SG and PL types both have
    vectors (and, when restrict_to is given, are both in that set). The
    class comes from the singular type. Pairs are ordered by lexeme_id.
    """
    from .corpus import PLURAL, SINGULAR

    if isinstance(types, dict):
        type_list = [types[i] for i in sorted(types)]
    else:
        type_list = sorted(types, key=lambda t: t.type_id)
    by_lexeme: dict[str, dict[str, object]] = {}
    for t in type_list:
        if restrict_to is not None and t.type_id not in restrict_to:
            continue
        if t.type_id in vectors:
            by_lexeme.setdefault(t.lexeme_id, {})[t.number] = t
    pairs = []
    for lexeme_id in sorted(by_lexeme):
        slots = by_lexeme[lexeme_id]
        if SINGULAR in slots and PLURAL in slots:
            sg, pl = slots[SINGULAR], slots[PLURAL]
            pairs.append(SemanticPair(
                lexeme_id=lexeme_id,
                semantic_class=sg.semantic_class,
                singular=vectors[sg.type_id],
                plural=vectors[pl.type_id],
            ))
    return pairs


def write_shift_csv(pairs: list[SemanticPair], table: ShiftTable,
                    path: str | Path) -> None:
    """Per-pair shift vectors plus class means and the global mean, as CSV.

    Column layout: kind, lexeme_id, semantic_class, then one column per
    vector component. kind is pair, class_mean, or global_mean.
    """
    dim = table.dim
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "lexeme_id", "semantic_class"]
                    + [f"c{i}" for i in range(dim)])

    def vec_cells(v):
        return [repr(float(x)) for x in v]

    for p in sorted(pairs, key=lambda p: p.lexeme_id):
        shift = np.asarray(p.plural, dtype=np.float64) - np.asarray(
            p.singular, dtype=np.float64)
        writer.writerow(["pair", p.lexeme_id, p.semantic_class or ""]
                        + vec_cells(shift))
    for cls in sorted(table.class_shifts):
        writer.writerow(["class_mean", "", cls] + vec_cells(table.class_shifts[cls]))
    writer.writerow(["global_mean", "", ""] + vec_cells(table.global_shift))
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
