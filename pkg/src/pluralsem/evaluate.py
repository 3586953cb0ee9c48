"""Scoring predicted semantic vectors against a gold type inventory.

Predictions are compared to every row of a type-level gold matrix by
Pearson correlation; the predicted type for a token is the most correlated
gold row. Ties resolve in favor of the earlier gold row, so rankings are
total and reproducible.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.stats import chi2, norm

from .corpus import PLURAL, SINGULAR, LexemeGroups, WordType
from .errors import (
    InvalidCounts,
    LengthMismatch,
    NonFiniteInput,
    UnknownTarget,
)
from .stats import pearson_matrix

GROUP_NAMES = ("sg_with_pl", "sg_without_pl", "pl_with_sg", "pl_without_sg")

CONFUSION_ROWS = (SINGULAR, PLURAL)
CONFUSION_COLS = ("SG_lexeme_match", "SG_lexeme_other",
                  "PL_lexeme_match", "PL_lexeme_other")


@dataclass(frozen=True)
class GoldIndex:
    """Ordered gold inventory: one row per type, sorted by type_id."""

    type_ids: tuple[str, ...]
    matrix: np.ndarray
    number_of: dict[str, str]
    lexeme_of: dict[str, str]

    @classmethod
    def from_vectors(cls, vectors: dict[str, np.ndarray],
                     types: dict[str, WordType]) -> "GoldIndex":
        ids = tuple(sorted(vectors))
        missing = [i for i in ids if i not in types]
        if missing:
            raise UnknownTarget(f"no type records for {missing[:5]}")
        matrix = np.stack([vectors[i] for i in ids]).astype(np.float64)
        return cls(
            type_ids=ids,
            matrix=matrix,
            number_of={i: types[i].number for i in ids},
            lexeme_of={i: types[i].lexeme_id for i in ids},
        )

    def __len__(self) -> int:
        return len(self.type_ids)

    def position(self, type_id: str) -> int:
        # cache the lookup table on first use
        table = self.__dict__.get("_positions")
        if table is None:
            table = {t: i for i, t in enumerate(self.type_ids)}
            self.__dict__["_positions"] = table
        if type_id not in table:
            raise UnknownTarget(f"type {type_id!r} not in the gold index")
        return table[type_id]


def _check_predictions(predictions: np.ndarray, gold: GoldIndex) -> np.ndarray:
    predictions = np.asarray(predictions, dtype=np.float64)
    if predictions.ndim == 1:
        predictions = predictions[None, :]
    if predictions.shape[1] != gold.matrix.shape[1]:
        raise LengthMismatch(
            f"predictions have {predictions.shape[1]} dims, gold has "
            f"{gold.matrix.shape[1]}"
        )
    if not np.isfinite(predictions).all():
        raise NonFiniteInput("predictions contain NaN or infinity")
    return predictions


def target_ranks(predictions: np.ndarray, target_ids: list[str],
                 gold: GoldIndex) -> np.ndarray:
    """0-based rank of each token's target among all gold rows.

    Rank counts strictly better candidates plus equally-correlated
    candidates that sit earlier in gold row order, so a constant prediction
    ranks its target at the target's own row position.
    """
    predictions = _check_predictions(predictions, gold)
    if predictions.shape[0] != len(target_ids):
        raise LengthMismatch(
            f"{predictions.shape[0]} predictions for {len(target_ids)} targets"
        )
    tidx = np.array([gold.position(t) for t in target_ids])
    r = pearson_matrix(predictions, gold.matrix)
    r_target = r[np.arange(r.shape[0]), tidx]
    better = (r > r_target[:, None]).sum(axis=1)
    cols = np.arange(len(gold))
    tied_earlier = ((r == r_target[:, None]) & (cols[None, :] < tidx[:, None])).sum(axis=1)
    return better + tied_earlier


def rank_candidates(predicted: np.ndarray, gold: GoldIndex) -> list[str]:
    """All gold type_ids ordered from best to worst match for one vector."""
    predictions = _check_predictions(predicted, gold)
    if predictions.shape[0] != 1:
        raise LengthMismatch("rank_candidates takes a single vector")
    r = pearson_matrix(predictions, gold.matrix)[0]
    order = np.argsort(-r, kind="stable")
    return [gold.type_ids[i] for i in order]


def predicted_types(predictions: np.ndarray, gold: GoldIndex) -> list[str]:
    """Best-matching gold type for every prediction row."""
    predictions = _check_predictions(predictions, gold)
    r = pearson_matrix(predictions, gold.matrix)
    best = np.argmax(r, axis=1)  # argmax takes the first of tied maxima
    return [gold.type_ids[i] for i in best]


def top_n_accuracy(predictions: np.ndarray, target_ids: list[str],
                   gold: GoldIndex, max_n: int = 5) -> dict[int, float]:
    """Fraction of tokens whose target ranks within the best n, for n=1..max_n."""
    ranks = target_ranks(predictions, target_ids, gold)
    if ranks.shape[0] == 0:
        raise LengthMismatch("no predictions to score")
    return {n: float((ranks < n).mean()) for n in range(1, max_n + 1)}


def weighted_f1(predicted: list[str], target: list[str]) -> float:
    """One-vs-rest F1 per attested type, weighted by true frequency."""
    if len(predicted) != len(target):
        raise LengthMismatch(f"{len(predicted)} predictions for {len(target)} targets")
    if not target:
        raise LengthMismatch("no tokens to score")
    true_counts = Counter(target)
    pred_counts = Counter(predicted)
    tp = Counter(t for p, t in zip(predicted, target) if p == t)
    total = 0.0
    for t, n_true in true_counts.items():
        hits = tp.get(t, 0)
        n_pred = pred_counts.get(t, 0)
        precision = hits / n_pred if n_pred else 0.0
        recall = hits / n_true
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        total += n_true * f1
    return total / len(target)


@dataclass(frozen=True)
class NumberConfusion:
    """2x4 confusion: target number against predicted number and lexeme match."""

    counts: np.ndarray
    number_match_rate: float
    number_match_rate_errors_only: float | None
    n_tokens: int
    n_errors: int

    @property
    def percent(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        safe = np.where(sums == 0, 1.0, sums)
        return 100.0 * self.counts / safe

    def to_dict(self) -> dict:
        return {
            "rows": list(CONFUSION_ROWS),
            "cols": list(CONFUSION_COLS),
            "counts": self.counts.tolist(),
            "percent": [[round(v, 6) for v in row] for row in self.percent.tolist()],
            "number_match_rate": self.number_match_rate,
            "number_match_rate_errors_only": self.number_match_rate_errors_only,
            "n_tokens": self.n_tokens,
            "n_errors": self.n_errors,
        }


def number_confusion(predicted: list[str], target: list[str],
                     gold: GoldIndex) -> NumberConfusion:
    """Tabulate predicted number and lexeme identity against the target's.

    number_match_rate is the fraction of all tokens whose predicted type has
    the target's number; the errors-only variant restricts to tokens whose
    predicted type is not the target itself (None when there are no errors).
    """
    if len(predicted) != len(target):
        raise LengthMismatch(f"{len(predicted)} predictions for {len(target)} targets")
    if not target:
        raise LengthMismatch("no tokens to tabulate")
    counts = np.zeros((2, 4), dtype=np.int64)
    match = 0
    err_match = 0
    n_err = 0
    for p, t in zip(predicted, target):
        t_num = gold.number_of.get(t)
        p_num = gold.number_of.get(p)
        if t_num is None:
            raise UnknownTarget(f"type {t!r} not in the gold index")
        if p_num is None:
            raise UnknownTarget(f"type {p!r} not in the gold index")
        lex_match = gold.lexeme_of[p] == gold.lexeme_of[t]
        row = CONFUSION_ROWS.index(t_num)
        col = 2 * CONFUSION_ROWS.index(p_num) + (0 if lex_match else 1)
        counts[row, col] += 1
        if p_num == t_num:
            match += 1
        if p != t:
            n_err += 1
            if p_num == t_num:
                err_match += 1
    return NumberConfusion(
        counts=counts,
        number_match_rate=match / len(target),
        number_match_rate_errors_only=(err_match / n_err) if n_err else None,
        n_tokens=len(target),
        n_errors=n_err,
    )


def group_accuracy(predicted: list[str], target: list[str],
                   groups: LexemeGroups) -> dict[str, float]:
    """Exact-match accuracy within each partner-availability group.

    Groups with no tokens are left out of the result entirely rather than
    reported as zero.
    """
    if len(predicted) != len(target):
        raise LengthMismatch(f"{len(predicted)} predictions for {len(target)} targets")
    hits: dict[str, int] = {}
    totals: dict[str, int] = {}
    membership = {}
    for name in GROUP_NAMES:
        for tid in getattr(groups, name):
            membership[tid] = name
    for p, t in zip(predicted, target):
        g = membership.get(t)
        if g is None:
            continue
        totals[g] = totals.get(g, 0) + 1
        if p == t:
            hits[g] = hits.get(g, 0) + 1
    return {g: hits.get(g, 0) / totals[g] for g in GROUP_NAMES if g in totals}


@dataclass
class EvalReport:
    """Everything one evaluation pass produces, JSON-serializable."""

    n_tokens: int
    top_n: dict[int, float]
    weighted_f1: float
    confusion: NumberConfusion
    group_accuracy: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def top1(self) -> float:
        return self.top_n[1]

    def to_dict(self) -> dict:
        return {
            "n_tokens": self.n_tokens,
            "top_n_accuracy": {str(n): self.top_n[n] for n in sorted(self.top_n)},
            "weighted_f1": self.weighted_f1,
            "confusion": self.confusion.to_dict(),
            "group_accuracy": dict(sorted(self.group_accuracy.items())),
            "meta": self.meta,
        }


def evaluate_predictions(predictions: np.ndarray, target_ids: list[str],
                         gold: GoldIndex, groups: LexemeGroups | None = None,
                         max_n: int = 5, meta: dict | None = None) -> EvalReport:
    """Full scoring pass: top-n, weighted F1, confusion, group accuracy."""
    predictions = _check_predictions(predictions, gold)
    if predictions.shape[0] != len(target_ids):
        raise LengthMismatch(
            f"{predictions.shape[0]} predictions for {len(target_ids)} targets"
        )
    if not target_ids:
        raise LengthMismatch("no tokens to evaluate")
    ranks = target_ranks(predictions, target_ids, gold)
    top_n = {n: float((ranks < n).mean()) for n in range(1, max_n + 1)}
    best = predicted_types(predictions, gold)
    report = EvalReport(
        n_tokens=len(target_ids),
        top_n=top_n,
        weighted_f1=weighted_f1(best, list(target_ids)),
        confusion=number_confusion(best, list(target_ids), gold),
        group_accuracy=(group_accuracy(best, list(target_ids), groups)
                        if groups is not None else {}),
        meta=meta or {},
    )
    return report


def write_report(report: EvalReport, path: str | Path) -> None:
    doc = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(doc, encoding="utf-8")


def confusion_csv(confusion: NumberConfusion, path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["target_number"] + list(CONFUSION_COLS)
                    + [c + "_pct" for c in CONFUSION_COLS])
    pct = confusion.percent
    for i, row_name in enumerate(CONFUSION_ROWS):
        writer.writerow([row_name] + [int(v) for v in confusion.counts[i]]
                        + [repr(round(float(v), 6)) for v in pct[i]])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


class ProportionComparison(NamedTuple):
    proportion_a: float
    proportion_b: float
    difference: float
    chi_square: float
    p_value: float
    ci_low: float
    ci_high: float
    confidence: float


def two_proportion_test(successes_a: int, n_a: int, successes_b: int, n_b: int,
                        confidence: float = 0.95) -> ProportionComparison:
    """Pooled one-degree chi-square test for two proportions plus a CI.

    The confidence interval for the difference uses the unpooled standard
    error. Identical degenerate proportions give chi-square 0 and p 1.
    """
    for k, n in ((successes_a, n_a), (successes_b, n_b)):
        if not (isinstance(k, (int, np.integer)) and isinstance(n, (int, np.integer))):
            raise InvalidCounts(f"counts must be integers, got {k!r}/{n!r}")
        if n < 1 or k < 0 or k > n:
            raise InvalidCounts(f"bad counts {k}/{n}")
    if not 0 < confidence < 1:
        raise InvalidCounts(f"confidence must be in (0, 1), got {confidence}")
    p_a = successes_a / n_a
    p_b = successes_b / n_b
    diff = p_a - p_b
    pooled = (successes_a + successes_b) / (n_a + n_b)
    denom = pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b)
    stat = (diff * diff) / denom if denom > 0 else 0.0
    p_value = float(chi2.sf(stat, 1)) if denom > 0 else 1.0
    se = np.sqrt(p_a * (1 - p_a) / n_a + p_b * (1 - p_b) / n_b)
    z = float(norm.ppf(0.5 + confidence / 2.0))
    return ProportionComparison(
        proportion_a=p_a,
        proportion_b=p_b,
        difference=diff,
        chi_square=float(stat),
        p_value=p_value,
        ci_low=float(diff - z * se),
        ci_high=float(diff + z * se),
        confidence=confidence,
    )
