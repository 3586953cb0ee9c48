"""Stratified k-fold evaluation of form-to-meaning maps over gold spaces.

Folding is per type: every type's tokens are dealt round-robin (after a
seeded shuffle and a seeded starting offset) so each fold holds roughly the
same share of every type, and every type occurs in every training and every
test set. Gold spaces are rebuilt inside each fold from training types
only, so conceptualized plural vectors never see test information.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .conceptualize import (
    FracssMap,
    ShiftTable,
    fit_cca,
    fit_fracss_from_pairs,
    pairs_from_types,
    predict_cca,
    predict_fracss,
)
from .corpus import SINGULAR, Corpus, pair_lexemes
from .errors import (
    EmptyTrainingSet,
    InvalidSpec,
    TypeTooRare,
    UnknownTarget,
)
from .evaluate import EvalReport, GoldIndex, evaluate_predictions
from .features import FormMatrix
from .linmap import DEFAULT_RCOND, LinearMap, predict, solve_grouped

log = logging.getLogger(__name__)

SPACE_WORD2VEC = "word2vec"
SPACE_CCA = "cca"
SPACE_FRACSS = "fracss"
GOLD_SPACES = (SPACE_WORD2VEC, SPACE_CCA, SPACE_FRACSS)


@dataclass(frozen=True)
class FoldPlan:
    """token_id -> fold label (1..k)."""

    k: int
    seed: int
    assignment: dict[str, int]

    def tokens_in_fold(self, fold: int) -> list[str]:
        return sorted(t for t, f in self.assignment.items() if f == fold)

    def tokens_outside_fold(self, fold: int) -> list[str]:
        return sorted(t for t, f in self.assignment.items() if f != fold)

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed,
                "assignment": dict(sorted(self.assignment.items()))}

    @classmethod
    def from_dict(cls, doc: dict) -> "FoldPlan":
        return cls(k=int(doc["k"]), seed=int(doc["seed"]),
                   assignment={t: int(f) for t, f in doc["assignment"].items()})


def make_folds(corpus: Corpus, k: int, seed: int) -> FoldPlan:
    """Per-type stratified assignment into k folds.

    Within a type, the sorted token ids are shuffled and dealt round-robin
    from a random starting fold, so fold sizes per type differ by at most
    one and the leftover tokens do not pile onto fold 1. Types with fewer
    than k tokens make stratification impossible and raise TypeTooRare.
    """
    if k < 2:
        raise InvalidSpec(f"need at least 2 folds, got {k}")
    by_type = corpus.tokens_by_type()
    rare = [t for t, toks in by_type.items() if len(toks) < k]
    if rare:
        raise TypeTooRare(rare, k)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF07D]))
    assignment: dict[str, int] = {}
    for type_id in sorted(by_type):
        token_ids = list(by_type[type_id])
        rng.shuffle(token_ids)
        offset = int(rng.integers(k))
        for i, tok in enumerate(token_ids):
            assignment[tok] = 1 + (i + offset) % k
    return FoldPlan(k=k, seed=seed, assignment=assignment)


@dataclass
class GoldSpace:
    """Type-keyed gold vectors for one semantic space.

    Singular vectors are the embedding arrays themselves (shared across
    spaces); plural vectors are either conceptualizer predictions or, when
    the singular partner has no embedding, the plural's own embedding
    (those type_ids are listed in fallback_plural_ids).
    """

    name: str
    vectors: dict[str, np.ndarray]
    fallback_plural_ids: tuple[str, ...] = ()
    conceptualizer: ShiftTable | FracssMap | None = None
    n_pairs: int = 0


def build_gold_space(name: str, corpus: Corpus,
                     type_vectors: dict[str, np.ndarray],
                     train_type_ids: set[str] | None = None,
                     ridge: float = 0.0) -> GoldSpace:
    """Construct one gold space, fitting conceptualizers on training types.

    The embedding space passes vectors through untouched. The two derived
    spaces fit on lexemes whose SG and PL types are both in
    train_type_ids (all types when None) and then replace every plural
    vector whose singular has an embedding, test plurals included.
    """
    if name not in GOLD_SPACES:
        raise InvalidSpec(f"unknown gold space {name!r}")
    if name == SPACE_WORD2VEC:
        return GoldSpace(name=name, vectors=dict(type_vectors))
    pairs = pairs_from_types(corpus.types, type_vectors, restrict_to=train_type_ids)
    if not pairs:
        raise EmptyTrainingSet(f"no training pairs for the {name} space")
    if name == SPACE_CCA:
        table = fit_cca(pairs)
        conceptualizer = table
    else:
        mapping = fit_fracss_from_pairs(pairs, ridge=ridge)
        conceptualizer = mapping
    lexemes = corpus.lexemes()
    vectors: dict[str, np.ndarray] = {}
    fallback: list[str] = []
    for type_id in sorted(type_vectors):
        t = corpus.types[type_id]
        if t.number == SINGULAR:
            vectors[type_id] = type_vectors[type_id]
            continue
        partner = lexemes.get(t.lexeme_id, {}).get(SINGULAR)
        if partner is None or partner.type_id not in type_vectors:
            vectors[type_id] = type_vectors[type_id]
            fallback.append(type_id)
            continue
        singular = type_vectors[partner.type_id]
        if name == SPACE_CCA:
            vectors[type_id] = predict_cca(singular, partner.semantic_class, table)
        else:
            vectors[type_id] = predict_fracss(singular, mapping)
    return GoldSpace(name=name, vectors=vectors,
                     fallback_plural_ids=tuple(fallback),
                     conceptualizer=conceptualizer, n_pairs=len(pairs))


@dataclass
class FoldResult:
    fold: int
    space: str
    mapping: LinearMap
    train_report: EvalReport
    test_report: EvalReport
    n_train: int
    n_test: int


def _fold_rows(feats: FormMatrix, plan: FoldPlan, fold: int,
               token_types: dict[str, str],
               usable_types: set[str]) -> tuple[list[int], list[int]]:
    if not 1 <= fold <= plan.k:
        raise InvalidSpec(f"fold {fold} outside 1..{plan.k}")
    train_rows: list[int] = []
    test_rows: list[int] = []
    for i, tok in enumerate(feats.token_ids):
        assigned = plan.assignment.get(tok)
        if assigned is None:
            continue
        if token_types[tok] not in usable_types:
            continue
        (test_rows if assigned == fold else train_rows).append(i)
    return train_rows, test_rows


def _evaluate_fold(corpus: Corpus, feats: FormMatrix, plan: FoldPlan, fold: int,
                   space_name: str, type_vectors: dict[str, np.ndarray],
                   ridge: float, rcond: float, conceptualizer_ridge: float,
                   permutation: np.random.Generator | None,
                   max_n: int) -> FoldResult:
    token_types = {tok: corpus.tokens[tok].type_id for tok in feats.token_ids
                   if tok in corpus.tokens}
    missing = [tok for tok in feats.token_ids if tok not in token_types]
    if missing:
        raise UnknownTarget(f"feature rows for unknown tokens {missing[:5]}")
    covered = set(type_vectors)
    train_rows, test_rows = _fold_rows(feats, plan, fold, token_types, covered)
    if not train_rows:
        raise EmptyTrainingSet(f"fold {fold}: no training tokens with vectors")
    if not test_rows:
        raise EmptyTrainingSet(f"fold {fold}: no test tokens with vectors")
    train_types = {token_types[feats.token_ids[i]] for i in train_rows}
    space = build_gold_space(space_name, corpus, type_vectors,
                             train_type_ids=train_types,
                             ridge=conceptualizer_ridge)
    gold = GoldIndex.from_vectors(space.vectors, corpus.types)

    all_rows = train_rows + test_rows
    targets = [token_types[feats.token_ids[i]] for i in all_rows]
    if permutation is not None:
        order = permutation.permutation(len(targets))
        targets = [targets[j] for j in order]
    train_targets = targets[:len(train_rows)]
    test_targets = targets[len(train_rows):]

    tidx_train = np.array([gold.position(t) for t in train_targets])
    mapping = solve_grouped(feats.values[train_rows], tidx_train, gold.matrix,
                            ridge=ridge, rcond=rcond)
    mapping.provenance.update({
        "fold": fold, "space": space_name,
        "n_train_tokens": len(train_rows), "n_test_tokens": len(test_rows),
        "n_pairs": space.n_pairs,
        "n_fallback_plurals": len(space.fallback_plural_ids),
        "permuted": permutation is not None,
    })
    groups = pair_lexemes({i: corpus.types[i] for i in gold.type_ids},
                          reference=train_types)
    train_report = evaluate_predictions(
        predict(mapping, feats.values[train_rows]), train_targets, gold,
        groups=groups, max_n=max_n,
        meta={"fold": fold, "space": space_name, "split": "train"})
    test_report = evaluate_predictions(
        predict(mapping, feats.values[test_rows]), test_targets, gold,
        groups=groups, max_n=max_n,
        meta={"fold": fold, "space": space_name, "split": "test"})
    return FoldResult(fold=fold, space=space_name, mapping=mapping,
                      train_report=train_report, test_report=test_report,
                      n_train=len(train_rows), n_test=len(test_rows))


def run_fold(corpus: Corpus, feats: FormMatrix, plan: FoldPlan, fold: int,
             space_name: str, type_vectors: dict[str, np.ndarray],
             ridge: float = 0.0, rcond: float = DEFAULT_RCOND,
             conceptualizer_ridge: float = 0.0, max_n: int = 5) -> FoldResult:
    """Fit a map on the fold's training rows and score train and test."""
    return _evaluate_fold(corpus, feats, plan, fold, space_name, type_vectors,
                          ridge, rcond, conceptualizer_ridge, None, max_n)


@dataclass
class PermutationReport:
    """A fold scored normally and with shuffled token-to-meaning assignment."""

    baseline: FoldResult
    permuted: FoldResult
    deltas: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "fold": self.baseline.fold,
            "space": self.baseline.space,
            "baseline": {"train": self.baseline.train_report.to_dict(),
                         "test": self.baseline.test_report.to_dict()},
            "permuted": {"train": self.permuted.train_report.to_dict(),
                         "test": self.permuted.test_report.to_dict()},
            "deltas": dict(sorted(self.deltas.items())),
        }


def permutation_control(corpus: Corpus, feats: FormMatrix, plan: FoldPlan,
                        fold: int, space_name: str,
                        type_vectors: dict[str, np.ndarray],
                        permutation_seed: int, ridge: float = 0.0,
                        rcond: float = DEFAULT_RCOND,
                        conceptualizer_ridge: float = 0.0,
                        max_n: int = 5) -> PermutationReport:
    """Rerun a fold with the token-level meaning assignment permuted.

    The permutation shuffles which gold row each token must hit (train and
    test together), the pipeline is otherwise identical, and the deltas are
    baseline minus permuted.
    """
    baseline = _evaluate_fold(corpus, feats, plan, fold, space_name,
                              type_vectors, ridge, rcond, conceptualizer_ridge,
                              None, max_n)
    rng = np.random.default_rng(
        np.random.SeedSequence([permutation_seed, 0x9E23, fold]))
    permuted = _evaluate_fold(corpus, feats, plan, fold, space_name,
                              type_vectors, ridge, rcond, conceptualizer_ridge,
                              rng, max_n)
    deltas = {
        "train_top1": baseline.train_report.top1 - permuted.train_report.top1,
        "test_top1": baseline.test_report.top1 - permuted.test_report.top1,
        "train_weighted_f1": (baseline.train_report.weighted_f1
                              - permuted.train_report.weighted_f1),
        "test_weighted_f1": (baseline.test_report.weighted_f1
                             - permuted.test_report.weighted_f1),
    }
    return PermutationReport(baseline=baseline, permuted=permuted, deltas=deltas)


def cross_gold_eval(corpus: Corpus, feats: FormMatrix, plan: FoldPlan,
                    fold: int, trained_with: str, evaluated_against: str,
                    type_vectors: dict[str, np.ndarray], ridge: float = 0.0,
                    rcond: float = DEFAULT_RCOND,
                    conceptualizer_ridge: float = 0.0,
                    max_n: int = 5) -> EvalReport:
    """Train against one gold space, score the test rows against another.

    With trained_with == evaluated_against this reproduces run_fold's test
    report exactly.
    """
    token_types = {tok: corpus.tokens[tok].type_id for tok in feats.token_ids
                   if tok in corpus.tokens}
    covered = set(type_vectors)
    train_rows, test_rows = _fold_rows(feats, plan, fold, token_types, covered)
    if not train_rows or not test_rows:
        raise EmptyTrainingSet(f"fold {fold}: empty split")
    train_types = {token_types[feats.token_ids[i]] for i in train_rows}
    space_a = build_gold_space(trained_with, corpus, type_vectors,
                               train_type_ids=train_types,
                               ridge=conceptualizer_ridge)
    space_b = build_gold_space(evaluated_against, corpus, type_vectors,
                               train_type_ids=train_types,
                               ridge=conceptualizer_ridge)
    gold_a = GoldIndex.from_vectors(space_a.vectors, corpus.types)
    gold_b = GoldIndex.from_vectors(space_b.vectors, corpus.types)
    train_targets = [token_types[feats.token_ids[i]] for i in train_rows]
    test_targets = [token_types[feats.token_ids[i]] for i in test_rows]
    tidx = np.array([gold_a.position(t) for t in train_targets])
    mapping = solve_grouped(feats.values[train_rows], tidx, gold_a.matrix,
                            ridge=ridge, rcond=rcond)
    groups = pair_lexemes({i: corpus.types[i] for i in gold_b.type_ids},
                          reference=train_types)
    return evaluate_predictions(
        predict(mapping, feats.values[test_rows]), test_targets, gold_b,
        groups=groups, max_n=max_n,
        meta={"fold": fold, "trained_with": trained_with,
              "evaluated_against": evaluated_against, "split": "test"})


# ---------------------------------------------------------------------------
# aggregation

SUMMARY_METRICS = ("top1", "top5", "weighted_f1", "number_match_rate")


def _report_metrics(report: EvalReport) -> dict[str, float]:
    return {
        "top1": report.top_n[1],
        "top5": report.top_n.get(5, report.top_n[max(report.top_n)]),
        "weighted_f1": report.weighted_f1,
        "number_match_rate": report.confusion.number_match_rate,
    }


def summarize_folds(results: list[FoldResult]) -> dict:
    """Per-fold metric table plus median and sample SD per metric and split."""
    folds = sorted(results, key=lambda r: r.fold)
    table = {
        "folds": [
            {"fold": r.fold,
             "n_train": r.n_train, "n_test": r.n_test,
             "train": _report_metrics(r.train_report),
             "test": _report_metrics(r.test_report)}
            for r in folds
        ],
    }
    for split in ("train", "test"):
        agg = {}
        for metric in SUMMARY_METRICS:
            values = np.array([row[split][metric] for row in table["folds"]])
            agg[metric] = {
                "median": float(np.median(values)),
                "sd": float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
            }
        table[split] = agg
    return table


def save_fold_plan(plan: FoldPlan, path: str | Path) -> None:
    doc = json.dumps(plan.to_dict(), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(doc, encoding="utf-8")


def load_fold_plan(path: str | Path) -> FoldPlan:
    return FoldPlan.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
