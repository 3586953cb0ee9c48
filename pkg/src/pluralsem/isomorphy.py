"""Distance correlations between word forms and word meanings.

Three studies:

* phone_study: edit distances between phone strings of type pairs against
  cosine distances in one or more semantic spaces
* audio_study: repeated trials drawing one token per type, correlating
  Euclidean distances between acoustic feature rows with cosine distances
  between type meanings
* audio_vs_phone: all token pairs, correlating acoustic distance with the
  phone edit distance of the underlying types, with a per-edit-distance
  breakdown

Edit distance is the restricted transposition variant by default (each
symbol takes part in at most one adjacent swap); variant="full" enables
unrestricted transpositions.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import t as t_dist

from .corpus import Corpus, WordType
from .errors import LengthMismatch, TooFewTypes
from .features import FormMatrix
from .stats import pearson


class ZeroVectorWarning(UserWarning):
    """A cosine distance involved an all-zero vector."""


def damerau_levenshtein(a, b, variant: str = "osa") -> int:
    """Edit distance over symbol sequences with adjacent transposition.

    variant "osa" restricts each symbol to one transposition; "full" allows
    transpositions to interleave with other edits.
    """
    a = tuple(a)
    b = tuple(b)
    if variant == "osa":
        return _osa_distance(a, b)
    if variant == "full":
        return _full_dl_distance(a, b)
    raise ValueError(f"unknown variant {variant!r}")


def _osa_distance(a: tuple, b: tuple) -> int:
    n, m = len(a), len(b)
    prev2 = None
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if (i > 1 and j > 1 and a[i - 1] == b[j - 2]
                    and a[i - 2] == b[j - 1]):
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[m]


def _full_dl_distance(a: tuple, b: tuple) -> int:
    # distance-with-alphabet algorithm; row/column 0 guard value is n+m
    n, m = len(a), len(b)
    inf = n + m
    last_row: dict = {}
    d = np.zeros((n + 2, m + 2), dtype=np.int64)
    d[0, :] = inf
    d[:, 0] = inf
    d[1, 1:] = np.arange(m + 1)
    d[1:, 1] = np.arange(n + 1)
    for i in range(1, n + 1):
        last_col = 0
        for j in range(1, m + 1):
            i_prev = last_row.get(b[j - 1], 0)
            j_prev = last_col
            if a[i - 1] == b[j - 1]:
                cost = 0
                last_col = j
            else:
                cost = 1
            d[i + 1, j + 1] = min(
                d[i, j] + cost,
                d[i + 1, j] + 1,
                d[i, j + 1] + 1,
                d[i_prev, j_prev] + (i - i_prev - 1) + 1 + (j - j_prev - 1),
            )
        last_row[a[i - 1]] = i
    return int(d[n + 1, m + 1])


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 minus cosine similarity; an all-zero vector gives 1 and warns."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise LengthMismatch(f"shapes {u.shape} and {v.shape}")
    nu = np.sqrt(u @ u)
    nv = np.sqrt(v @ v)
    if nu == 0.0 or nv == 0.0:
        warnings.warn("cosine distance of a zero vector defaults to 1",
                      ZeroVectorWarning, stacklevel=2)
        return 1.0
    return float(np.clip(1.0 - (u @ v) / (nu * nv), 0.0, 2.0))


def _cosine_condensed(matrix: np.ndarray) -> np.ndarray:
    """Condensed pairwise cosine distances with the zero-vector convention."""
    norms = np.sqrt((matrix * matrix).sum(axis=1))
    zero = norms == 0.0
    if zero.any():
        warnings.warn(
            f"{int(zero.sum())} zero vector(s) in cosine distances default to 1",
            ZeroVectorWarning, stacklevel=2)
    safe = np.where(zero, 1.0, norms)
    unit = matrix / safe[:, None]
    sim = np.clip(unit @ unit.T, -1.0, 1.0)
    dist = 1.0 - sim
    dist[zero, :] = 1.0
    dist[:, zero] = 1.0
    iu = np.triu_indices(matrix.shape[0], k=1)
    return dist[iu]


def correlation_significance(r: float, n_pairs: int) -> tuple[float, float]:
    """(t statistic, two-sided p) for a Pearson correlation over n_pairs."""
    if n_pairs < 3:
        raise TooFewTypes(f"need at least 3 pairs, got {n_pairs}")
    r = float(np.clip(r, -1.0, 1.0))
    if abs(r) >= 1.0:
        return float(np.sign(r) * np.inf), 0.0
    stat = r * np.sqrt((n_pairs - 2) / (1.0 - r * r))
    p = 2.0 * float(t_dist.sf(abs(stat), n_pairs - 2))
    return float(stat), p


@dataclass
class SpaceCorrelation:
    """Correlation outcomes for one semantic space across trials."""

    mean_r: float
    sd_r: float
    n_significant: int
    n_trials: int
    rs: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"mean_r": self.mean_r, "sd_r": self.sd_r,
                "n_significant": self.n_significant, "n_trials": self.n_trials}


@dataclass
class DistanceStudyReport:
    """Results of a phone or audio distance study."""

    mode: str
    n_items: int
    n_pairs: int
    spaces: dict[str, SpaceCorrelation]
    permuted: dict[str, SpaceCorrelation]
    n_trials: int
    alpha: float
    seed: int
    include_same_lexeme: bool | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "mode": self.mode,
            "n_items": self.n_items,
            "n_pairs": self.n_pairs,
            "n_trials": self.n_trials,
            "alpha": self.alpha,
            "seed": self.seed,
            "spaces": {k: v.to_dict() for k, v in sorted(self.spaces.items())},
            "permuted": {k: v.to_dict() for k, v in sorted(self.permuted.items())},
            "meta": self.meta,
        }
        if self.include_same_lexeme is not None:
            doc["include_same_lexeme"] = self.include_same_lexeme
        return doc


def _aggregate(rs: list[float], n_pairs_per_trial: list[int],
               alpha: float) -> SpaceCorrelation:
    rs_arr = np.array(rs)
    n_sig = 0
    for r, n in zip(rs, n_pairs_per_trial):
        _, p = correlation_significance(r, n)
        if p < alpha:
            n_sig += 1
    return SpaceCorrelation(
        mean_r=float(rs_arr.mean()),
        sd_r=float(rs_arr.std(ddof=1)) if rs_arr.size > 1 else 0.0,
        n_significant=n_sig,
        n_trials=len(rs),
        rs=tuple(float(r) for r in rs),
    )


def phone_study(types: dict[str, WordType] | list[WordType],
                spaces: dict[str, dict[str, np.ndarray]],
                include_same_lexeme: bool = True,
                alpha: float = 0.05, seed: int = 0,
                variant: str = "osa") -> DistanceStudyReport:
    """Correlate phone edit distances with semantic distances over type pairs.

    Considers every unordered pair of types that have phones and a vector in
    every space; include_same_lexeme=False drops pairs from one lexeme (the
    singular-plural pairs themselves). The permuted baseline reassigns
    vectors to types with one seeded shuffle shared by all spaces.
    """
    if isinstance(types, dict):
        type_list = [types[i] for i in sorted(types)]
    else:
        type_list = sorted(types, key=lambda t: t.type_id)
    eligible = [t for t in type_list
                if t.phones and all(t.type_id in vecs for vecs in spaces.values())]
    if len(eligible) < 3:
        raise TooFewTypes(f"{len(eligible)} usable types, need at least 3")
    n = len(eligible)
    pair_idx = [(i, j) for i in range(n) for j in range(i + 1, n)
                if include_same_lexeme
                or eligible[i].lexeme_id != eligible[j].lexeme_id]
    if len(pair_idx) < 3:
        raise TooFewTypes(f"{len(pair_idx)} usable pairs, need at least 3")
    form = np.array([
        damerau_levenshtein(eligible[i].phones, eligible[j].phones, variant)
        for i, j in pair_idx
    ], dtype=np.float64)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    perm = rng.permutation(n)
    results: dict[str, SpaceCorrelation] = {}
    permuted: dict[str, SpaceCorrelation] = {}
    for name in sorted(spaces):
        vecs = spaces[name]
        matrix = np.stack([vecs[t.type_id] for t in eligible]).astype(np.float64)
        full = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        full[iu] = _cosine_condensed(matrix)
        full += full.T
        sem = np.array([full[i, j] for i, j in pair_idx])
        sem_perm = np.array([full[perm[i], perm[j]] for i, j in pair_idx])
        results[name] = _aggregate([pearson(form, sem)], [len(pair_idx)], alpha)
        permuted[name] = _aggregate([pearson(form, sem_perm)], [len(pair_idx)], alpha)
    return DistanceStudyReport(
        mode="phone", n_items=n, n_pairs=len(pair_idx),
        spaces=results, permuted=permuted, n_trials=1, alpha=alpha, seed=seed,
        include_same_lexeme=include_same_lexeme,
    )


def audio_study(feats: FormMatrix, corpus: Corpus,
                spaces: dict[str, dict[str, np.ndarray]],
                n_trials: int = 1000, alpha: float = 0.05, seed: int = 0,
                restrict_tokens: set[str] | None = None) -> DistanceStudyReport:
    """Trial-based correlation of acoustic and semantic distances.

    Each trial draws one token per eligible type (types with a vector in
    every space and at least one feature row), correlates Euclidean
    distances between the drawn feature rows with cosine distances between
    type vectors, and also scores a freshly permuted type-to-vector
    assignment as that trial's baseline.
    """
    rows_by_type: dict[str, list[int]] = {}
    for i, tok in enumerate(feats.token_ids):
        if restrict_tokens is not None and tok not in restrict_tokens:
            continue
        token = corpus.tokens.get(tok)
        if token is None:
            continue
        rows_by_type.setdefault(token.type_id, []).append(i)
    eligible = sorted(
        t for t in rows_by_type
        if all(t in vecs for vecs in spaces.values())
    )
    if len(eligible) < 3:
        raise TooFewTypes(f"{len(eligible)} usable types, need at least 3")
    n = len(eligible)
    n_pairs = n * (n - 1) // 2
    sem_condensed: dict[str, np.ndarray] = {}
    sem_square: dict[str, np.ndarray] = {}
    for name in sorted(spaces):
        matrix = np.stack([spaces[name][t] for t in eligible]).astype(np.float64)
        cond = _cosine_condensed(matrix)
        square = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        square[iu] = cond
        square += square.T
        sem_condensed[name] = cond
        sem_square[name] = square
    iu = np.triu_indices(n, k=1)
    rs: dict[str, list[float]] = {name: [] for name in spaces}
    rs_perm: dict[str, list[float]] = {name: [] for name in spaces}
    for trial in range(n_trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA0D1, trial]))
        rows = [rows_by_type[t][rng.integers(len(rows_by_type[t]))]
                for t in eligible]
        form = pdist(feats.values[rows])
        perm = rng.permutation(n)
        for name in sorted(spaces):
            rs[name].append(pearson(form, sem_condensed[name]))
            sem_p = sem_square[name][np.ix_(perm, perm)][iu]
            rs_perm[name].append(pearson(form, sem_p))
    pair_counts = [n_pairs] * n_trials
    return DistanceStudyReport(
        mode="audio", n_items=n, n_pairs=n_pairs,
        spaces={k: _aggregate(v, pair_counts, alpha) for k, v in rs.items()},
        permuted={k: _aggregate(v, pair_counts, alpha) for k, v in rs_perm.items()},
        n_trials=n_trials, alpha=alpha, seed=seed,
    )


@dataclass
class AudioPhoneReport:
    """Acoustic versus phone distance over all token pairs."""

    r: float | None
    n_pairs: int
    n_tokens: int
    rows: tuple[tuple[int, float, int], ...]  # (phone_dist, mean_audio_dist, count)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "n_pairs": self.n_pairs,
            "n_tokens": self.n_tokens,
            "by_phone_distance": [
                {"phone_distance": d, "mean_audio_distance": m, "n_pairs": c}
                for d, m, c in self.rows
            ],
        }


def audio_vs_phone(feats: FormMatrix, corpus: Corpus,
                   restrict_tokens: set[str] | None = None,
                   variant: str = "osa") -> AudioPhoneReport:
    """Correlate acoustic distance with phone edit distance over token pairs.

    Works over every unordered pair of feature-bearing tokens whose types
    have phones. Phone distances depend only on the type pair, so the type
    level edit matrix is computed once and the token-pair accumulation is
    streamed row by row. r is None when either distance has no variance.
    """
    rows: list[int] = []
    type_of: list[str] = []
    for i, tok in enumerate(feats.token_ids):
        if restrict_tokens is not None and tok not in restrict_tokens:
            continue
        token = corpus.tokens.get(tok)
        if token is None:
            continue
        if corpus.types[token.type_id].phones:
            rows.append(i)
            type_of.append(token.type_id)
    if len(rows) < 3:
        raise TooFewTypes(f"{len(rows)} usable tokens, need at least 3")
    type_ids = sorted(set(type_of))
    pos = {t: k for k, t in enumerate(type_ids)}
    t_count = len(type_ids)
    edit = np.zeros((t_count, t_count), dtype=np.int64)
    for a in range(t_count):
        for b in range(a + 1, t_count):
            d = damerau_levenshtein(corpus.types[type_ids[a]].phones,
                                    corpus.types[type_ids[b]].phones, variant)
            edit[a, b] = edit[b, a] = d
    matrix = feats.values[rows]
    t_index = np.array([pos[t] for t in type_of])
    n = len(rows)
    sum_x = sum_y = sum_xx = sum_yy = sum_xy = 0.0
    count = 0
    bins: dict[int, tuple[float, int]] = {}
    for i in range(n - 1):
        diffs = matrix[i + 1:] - matrix[i]
        audio_d = np.sqrt((diffs * diffs).sum(axis=1))
        phone_d = edit[t_index[i], t_index[i + 1:]].astype(np.float64)
        sum_x += float(phone_d.sum())
        sum_y += float(audio_d.sum())
        sum_xx += float((phone_d * phone_d).sum())
        sum_yy += float((audio_d * audio_d).sum())
        sum_xy += float((phone_d * audio_d).sum())
        count += phone_d.shape[0]
        for dist in np.unique(edit[t_index[i], t_index[i + 1:]]):
            mask = edit[t_index[i], t_index[i + 1:]] == dist
            total, c = bins.get(int(dist), (0.0, 0))
            bins[int(dist)] = (total + float(audio_d[mask].sum()),
                               c + int(mask.sum()))
    var_x = sum_xx - sum_x * sum_x / count
    var_y = sum_yy - sum_y * sum_y / count
    if var_x <= 0.0 or var_y <= 0.0:
        r = None
    else:
        r = float(np.clip((sum_xy - sum_x * sum_y / count)
                          / np.sqrt(var_x * var_y), -1.0, 1.0))
    rows_out = tuple((d, bins[d][0] / bins[d][1], bins[d][1])
                     for d in sorted(bins))
    return AudioPhoneReport(r=r, n_pairs=count, n_tokens=n, rows=rows_out)


def write_study_csv(report: DistanceStudyReport, path: str | Path) -> None:
    """Per-trial correlation values, one row per (trial, space)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "space", "r", "permuted_r"])
    for name in sorted(report.spaces):
        rs = report.spaces[name].rs
        rs_p = report.permuted[name].rs
        for trial, (r, rp) in enumerate(zip(rs, rs_p)):
            writer.writerow([trial, name, repr(r), repr(rp)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_audio_phone_csv(report: AudioPhoneReport, path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["phone_distance", "mean_audio_distance", "n_pairs"])
    for d, m, c in report.rows:
        writer.writerow([d, repr(m), c])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
