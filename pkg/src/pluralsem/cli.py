"""Command line front end.

Subcommands: synth, extract, conceptualize, cv, distance-study,
export-shifts. Every run writes its resolved configuration (and the tool
version) into the output directory so results can be reproduced from the
artifacts alone. Exit codes: 0 success, 2 invalid input or configuration,
1 internal failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .conceptualize import (
    CLASS_METHOD,
    METHODS,
    fit_cca,
    fit_fracss_from_pairs,
    pairs_from_types,
    predict_cca,
    predict_fracss,
    write_shift_csv,
)
from .corpus import (
    PLURAL,
    SINGULAR,
    embeddings_by_type,
    load_embeddings,
    load_manifest,
    write_embeddings,
)
from .crossval import (
    GOLD_SPACES,
    build_gold_space,
    make_folds,
    permutation_control,
    run_fold,
    save_fold_plan,
    summarize_folds,
)
from .errors import InvalidSpec, IoFailure, PluralsemError
from .evaluate import write_report
from .features import CfbsfConfig, build_form_matrix, load_features, save_features
from .isomorphy import (
    audio_study,
    audio_vs_phone,
    phone_study,
    write_audio_phone_csv,
    write_study_csv,
)
from .linmap import LinearMap, save_map
from .synth import SynthSpec, generate

log = logging.getLogger(__name__)


def derive_seed(seed: int, stream: str) -> int:
    """Stable named sub-stream of one top-level seed."""
    digest = hashlib.sha256(f"{seed}:{stream}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2 ** 63)


# ---------------------------------------------------------------------------
# TOML in and out

def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise InvalidSpec(f"cannot serialize config value {value!r}")


def _toml_dump(sections: dict[str, dict]) -> str:
    lines = []
    for section in sections:
        lines.append(f"[{section}]")
        for key, value in sections[section].items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_scalar(value)}")
        lines.append("")
    return "\n".join(lines)


def write_resolved_config(out_dir: Path, command: str, seed: int,
                          params: dict) -> None:
    doc = _toml_dump({
        "run": {"command": command, "tool": "pluralsem",
                "version": __version__, "seed": seed},
        "params": dict(sorted(params.items())),
    })
    (out_dir / "config.toml").write_text(doc, encoding="utf-8")


def _load_config_file(path: str | None, command: str) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InvalidSpec(f"bad TOML in {path}: {exc}") from exc
    merged = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    merged.update(doc.get(command, {}))
    return merged


class Resolver:
    """Flag value, else config file value, else default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config
        self.resolved: dict = {}

    def get(self, name: str, default):
        cli_value = getattr(self.args, name.replace("-", "_"), None)
        if cli_value is not None:
            value = cli_value
        elif name in self.config:
            value = self.config[name]
        else:
            value = default
        self.resolved[name] = value
        return value


def _out_dir(args) -> Path:
    if not args.out:
        raise InvalidSpec("--out is required")
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _top_seed(res: Resolver) -> int:
    return int(res.get("seed", 0))


def _threads(res: Resolver) -> int:
    value = res.get("threads", 0)
    return int(value) if value else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommands

_CFBSF_KEYS = ("n_bands", "sample_len", "fft_window_s", "hop_s",
               "include_self_correlation", "envelope_smoothing_window_s",
               "peak_min_prominence", "target_sample_rate", "max_chunks",
               "fft_size")


def _feature_config(res: Resolver, seed: int) -> CfbsfConfig:
    base = CfbsfConfig()
    values = {k: res.get(k, getattr(base, k)) for k in _CFBSF_KEYS}
    return CfbsfConfig(seed=derive_seed(seed, "features"), **values)


def cmd_extract(args) -> int:
    config = _load_config_file(args.config, "extract")
    res = Resolver(args, config)
    seed = _top_seed(res)
    corpus = load_manifest(args.manifest)
    cfg = _feature_config(res, seed)
    out = _out_dir(args)
    tokens = [corpus.tokens[t] for t in corpus.sorted_token_ids()]
    fm = build_form_matrix(tokens, cfg, corpus.base_dir, threads=_threads(res))
    save_features(fm, out / "features.bin")
    report = {
        "n_tokens": len(tokens),
        "n_rows": len(fm.token_ids),
        "n_failed": len(fm.failures),
        "failures": [{"token_id": t, "error": e} for t, e in fm.failures],
        "width": fm.width,
        "per_chunk_dim": cfg.per_chunk_dim,
        "max_chunks_resolved": fm.width // cfg.per_chunk_dim,
    }
    (out / "extraction_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    write_resolved_config(out, "extract", seed, res.resolved)
    print(f"extracted {len(fm.token_ids)}/{len(tokens)} tokens, "
          f"width {fm.width} ({report['max_chunks_resolved']} chunks max)")
    return 0


def cmd_conceptualize(args) -> int:
    config = _load_config_file(args.config, "conceptualize")
    res = Resolver(args, config)
    seed = _top_seed(res)
    method = res.get("method", CLASS_METHOD)
    if method not in METHODS:
        raise InvalidSpec(f"method must be one of {METHODS}, got {method!r}")
    ridge = float(res.get("ridge", 0.0))
    corpus = load_manifest(args.manifest)
    lexicon = {t.orth for t in corpus.types.values()}
    table = load_embeddings(args.embeddings, lexicon=lexicon)
    vectors = embeddings_by_type(corpus, table)
    pairs = pairs_from_types(corpus.types, vectors)
    out = _out_dir(args)

    lexemes = corpus.lexemes()
    predicted: dict[str, np.ndarray] = {}
    n_fallback = 0
    if method == CLASS_METHOD:
        shift_table = fit_cca(pairs)
        doc = {
            "global_shift": shift_table.global_shift.tolist(),
            "class_shifts": {c: v.tolist()
                             for c, v in sorted(shift_table.class_shifts.items())},
            "class_counts": dict(sorted(shift_table.class_counts.items())),
            "n_pairs": shift_table.n_pairs,
        }
        (out / "shift_table.json").write_text(
            json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    else:
        mapping = fit_fracss_from_pairs(pairs, ridge=ridge)
        save_map(LinearMap(weights=mapping.weights, ridge=mapping.ridge,
                           provenance={"kind": "plural-map",
                                       "n_pairs": mapping.n_pairs}),
                 out / "map.bin")
    for type_id in corpus.sorted_type_ids():
        t = corpus.types[type_id]
        if t.number != PLURAL:
            continue
        partner = lexemes.get(t.lexeme_id, {}).get(SINGULAR)
        if partner is None or partner.type_id not in vectors:
            n_fallback += 1
            continue
        singular = vectors[partner.type_id]
        if method == CLASS_METHOD:
            predicted[t.orth] = predict_cca(singular, partner.semantic_class,
                                            shift_table)
        else:
            predicted[t.orth] = predict_fracss(singular, mapping)
    write_embeddings(predicted, out / "predicted_plurals.txt")
    report = {
        "method": method,
        "n_pairs": len(pairs),
        "n_predicted_plurals": len(predicted),
        "n_plurals_without_singular_vector": n_fallback,
        "embedding_dim": table.dim,
        "n_embeddings_skipped": table.n_skipped,
    }
    if method == CLASS_METHOD:
        report["n_classes"] = len(shift_table.class_shifts)
    (out / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    write_resolved_config(out, "conceptualize", seed, res.resolved)
    print(f"{method}: fit {len(pairs)} pairs, predicted {len(predicted)} plurals")
    return 0


def _apply_class_override(corpus, path: str) -> None:
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        override = {row["lexeme_id"]: (row["semantic_class"] or None)
                    for row in reader}
    for type_id, t in list(corpus.types.items()):
        if t.lexeme_id in override:
            corpus.types[type_id] = replace(t, semantic_class=override[t.lexeme_id])


def cmd_cv(args) -> int:
    config = _load_config_file(args.config, "cv")
    res = Resolver(args, config)
    seed = _top_seed(res)
    k = int(res.get("k", 10))
    ridge = float(res.get("ridge", 0.0))
    rcond = float(res.get("rcond", 1e-10))
    c_ridge = float(res.get("conceptualizer_ridge", 0.0))
    space_arg = res.get("gold_space", "all")
    run_permutation = bool(res.get("permutation_control", False))
    spaces = list(GOLD_SPACES) if space_arg == "all" else [space_arg]
    for s in spaces:
        if s not in GOLD_SPACES:
            raise InvalidSpec(f"unknown gold space {s!r}")
    corpus = load_manifest(args.manifest)
    if args.classes:
        _apply_class_override(corpus, args.classes)
    lexicon = {t.orth for t in corpus.types.values()}
    table = load_embeddings(args.embeddings, lexicon=lexicon)
    vectors = embeddings_by_type(corpus, table)
    feats = load_features(args.features)
    out = _out_dir(args)
    plan = make_folds(corpus, k, derive_seed(seed, "folds"))
    save_fold_plan(plan, out / "folds.json")

    summary: dict = {"k": k, "seed": seed, "spaces": {},
                     "n_feature_rows": len(feats.token_ids)}
    for space in spaces:
        space_dir = out if len(spaces) == 1 else out / space
        results = []
        for fold in range(1, k + 1):
            result = run_fold(corpus, feats, plan, fold, space, vectors,
                              ridge=ridge, rcond=rcond,
                              conceptualizer_ridge=c_ridge)
            fold_dir = space_dir / f"fold{fold}"
            fold_dir.mkdir(parents=True, exist_ok=True)
            save_map(result.mapping, fold_dir / "map.bin")
            write_report(result.train_report, fold_dir / "report_train.json")
            write_report(result.test_report, fold_dir / "report_test.json")
            results.append(result)
        summary["spaces"][space] = summarize_folds(results)
        if run_permutation:
            control = permutation_control(
                corpus, feats, plan, 1, space, vectors,
                permutation_seed=derive_seed(seed, "permutation"),
                ridge=ridge, rcond=rcond, conceptualizer_ridge=c_ridge)
            (space_dir / "permutation.json").write_text(
                json.dumps(control.to_dict(), sort_keys=True, indent=2) + "\n",
                encoding="utf-8")
            summary["spaces"][space]["permutation_deltas"] = control.deltas
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    write_resolved_config(out, "cv", seed, res.resolved)
    for space in spaces:
        test = summary["spaces"][space]["test"]
        print(f"{space}: median test top-1 {test['top1']['median']:.4f}, "
              f"weighted F1 {test['weighted_f1']['median']:.4f}")
    return 0


def cmd_distance_study(args) -> int:
    config = _load_config_file(args.config, "distance-study")
    res = Resolver(args, config)
    seed = _top_seed(res)
    mode = res.get("mode", "phone")
    trials = int(res.get("trials", 1000))
    alpha = float(res.get("alpha", 0.05))
    variant = res.get("edit_variant", "osa")
    include_same = not bool(res.get("exclude_same_lexeme", False))
    c_ridge = float(res.get("conceptualizer_ridge", 0.0))
    corpus = load_manifest(args.manifest)
    out = _out_dir(args)
    study_seed = derive_seed(seed, "study")

    if mode in ("phone", "audio"):
        if not args.embeddings:
            raise InvalidSpec(f"{mode} mode needs --embeddings")
        lexicon = {t.orth for t in corpus.types.values()}
        table = load_embeddings(args.embeddings, lexicon=lexicon)
        vectors = embeddings_by_type(corpus, table)
        spaces = {name: build_gold_space(name, corpus, vectors,
                                         ridge=c_ridge).vectors
                  for name in GOLD_SPACES}
    if mode == "phone":
        report = phone_study(corpus.types, spaces,
                             include_same_lexeme=include_same,
                             alpha=alpha, seed=study_seed, variant=variant)
    elif mode == "audio":
        if not args.features:
            raise InvalidSpec("audio mode needs --features")
        feats = load_features(args.features)
        restrict = None
        cv_k = res.get("cv_k", None)
        if cv_k:
            plan = make_folds(corpus, int(cv_k), derive_seed(seed, "folds"))
            restrict = set(plan.tokens_in_fold(1))
        report = audio_study(feats, corpus, spaces, n_trials=trials,
                             alpha=alpha, seed=study_seed,
                             restrict_tokens=restrict)
    elif mode == "audio-vs-phone":
        if not args.features:
            raise InvalidSpec("audio-vs-phone mode needs --features")
        feats = load_features(args.features)
        report = audio_vs_phone(feats, corpus, variant=variant)
    else:
        raise InvalidSpec(f"unknown mode {mode!r}")

    (out / "study.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    if mode == "audio-vs-phone":
        write_audio_phone_csv(report, out / "bins.csv")
        shown = "n/a" if report.r is None else f"{report.r:.4f}"
        print(f"audio-vs-phone: r {shown} over {report.n_pairs} token pairs")
    else:
        write_study_csv(report, out / "trials.csv")
        for name in sorted(report.spaces):
            s = report.spaces[name]
            print(f"{mode} {name}: mean r {s.mean_r:.4f} "
                  f"({s.n_significant}/{s.n_trials} significant)")
    write_resolved_config(out, "distance-study", seed, res.resolved)
    return 0


def cmd_synth(args) -> int:
    config = _load_config_file(args.config, "synth")
    res = Resolver(args, config)
    seed = _top_seed(res)
    base = SynthSpec()
    keys = ("n_lexemes", "n_classes", "dim", "class_shift_scale",
            "residual_scale", "zipf_exponent", "min_tokens_per_type",
            "audio_mode", "class_centroid_scale", "within_class_scale",
            "target_total_tokens", "singular_only_fraction",
            "plural_only_fraction", "token_jitter", "class_phone_prefix",
            "sample_rate")
    values = {k: res.get(k, getattr(base, k)) for k in keys}
    spec = SynthSpec(seed=seed, **values)
    out = _out_dir(args)
    result = generate(spec, out)
    write_resolved_config(out, "synth", seed, res.resolved)
    print(f"synth: {len(result.corpus.types)} types, "
          f"{len(result.corpus.tokens)} tokens, audio={spec.audio_mode}")
    return 0


def cmd_export_shifts(args) -> int:
    config = _load_config_file(args.config, "export-shifts")
    res = Resolver(args, config)
    seed = _top_seed(res)
    corpus = load_manifest(args.manifest)
    lexicon = {t.orth for t in corpus.types.values()}
    table = load_embeddings(args.embeddings, lexicon=lexicon)
    vectors = embeddings_by_type(corpus, table)
    pairs = pairs_from_types(corpus.types, vectors)
    shift_table = fit_cca(pairs)
    out_path = Path(args.out)
    if out_path.suffix != ".csv":
        out_path.mkdir(parents=True, exist_ok=True)
        out_path = out_path / "shifts.csv"
    else:
        out_path.parent.mkdir(parents=True, exist_ok=True)
    write_shift_csv(pairs, shift_table, out_path)
    print(f"wrote {len(pairs)} pair shifts and "
          f"{len(shift_table.class_shifts)} class means to {out_path}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pluralsem",
        description="Singular-to-plural semantics and audio form-to-meaning "
                    "evaluation",
    )
    parser.add_argument("--version", action="version",
                        version=f"pluralsem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, help="top-level seed (default 0)")
        p.add_argument("--threads", type=int,
                       help="worker threads (default: machine parallelism)")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    common(p)
    p.add_argument("--n-lexemes", type=int, dest="n_lexemes")
    p.add_argument("--n-classes", type=int, dest="n_classes")
    p.add_argument("--dim", type=int)
    p.add_argument("--class-shift-scale", type=float, dest="class_shift_scale")
    p.add_argument("--residual-scale", type=float, dest="residual_scale")
    p.add_argument("--zipf-exponent", type=float, dest="zipf_exponent")
    p.add_argument("--min-tokens-per-type", type=int, dest="min_tokens_per_type")
    p.add_argument("--audio-mode", choices=("none", "waveform"), dest="audio_mode")
    p.add_argument("--target-total-tokens", type=int, dest="target_total_tokens")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract acoustic features to a cache")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--n-bands", type=int, dest="n_bands")
    p.add_argument("--sample-len", type=int, dest="sample_len")
    p.add_argument("--max-chunks", type=int, dest="max_chunks")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("conceptualize", help="fit a plural predictor")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--ridge", type=float)
    p.set_defaults(func=cmd_conceptualize)

    p = sub.add_parser("cv", help="cross-validated form-to-meaning evaluation")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--features", required=True, help="feature cache from extract")
    p.add_argument("--k", type=int)
    p.add_argument("--gold-space", dest="gold_space",
                   choices=GOLD_SPACES + ("all",))
    p.add_argument("--ridge", type=float)
    p.add_argument("--rcond", type=float)
    p.add_argument("--conceptualizer-ridge", type=float,
                   dest="conceptualizer_ridge")
    p.add_argument("--permutation-control", action="store_const", const=True,
                   dest="permutation_control")
    p.add_argument("--classes", help="CSV overriding lexeme semantic classes")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("distance-study",
                       help="form and meaning distance correlations")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--features")
    p.add_argument("--mode", choices=("phone", "audio", "audio-vs-phone"))
    p.add_argument("--trials", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--edit-variant", choices=("osa", "full"), dest="edit_variant")
    p.add_argument("--exclude-same-lexeme", action="store_const", const=True,
                   dest="exclude_same_lexeme")
    p.add_argument("--cv-k", type=int, dest="cv_k",
                   help="restrict audio mode to the first test fold of a k-fold plan")
    p.set_defaults(func=cmd_distance_study)

    p = sub.add_parser("export-shifts", help="per-pair and per-class shift CSV")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", required=True)
    p.set_defaults(func=cmd_export_shifts)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PluralsemError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
