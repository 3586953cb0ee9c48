"""Fit both plural conceptualizers on a synthetic corpus and compare them.

Generates a class-structured corpus, fits the class-average shift table and
the global linear map on the singular-plural pairs, and reports how close
each method's predicted plural vectors come to the real ones, per class and
overall.
"""
import argparse

import numpy as np

from pluralsem import (
    SynthSpec,
    cosine_distance,
    decompose,
    fit_cca,
    fit_fracss_from_pairs,
    generate,
    pairs_from_types,
    predict_cca,
    predict_fracss,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-lexemes", type=int, default=60)
    ap.add_argument("--n-classes", type=int, default=6)
    ap.add_argument("--residual-scale", type=float, default=0.3)
    args = ap.parse_args()

    spec = SynthSpec(n_lexemes=args.n_lexemes, n_classes=args.n_classes,
                     dim=16, residual_scale=args.residual_scale,
                     min_tokens_per_type=2, audio_mode="none", seed=args.seed)
    result = generate(spec)
    pairs = pairs_from_types(result.corpus.types, result.type_vectors)
    print(f"corpus: {len(result.corpus.types)} types, "
          f"{len(pairs)} singular-plural pairs, dim {spec.dim}")

    table = fit_cca(pairs)
    mapping = fit_fracss_from_pairs(pairs)
    print(f"\nclass-average table: {len(table.class_shifts)} classes")
    for cls in sorted(table.class_shifts):
        shift = table.class_shifts[cls]
        print(f"  {cls}: {table.class_counts[cls]:2d} pairs, "
              f"shift norm {np.linalg.norm(shift):.3f}")
    print(f"global map: {mapping.weights.shape[0]}x{mapping.weights.shape[1]} "
          f"weights, fit on {mapping.n_pairs} pairs")

    # score both methods by cosine distance to the true plural vector
    rows = []
    for pair in pairs:
        by_class = predict_cca(pair.singular, pair.semantic_class, table)
        by_map = predict_fracss(pair.singular, mapping)
        rows.append((pair.semantic_class,
                     cosine_distance(by_class, pair.plural),
                     cosine_distance(by_map, pair.plural),
                     np.linalg.norm(decompose(pair, by_class))))
    rows.sort()
    print("\nmean cosine distance to the true plural (lower is better):")
    print(f"{'class':>8}  {'class-average':>13}  {'global map':>10}  "
          f"{'mean residual':>13}")
    for cls in sorted({r[0] for r in rows}):
        sub = [r for r in rows if r[0] == cls]
        print(f"{cls:>8}  {np.mean([r[1] for r in sub]):13.4f}  "
              f"{np.mean([r[2] for r in sub]):10.4f}  "
              f"{np.mean([r[3] for r in sub]):13.4f}")
    print(f"{'all':>8}  {np.mean([r[1] for r in rows]):13.4f}  "
          f"{np.mean([r[2] for r in rows]):10.4f}  "
          f"{np.mean([r[3] for r in rows]):13.4f}")


if __name__ == "__main__":
    main()
