"""Correlate form distances with meaning distances on a synthetic corpus.

Runs the two distance studies side by side: phone edit distances against
semantic cosine distances over type pairs, and per-trial acoustic Euclidean
distances against the same semantic distances with one sampled token per
type. Both report a permuted baseline; the audio-versus-phone table at the
end shows how the two form distances relate to each other.
"""
import argparse
import tempfile
from pathlib import Path

from pluralsem import (
    CfbsfConfig,
    GOLD_SPACES,
    SynthSpec,
    audio_study,
    audio_vs_phone,
    build_form_matrix,
    build_gold_space,
    generate,
    phone_study,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--n-lexemes", type=int, default=40)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        spec = SynthSpec(n_lexemes=args.n_lexemes, n_classes=5, dim=8,
                         class_centroid_scale=2.0, within_class_scale=0.6,
                         class_phone_prefix=True, min_tokens_per_type=3,
                         target_total_tokens=8 * args.n_lexemes,
                         audio_mode="waveform", seed=args.seed)
        result = generate(spec, Path(tmp))
        corpus = result.corpus
        cfg = CfbsfConfig(n_bands=6, sample_len=10, seed=args.seed)
        tokens = [corpus.tokens[t] for t in corpus.sorted_token_ids()]
        feats = build_form_matrix(tokens, cfg, base_dir=corpus.base_dir,
                                  threads=4)
        spaces = {name: build_gold_space(name, corpus,
                                         result.type_vectors).vectors
                  for name in GOLD_SPACES}
        print(f"corpus: {len(corpus.types)} types, {len(corpus.tokens)} "
              f"tokens, {len(spaces)} gold spaces")

        phone = phone_study(corpus.types, spaces, seed=args.seed)
        print(f"\nphone study ({phone.n_pairs} type pairs):")
        for name in sorted(phone.spaces):
            real = phone.spaces[name]
            baseline = phone.permuted[name]
            print(f"  {name:>9}: r {real.mean_r:+.4f}  "
                  f"permuted {baseline.mean_r:+.4f}")

        audio = audio_study(feats, corpus, spaces, n_trials=args.trials,
                            seed=args.seed)
        print(f"\naudio study ({args.trials} trials, one token per type):")
        for name in sorted(audio.spaces):
            real = audio.spaces[name]
            baseline = audio.permuted[name]
            print(f"  {name:>9}: mean r {real.mean_r:+.4f} "
                  f"({real.n_significant}/{args.trials} significant)  "
                  f"permuted {baseline.mean_r:+.4f} "
                  f"({baseline.n_significant} significant)")

        against = audio_vs_phone(feats, corpus)
        r_text = "undefined" if against.r is None else f"{against.r:+.4f}"
        print(f"\naudio vs phone distance (r {r_text}, "
              f"{against.n_pairs} pairs):")
        print(f"  {'phone dist':>10}  {'mean audio dist':>15}  {'pairs':>6}")
        for phone_dist, mean_audio, count in against.rows:
            print(f"  {phone_dist:>10}  {mean_audio:>15.3f}  {count:>6}")


if __name__ == "__main__":
    main()
