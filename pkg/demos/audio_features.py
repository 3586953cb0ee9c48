"""Walk one synthetic waveform through the acoustic feature extractor.

Shows the stages separately: amplitude envelope, chunk boundaries at the
envelope maxima, per-chunk mel spectrogram, band summaries, and the final
fixed-width vector.
"""
import argparse
import tempfile
from pathlib import Path

import numpy as np

from pluralsem import (
    CfbsfConfig,
    SynthSpec,
    amplitude_envelope,
    band_summary,
    chunk_boundaries,
    extract_waveform,
    generate,
    mel_log_spectrogram,
    split_chunks,
)
from pluralsem.features import read_audio_segment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--n-bands", type=int, default=8)
    ap.add_argument("--sample-len", type=int, default=10)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        spec = SynthSpec(n_lexemes=6, n_classes=1, dim=4, min_tokens_per_type=1,
                         audio_mode="waveform", seed=args.seed)
        result = generate(spec, Path(tmp))
        corpus = result.corpus
        # the longest word gives the most chunks to look at
        token = max((corpus.tokens[t] for t in corpus.sorted_token_ids()),
                    key=lambda tok: len(corpus.types[tok.type_id].phones))
        word = corpus.types[token.type_id]
        cfg = CfbsfConfig(n_bands=args.n_bands, sample_len=args.sample_len,
                          seed=0)
        sr = cfg.target_sample_rate
        signal = read_audio_segment(Path(tmp) / token.audio_path,
                                    declared_rate=token.sample_rate,
                                    target_rate=sr)
        print(f"token {token.token_id}: \"{word.orth}\" "
              f"{' '.join(word.phones)}, {len(signal) / sr:.3f}s at {sr} Hz")

        envelope = amplitude_envelope(signal, cfg)
        bounds = chunk_boundaries(envelope, cfg)
        chunks = split_chunks(signal, bounds, cfg)
        print(f"\nenvelope peak {envelope.max():.3f}, "
              f"{len(bounds)} boundaries at "
              + ", ".join(f"{b * 1000:.0f}ms" for b in bounds))
        print(f"{len(chunks)} chunks: "
              + ", ".join(f"{len(c) / sr * 1000:.0f}ms" for c in chunks))

        rng = np.random.default_rng(0)
        for i, chunk in enumerate(chunks):
            spectrogram = mel_log_spectrogram(chunk, cfg)
            samples = np.stack([
                band_summary(spectrogram[b], cfg.sample_len, rng)
                for b in range(cfg.n_bands)
            ])
            print(f"chunk {i}: spectrogram {spectrogram.shape[0]} bands x "
                  f"{spectrogram.shape[1]} frames -> samples {samples.shape}")

        vec = extract_waveform(signal, cfg, token_id=token.token_id)
        print(f"\nfinal vector: {vec.n_chunks} chunks x "
              f"{cfg.per_chunk_dim} values "
              f"({cfg.n_bands}x{cfg.sample_len} samples + "
              f"{cfg.n_correlations} correlations) = {vec.unpadded_len}")
        print(f"padded to 3 chunks the row would have "
              f"{3 * cfg.per_chunk_dim} columns")
        print("first 8 values: "
              + " ".join(f"{v:.3f}" for v in vec.values[:8]))


if __name__ == "__main__":
    main()
