from __future__ import annotations

import numpy as np

from pluralsem import AudioToken, Corpus, PLURAL, SINGULAR, WordType


def make_type(type_id: str, orth: str, lexeme_id: str, number: str,
              phones: tuple[str, ...] = (), semantic_class: str | None = None) -> WordType:
    return WordType(type_id=type_id, orth=orth, lexeme_id=lexeme_id,
                    number=number, phones=phones, semantic_class=semantic_class)


def paired_types(n_lexemes: int, classes: list[str] | None = None) -> dict[str, WordType]:
    """n_lexemes singular-plural pairs with simple phones and cycled classes."""
    types: dict[str, WordType] = {}
    for i in range(n_lexemes):
        cls = classes[i % len(classes)] if classes else None
        lex = f"lex{i:03d}"
        base = ("K", "AA") if i % 2 == 0 else ("T", "IY")
        phones = base + (f"X{i}",)
        types[f"t{2 * i:03d}"] = make_type(
            f"t{2 * i:03d}", f"w{i}", lex, SINGULAR, phones, cls)
        types[f"t{2 * i + 1:03d}"] = make_type(
            f"t{2 * i + 1:03d}", f"w{i}s", lex, PLURAL, phones + ("S",), cls)
    return types


def corpus_with_tokens(types: dict[str, WordType],
                       tokens_per_type: int = 2) -> Corpus:
    tokens = {}
    for tid in sorted(types):
        for k in range(tokens_per_type):
            tok = f"{tid}_k{k}"
            tokens[tok] = AudioToken(token_id=tok, type_id=tid,
                                     audio_path=f"audio/{tok}.wav")
    return Corpus(types=types, tokens=tokens, base_dir=None)


def random_vectors(type_ids: list[str], dim: int,
                   seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {t: rng.normal(size=dim) for t in type_ids}
