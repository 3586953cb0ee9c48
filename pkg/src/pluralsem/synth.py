"""Deterministic synthetic corpora with class-structured plural semantics.

Lexemes get CV-syllable phone strings, class-conditional singular-to-plural
shift vectors, Zipf-like token counts with a floor, and (optionally) short
synthetic waveforms. One seed fixes everything: rerunning a spec reproduces
every file byte for byte.

Waveforms are harmonic bursts, one per syllable. The first burst peaks at
onset and later bursts peak mid-burst, so a word of n syllables has n-1
interior envelope maxima and splits into exactly n chunks under the default
chunker settings. Plural tokens carry a quiet high-band noise tail (a
fricative-like plural marker) kept below the chunker's prominence
threshold.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .corpus import (
    PLURAL,
    SINGULAR,
    AudioToken,
    Corpus,
    WordType,
    write_embeddings,
    write_manifest,
)
from .errors import InvalidSpec

CONSONANTS = ("P", "T", "K", "B", "D", "G", "M", "N", "L", "R", "F", "V", "Z", "SH", "CH")
VOWELS = ("AA", "AE", "AH", "EH", "IY", "IH", "OW", "UW", "ER", "AO")
PLURAL_MARKER = "S"

_ORTH = {
    "P": "p", "T": "t", "K": "k", "B": "b", "D": "d", "G": "g", "M": "m",
    "N": "n", "L": "l", "R": "r", "F": "f", "V": "v", "Z": "z", "SH": "sh",
    "CH": "ch", "S": "s",
    "AA": "a", "AE": "ay", "AH": "u", "EH": "e", "IY": "ee", "IH": "i",
    "OW": "o", "UW": "oo", "ER": "er", "AO": "aw",
}

AUDIO_NONE = "none"
AUDIO_WAVEFORM = "waveform"


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic corpus."""

    n_lexemes: int = 40
    n_classes: int = 5
    dim: int = 16
    class_shift_scale: float = 2.0
    residual_scale: float = 0.2
    zipf_exponent: float = 1.0
    min_tokens_per_type: int = 10
    audio_mode: str = AUDIO_NONE
    seed: int = 0
    class_centroid_scale: float = 1.0
    within_class_scale: float = 1.0
    target_total_tokens: int | None = None
    singular_only_fraction: float = 0.0
    plural_only_fraction: float = 0.0
    token_jitter: float = 0.05
    class_phone_prefix: bool = False
    sample_rate: int = 16000

    def __post_init__(self):
        if self.n_lexemes < 1:
            raise InvalidSpec(f"n_lexemes must be positive, got {self.n_lexemes}")
        if self.n_classes < 1:
            raise InvalidSpec(f"n_classes must be positive, got {self.n_classes}")
        if self.dim < 2:
            raise InvalidSpec(f"dim must be at least 2, got {self.dim}")
        for name in ("class_shift_scale", "residual_scale", "zipf_exponent",
                     "class_centroid_scale", "within_class_scale", "token_jitter"):
            if getattr(self, name) < 0:
                raise InvalidSpec(f"{name} must be nonnegative")
        if self.min_tokens_per_type < 1:
            raise InvalidSpec("min_tokens_per_type must be positive")
        if self.audio_mode not in (AUDIO_NONE, AUDIO_WAVEFORM):
            raise InvalidSpec(f"unknown audio_mode {self.audio_mode!r}")
        if not 0.0 <= self.singular_only_fraction <= 1.0:
            raise InvalidSpec("singular_only_fraction must be in [0, 1]")
        if not 0.0 <= self.plural_only_fraction <= 1.0:
            raise InvalidSpec("plural_only_fraction must be in [0, 1]")
        if self.singular_only_fraction + self.plural_only_fraction > 1.0:
            raise InvalidSpec("singleton fractions exceed 1")
        if self.target_total_tokens is not None and self.target_total_tokens < 1:
            raise InvalidSpec("target_total_tokens must be positive")
        if self.sample_rate < 4000:
            raise InvalidSpec(f"sample_rate too low: {self.sample_rate}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthResult:
    """A generated corpus plus the ground truth behind it."""

    corpus: Corpus
    type_vectors: dict[str, np.ndarray]
    embeddings: dict[str, np.ndarray]
    truth: dict
    out_dir: Path | None


def _draw_syllable(rng: np.random.Generator) -> tuple[str, str]:
    return (CONSONANTS[rng.integers(len(CONSONANTS))],
            VOWELS[rng.integers(len(VOWELS))])


def _orth_of(phones: tuple[str, ...]) -> str:
    return "".join(_ORTH[p] for p in phones)


def _draw_lexeme_phones(rng: np.random.Generator, taken: set[str],
                        prefix: tuple[str, str] | None) -> list[tuple[str, str]]:
    for _ in range(1000):
        n_syl = int(rng.integers(1, 4))
        syllables = []
        if prefix is not None:
            syllables.append(prefix)
            n_syl = max(n_syl, 2)
        while len(syllables) < n_syl:
            syllables.append(_draw_syllable(rng))
        phones = tuple(p for syl in syllables for p in syl)
        sg_orth = _orth_of(phones)
        pl_orth = sg_orth + _ORTH[PLURAL_MARKER]
        if sg_orth not in taken and pl_orth not in taken:
            taken.add(sg_orth)
            taken.add(pl_orth)
            return syllables
    raise InvalidSpec("could not draw enough distinct word forms")


def _zipf_counts(n_types: int, spec: SynthSpec,
                 rng: np.random.Generator) -> np.ndarray:
    ranks = np.empty(n_types, dtype=np.int64)
    ranks[rng.permutation(n_types)] = np.arange(1, n_types + 1)
    a = spec.zipf_exponent
    floor = spec.min_tokens_per_type

    def counts_for(scale: float) -> np.ndarray:
        raw = np.round(scale / ranks.astype(np.float64) ** a).astype(np.int64)
        return np.maximum(floor, raw)

    if spec.target_total_tokens is None:
        return counts_for(floor * n_types ** a)
    target = max(spec.target_total_tokens, floor * n_types)
    lo, hi = 0.0, float(target) * max(1.0, float(n_types) ** a)
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if counts_for(mid).sum() < target:
            lo = mid
        else:
            hi = mid
    counts = counts_for(hi)
    # exact adjustment: trim frequent types down to the floor, then top up
    order = np.argsort(ranks, kind="stable")
    i = 0
    while counts.sum() > target and i < 10 * n_types:
        idx = order[i % n_types]
        if counts[idx] > floor:
            counts[idx] -= 1
        i += 1
    i = 0
    while counts.sum() < target:
        counts[order[i % n_types]] += 1
        i += 1
    return counts


def _syllable_params(syllable: tuple[str, str]) -> dict[str, float]:
    h = hashlib.sha256("|".join(syllable).encode()).digest()
    return {
        "f0": 100.0 + (h[0] / 255.0) * 150.0,
        "formant": 400.0 + (h[1] / 255.0) * 2600.0,
        "dur": 0.10 + (h[2] / 255.0) * 0.07,
        "amp": 0.70 + (h[3] / 255.0) * 0.30,
        "phase": (h[4] / 255.0) * 2.0 * np.pi,
    }


def _token_waveform(syllables: list[tuple[str, str]], is_plural: bool,
                    spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    sr = spec.sample_rate
    jitter = spec.token_jitter

    def jit() -> float:
        return 1.0 + jitter * float(rng.uniform(-1.0, 1.0))

    durations = []
    for s_idx, syl in enumerate(syllables):
        p = _syllable_params(syl)
        durations.append(p["dur"] * jit())
    gap = 0.02
    trail = 0.03
    tail_dur = 0.12 if is_plural else 0.0
    total = sum(durations) + gap * (len(syllables) - 1) + tail_dur + trail
    if total > 0.6:
        scale = (0.6 - (total - sum(durations))) / sum(durations)
        durations = [d * scale for d in durations]

    # no leading silence: the first burst must peak at sample 0 so its
    # maximum is not an interior envelope peak
    parts = []
    for s_idx, syl in enumerate(syllables):
        p = _syllable_params(syl)
        f0 = p["f0"] * jit()
        formant = p["formant"] * jit()
        amp = p["amp"] * jit()
        nb = max(1, int(durations[s_idx] * sr))
        t = np.arange(nb) / sr
        wave = np.zeros(nb)
        for h in range(1, 6):
            # strong taper plus a baseline keeps the fundamental dominant,
            # and spread phases flatten the beat pattern; both keep the
            # smoothed envelope ripple well under the chunker's prominence
            # threshold
            g = np.exp(-((h * f0 - formant) ** 2) / (2.0 * 600.0 ** 2))
            weight = (1.0 / h ** 2) * (0.3 + 0.7 * g)
            phase = np.pi * h * (h + 1) / 5.0 + p["phase"]
            wave += weight * np.sin(2.0 * np.pi * h * f0 * t + phase)
        peak = np.abs(wave).max()
        if peak > 0:
            wave /= peak
        grid = np.linspace(0.0, 1.0, nb)
        if s_idx == 0:
            envelope = np.cos(grid * np.pi / 2.0) ** 2  # loudest at onset
        else:
            envelope = np.sin(grid * np.pi) ** 2
        parts.append(wave * envelope * amp)
        if s_idx + 1 < len(syllables):
            parts.append(np.zeros(int(gap * sr)))
    if is_plural:
        nt = int(tail_dur * sr)
        noise = rng.normal(size=nt + 1)
        hissy = np.diff(noise)  # first difference tilts the noise upward in frequency
        peak = np.abs(hissy).max()
        if peak > 0:
            hissy /= peak
        envelope = np.sin(np.linspace(0.0, np.pi, nt)) ** 2
        parts.append(hissy * envelope * 0.05)
    parts.append(np.zeros(int(trail * sr)))
    signal = np.concatenate(parts)
    if signal.shape[0] < int(0.2 * sr):
        signal = np.concatenate([signal,
                                 np.zeros(int(0.2 * sr) - signal.shape[0])])
    signal = signal + rng.normal(size=signal.shape[0]) * 0.004
    signal = signal / np.abs(signal).max() * 0.8
    return signal


def generate(spec: SynthSpec, out_dir: str | Path | None = None) -> SynthResult:
    """Build a corpus from a spec, writing files when out_dir is given.

    Writes types.csv/tokens.csv, embeddings.txt, truth.json, and (in
    waveform mode) audio/<token>.wav files. Waveform mode requires out_dir.
    """
    if spec.audio_mode == AUDIO_WAVEFORM and out_dir is None:
        raise InvalidSpec("waveform generation needs an output directory")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x57E9]))

    class_of = np.array([i % spec.n_classes for i in range(spec.n_lexemes)])
    rng.shuffle(class_of)
    class_prefixes = None
    if spec.class_phone_prefix:
        class_prefixes = [_draw_syllable(rng) for _ in range(spec.n_classes)]

    n_sg_only = int(round(spec.singular_only_fraction * spec.n_lexemes))
    n_pl_only = int(round(spec.plural_only_fraction * spec.n_lexemes))
    kinds = (["sg_only"] * n_sg_only + ["pl_only"] * n_pl_only
             + ["paired"] * (spec.n_lexemes - n_sg_only - n_pl_only))
    kinds = list(np.array(kinds)[rng.permutation(spec.n_lexemes)])

    centroids = rng.normal(size=(spec.n_classes, spec.dim)) * spec.class_centroid_scale
    # Centered across classes: the average shift carries no class information,
    # so pluralization structure lives entirely in the class-specific parts.
    shifts = rng.normal(size=(spec.n_classes, spec.dim)) * spec.class_shift_scale
    if spec.n_classes > 1:
        shifts = shifts - shifts.mean(axis=0)

    taken: set[str] = set()
    types: dict[str, WordType] = {}
    type_vectors: dict[str, np.ndarray] = {}
    embeddings: dict[str, np.ndarray] = {}
    syllables_of_type: dict[str, list[tuple[str, str]]] = {}
    truth_lexemes: dict[str, dict] = {}

    type_counter = 0
    for li in range(spec.n_lexemes):
        cls = int(class_of[li])
        prefix = class_prefixes[cls] if class_prefixes else None
        syllables = _draw_lexeme_phones(rng, taken, prefix)
        sg_phones = tuple(p for syl in syllables for p in syl)
        pl_phones = sg_phones + (PLURAL_MARKER,)
        lexeme_id = f"lex{li:04d}"
        v_sg = centroids[cls] + rng.normal(size=spec.dim) * spec.within_class_scale
        v_pl = v_sg + shifts[cls] + rng.normal(size=spec.dim) * spec.residual_scale
        kind = kinds[li]
        emitted = {}
        for number, phones, vec in ((SINGULAR, sg_phones, v_sg),
                                    (PLURAL, pl_phones, v_pl)):
            if kind == "sg_only" and number == PLURAL:
                continue
            if kind == "pl_only" and number == SINGULAR:
                continue
            type_id = f"t{type_counter:04d}"
            type_counter += 1
            orth = _orth_of(phones)
            types[type_id] = WordType(
                type_id=type_id, orth=orth, lexeme_id=lexeme_id,
                number=number, phones=phones,
                semantic_class=f"class{cls}",
            )
            vec = vec.copy()
            vec.flags.writeable = False
            type_vectors[type_id] = vec
            embeddings[orth] = vec
            syllables_of_type[type_id] = syllables
            emitted[number] = type_id
        truth_lexemes[lexeme_id] = {
            "class": cls, "kind": kind,
            "phones": list(sg_phones), "types": emitted,
        }

    type_ids = sorted(types)
    counts = _zipf_counts(len(type_ids), spec, rng)
    tokens: dict[str, AudioToken] = {}
    audio_jobs: list[tuple[str, str]] = []
    for pos, type_id in enumerate(type_ids):
        for j in range(int(counts[pos])):
            token_id = f"{type_id}_k{j:03d}"
            rel = f"audio/{token_id}.wav"
            tokens[token_id] = AudioToken(
                token_id=token_id, type_id=type_id, audio_path=rel,
                sample_rate=spec.sample_rate,
            )
            audio_jobs.append((token_id, type_id))

    out_path = Path(out_dir) if out_dir is not None else None
    corpus = Corpus(types=types, tokens=tokens, base_dir=out_path)

    truth = {
        "spec": spec.to_dict(),
        "class_centroids": centroids.tolist(),
        "class_shifts": shifts.tolist(),
        "lexemes": truth_lexemes,
        "token_counts": {type_ids[i]: int(counts[i]) for i in range(len(type_ids))},
    }

    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        write_manifest(corpus, out_path)
        write_embeddings(embeddings, out_path / "embeddings.txt")
        (out_path / "truth.json").write_text(
            json.dumps(truth, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        if spec.audio_mode == AUDIO_WAVEFORM:
            (out_path / "audio").mkdir(exist_ok=True)
            for idx, (token_id, type_id) in enumerate(audio_jobs):
                tok_rng = np.random.default_rng(
                    np.random.SeedSequence([spec.seed, 0xA0D10, idx]))
                signal = _token_waveform(
                    syllables_of_type[type_id],
                    types[type_id].number == PLURAL, spec, tok_rng)
                pcm = np.clip(np.round(signal * 32767.0), -32768, 32767).astype(np.int16)
                wavfile.write(out_path / "audio" / f"{token_id}.wav",
                              spec.sample_rate, pcm)

    return SynthResult(corpus=corpus, type_vectors=type_vectors,
                       embeddings=embeddings, truth=truth, out_dir=out_path)
