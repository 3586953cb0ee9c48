from __future__ import annotations

import json

import numpy as np
import pytest
from scipy.io import wavfile

from pluralsem import (
    CfbsfConfig,
    InvalidSpec,
    PLURAL,
    SINGULAR,
    SynthSpec,
    generate,
)
from pluralsem.features import amplitude_envelope, chunk_boundaries


def _small_spec(**kw):
    base = dict(n_lexemes=8, n_classes=3, dim=4, min_tokens_per_type=2, seed=1)
    base.update(kw)
    return SynthSpec(**base)


# ---------------------------------------------------------------------------
# spec validation

@pytest.mark.parametrize("kw", [
    {"n_lexemes": 0},
    {"n_classes": 0},
    {"dim": 1},
    {"class_shift_scale": -0.1},
    {"residual_scale": -1.0},
    {"min_tokens_per_type": 0},
    {"audio_mode": "mfcc"},
    {"singular_only_fraction": 1.5},
    {"singular_only_fraction": 0.6, "plural_only_fraction": 0.6},
    {"target_total_tokens": 0},
    {"sample_rate": 2000},
])
def test_bad_specs_rejected(kw):
    with pytest.raises(InvalidSpec):
        _small_spec(**kw)


def test_waveform_mode_needs_directory():
    with pytest.raises(InvalidSpec):
        generate(_small_spec(audio_mode="waveform"))


# ---------------------------------------------------------------------------
# structure of a generated corpus

def test_pairs_share_lexeme_and_differ_by_marker():
    result = generate(_small_spec())
    corpus = result.corpus
    by_lexeme = {}
    for t in corpus.types.values():
        by_lexeme.setdefault(t.lexeme_id, {})[t.number] = t
    assert len(by_lexeme) == 8
    for lex, pair in by_lexeme.items():
        sg, pl = pair[SINGULAR], pair[PLURAL]
        assert pl.phones == sg.phones + ("S",)
        assert pl.orth == sg.orth + "s"
        assert pl.semantic_class == sg.semantic_class
    orths = [t.orth for t in corpus.types.values()]
    assert len(set(orths)) == len(orths)


def test_class_assignment_balanced():
    result = generate(_small_spec(n_lexemes=20, n_classes=3))
    per_class = {}
    for lex in result.truth["lexemes"].values():
        per_class[lex["class"]] = per_class.get(lex["class"], 0) + 1
    assert set(per_class) == {0, 1, 2}
    assert max(per_class.values()) - min(per_class.values()) <= 1


def test_vectors_follow_class_geometry():
    spec = _small_spec(n_lexemes=12, residual_scale=0.0)
    result = generate(spec)
    shifts = np.array(result.truth["class_shifts"])
    np.testing.assert_allclose(shifts.mean(axis=0), 0.0, atol=1e-12)
    for lex in result.truth["lexemes"].values():
        sg_id = lex["types"][SINGULAR]
        pl_id = lex["types"][PLURAL]
        want = result.type_vectors[sg_id] + shifts[lex["class"]]
        np.testing.assert_allclose(result.type_vectors[pl_id], want, atol=1e-12)


def test_residual_perturbs_plurals_only():
    spec = _small_spec(residual_scale=0.5)
    result = generate(spec)
    shifts = np.array(result.truth["class_shifts"])
    offsets = []
    for lex in result.truth["lexemes"].values():
        sg = result.type_vectors[lex["types"][SINGULAR]]
        pl = result.type_vectors[lex["types"][PLURAL]]
        offsets.append(np.linalg.norm(pl - sg - shifts[lex["class"]]))
    assert min(offsets) > 0.0


def test_embeddings_keyed_by_orth_share_arrays():
    result = generate(_small_spec())
    for tid, t in result.corpus.types.items():
        assert result.embeddings[t.orth] is result.type_vectors[tid]
    with pytest.raises(ValueError):
        result.type_vectors[next(iter(result.type_vectors))][0] = 99.0


def test_token_counts_and_floor():
    spec = _small_spec(min_tokens_per_type=3)
    result = generate(spec)
    counts = result.truth["token_counts"]
    assert set(counts) == set(result.corpus.types)
    assert min(counts.values()) >= 3
    assert sum(counts.values()) == len(result.corpus.tokens)
    for tok_id, tok in result.corpus.tokens.items():
        assert tok_id == f"{tok.type_id}_k{int(tok_id.split('_k')[1]):03d}"
        assert tok.audio_path == f"audio/{tok_id}.wav"
        assert tok.sample_rate == spec.sample_rate


def test_token_total_hits_target_exactly():
    spec = _small_spec(target_total_tokens=137)
    result = generate(spec)
    assert len(result.corpus.tokens) == 137
    assert min(result.truth["token_counts"].values()) >= spec.min_tokens_per_type


def test_zipf_exponent_skews_counts():
    flat = generate(_small_spec(zipf_exponent=0.0, target_total_tokens=160))
    skew = generate(_small_spec(zipf_exponent=1.5, target_total_tokens=160))
    flat_counts = sorted(flat.truth["token_counts"].values())
    skew_counts = sorted(skew.truth["token_counts"].values())
    assert flat_counts[-1] - flat_counts[0] <= 1
    assert skew_counts[-1] > 3 * skew_counts[0]


def test_singleton_fractions():
    spec = _small_spec(n_lexemes=10, singular_only_fraction=0.2,
                       plural_only_fraction=0.1)
    result = generate(spec)
    kinds = [lex["kind"] for lex in result.truth["lexemes"].values()]
    assert kinds.count("sg_only") == 2
    assert kinds.count("pl_only") == 1
    for lex in result.truth["lexemes"].values():
        if lex["kind"] == "sg_only":
            assert list(lex["types"]) == [SINGULAR]
        elif lex["kind"] == "pl_only":
            assert list(lex["types"]) == [PLURAL]
        else:
            assert sorted(lex["types"]) == sorted([SINGULAR, PLURAL])


def test_class_phone_prefix_shared_within_class():
    spec = _small_spec(n_lexemes=9, n_classes=3, class_phone_prefix=True)
    result = generate(spec)
    first_syllables = {}
    for lex in result.truth["lexemes"].values():
        first_syllables.setdefault(lex["class"], set()).add(tuple(lex["phones"][:2]))
    for cls, syls in first_syllables.items():
        assert len(syls) == 1
    assert len(set(frozenset(s) for s in first_syllables.values())) == 3


# ---------------------------------------------------------------------------
# determinism

def test_generation_deterministic():
    a = generate(_small_spec())
    b = generate(_small_spec())
    c = generate(_small_spec(seed=2))
    assert sorted(a.corpus.types) == sorted(b.corpus.types)
    for tid in a.corpus.types:
        assert a.corpus.types[tid] == b.corpus.types[tid]
        np.testing.assert_array_equal(a.type_vectors[tid], b.type_vectors[tid])
    assert json.dumps(a.truth, sort_keys=True) == json.dumps(b.truth, sort_keys=True)
    assert json.dumps(a.truth, sort_keys=True) != json.dumps(c.truth, sort_keys=True)


def test_waveform_bytes_deterministic(tmp_path):
    spec = _small_spec(n_lexemes=2, audio_mode="waveform",
                       min_tokens_per_type=1, target_total_tokens=4)
    a_dir = tmp_path / "a"
    b_dir = tmp_path / "b"
    generate(spec, a_dir)
    generate(spec, b_dir)
    wavs = sorted(p.name for p in (a_dir / "audio").iterdir())
    assert wavs == sorted(p.name for p in (b_dir / "audio").iterdir())
    for name in wavs:
        assert (a_dir / "audio" / name).read_bytes() == \
            (b_dir / "audio" / name).read_bytes()


# ---------------------------------------------------------------------------
# written files and audio content

def test_output_directory_layout(tmp_path):
    spec = _small_spec(n_lexemes=3, audio_mode="waveform",
                       min_tokens_per_type=1, target_total_tokens=6)
    result = generate(spec, tmp_path)
    assert result.out_dir == tmp_path
    for name in ("types.csv", "tokens.csv", "embeddings.txt", "truth.json"):
        assert (tmp_path / name).is_file()
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert truth == result.truth
    assert sorted(p.stem for p in (tmp_path / "audio").iterdir()) == \
        sorted(result.corpus.tokens)


def test_wav_content_sane(tmp_path):
    spec = _small_spec(n_lexemes=3, audio_mode="waveform",
                       min_tokens_per_type=1, target_total_tokens=6)
    result = generate(spec, tmp_path)
    for tok in result.corpus.tokens.values():
        sr, data = wavfile.read(tmp_path / tok.audio_path)
        assert sr == spec.sample_rate
        assert data.dtype == np.int16
        assert data.shape[0] >= int(0.2 * sr)
        peak = np.abs(data).max()
        assert 0.75 * 32767 <= peak <= 0.85 * 32767  # normalized, unclipped


def test_chunk_count_matches_syllable_count(tmp_path):
    spec = _small_spec(n_lexemes=6, audio_mode="waveform",
                       min_tokens_per_type=1, target_total_tokens=12, seed=4)
    result = generate(spec, tmp_path)
    cfg = CfbsfConfig()
    for lex in result.truth["lexemes"].values():
        n_syl = len(lex["phones"]) // 2
        for number, tid in lex["types"].items():
            tok = next(t for t in result.corpus.tokens.values()
                       if t.type_id == tid)
            sr, data = wavfile.read(tmp_path / tok.audio_path)
            signal = data / 32768.0
            env = amplitude_envelope(signal, cfg)
            bounds = chunk_boundaries(env, cfg)
            assert len(bounds) + 1 == n_syl, (lex["phones"], number)
