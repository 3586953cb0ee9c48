from __future__ import annotations

import numpy as np
import pytest
from scipy.io import wavfile
from scipy.signal import hilbert

from pluralsem import (
    AudioReadFailure,
    AudioToken,
    CfbsfConfig,
    ChunkTooShort,
    EmptySignal,
    InvalidSpec,
    IoFailure,
    NoUsableTokens,
    TooManyChunks,
    build_form_matrix,
    extract_waveform,
    load_features,
    save_features,
)
from pluralsem.features import (
    _band_rng,
    _mel_filterbank,
    amplitude_envelope,
    band_correlations,
    band_summary,
    chunk_boundaries,
    mel_log_spectrogram,
    read_audio_segment,
    split_chunks,
)

SR = 16000


def _cfg(**kw) -> CfbsfConfig:
    base = dict(n_bands=6, sample_len=5, seed=0)
    base.update(kw)
    return CfbsfConfig(**base)


def _burst_signal(centers_s, dur_s=0.05, total_s=None, sr=SR):
    """Tone bursts with cosine-squared envelopes at given center times."""
    total_s = total_s or (max(centers_s) + 2 * dur_s)
    t = np.arange(int(total_s * sr)) / sr
    sig = np.zeros_like(t)
    for c in centers_s:
        local = (t - c) / dur_s
        window = np.where(np.abs(local) < 1.0, np.cos(local * np.pi / 2.0) ** 2, 0.0)
        sig += window * np.sin(2 * np.pi * 440.0 * t)
    return sig


# ---------------------------------------------------------------------------
# envelope

def _oracle_envelope(signal, window):
    # independent O(n * w) edge-normalized moving average of |analytic signal|
    mag = np.abs(hilbert(signal))
    n = mag.shape[0]
    half_lo = (window - 1) // 2
    half_hi = window - 1 - half_lo
    out = np.zeros(n)
    for i in range(n):
        lo = max(0, i - half_hi)
        hi = min(n, i + half_lo + 1)
        out[i] = mag[lo:hi].mean()
    return out


def test_envelope_matches_naive_oracle():
    rng = np.random.default_rng(30)
    cfg = _cfg()
    w = round(cfg.envelope_smoothing_window_s * SR)
    for _ in range(5):
        sig = rng.normal(size=int(rng.integers(500, 3000)))
        got = amplitude_envelope(sig, cfg)
        want = _oracle_envelope(sig, w)
        np.testing.assert_allclose(got, want, atol=1e-9)


def test_envelope_flat_for_pure_tone_interior():
    t = np.arange(SR) / SR
    env = amplitude_envelope(np.sin(2 * np.pi * 220.0 * t), _cfg())
    interior = env[400:-400]
    assert interior.std() < 1e-3
    assert abs(interior.mean() - 1.0) < 1e-2


def test_envelope_onset_peak_stays_at_edge():
    # decaying burst: the envelope maximum must stay at sample 0
    t = np.arange(2000) / SR
    sig = np.exp(-t * 80.0) * np.sin(2 * np.pi * 300.0 * t + np.pi / 2)
    env = amplitude_envelope(sig, _cfg())
    assert int(np.argmax(env)) < 8


def test_envelope_empty_rejected():
    with pytest.raises(EmptySignal):
        amplitude_envelope(np.array([]), _cfg())


# ---------------------------------------------------------------------------
# chunking

def test_boundaries_at_clear_envelope_maxima():
    sig = _burst_signal([0.07, 0.23], total_s=0.32)
    env = amplitude_envelope(sig, _cfg())
    bounds = chunk_boundaries(env, _cfg())
    assert len(bounds) == 2
    assert abs(bounds[0] - 0.07) < 0.01
    assert abs(bounds[1] - 0.23) < 0.01
    chunks = split_chunks(sig, bounds, _cfg())
    assert len(chunks) == 3
    assert sum(c.shape[0] for c in chunks) == sig.shape[0]


def test_low_prominence_bumps_ignored():
    sig = _burst_signal([0.10], total_s=0.3)
    sig += 0.04 * _burst_signal([0.22], total_s=0.3)  # under the 10% floor
    env = amplitude_envelope(sig, _cfg())
    bounds = chunk_boundaries(env, _cfg())
    assert len(bounds) == 1
    assert abs(bounds[0] - 0.10) < 0.01


def test_short_interior_chunk_merges_into_predecessor():
    cfg = _cfg()
    env = np.zeros(1000)
    # triangular peaks at 400 and 430: the 30-sample chunk is under the
    # 80-sample window and must merge backward, keeping the later boundary
    for p in (400, 430):
        env[p - 25:p + 26] += np.concatenate([np.linspace(0, 1, 26),
                                              np.linspace(1, 0, 26)[1:]])
    bounds = chunk_boundaries(env, cfg)
    assert [round(b * SR) for b in bounds] == [430]


def test_short_leading_chunk_merges_forward():
    cfg = _cfg()
    env = np.zeros(1000)
    env[:41] = np.linspace(1.0, 0.0, 41) ** 2
    env[40] = 0.35  # local maximum 40 samples in: leading chunk too short
    env[400 - 25:400 + 26] += np.concatenate([np.linspace(0, 1, 26),
                                              np.linspace(1, 0, 26)[1:]])
    bounds = chunk_boundaries(env, cfg)
    assert [round(b * SR) for b in bounds] == [400]


def test_flat_envelope_is_single_chunk():
    assert chunk_boundaries(np.zeros(500), _cfg()) == []
    assert chunk_boundaries(np.ones(500), _cfg()) == []


# ---------------------------------------------------------------------------
# spectrogram

def test_frame_count_formula():
    cfg = _cfg()
    rng = np.random.default_rng(31)
    win, hop = cfg.window_samples, cfg.hop_samples
    for _ in range(20):
        n = int(rng.integers(win, 4000))
        mel = mel_log_spectrogram(rng.normal(size=n), cfg)
        assert mel.shape == (cfg.n_bands, 1 + (n - win) // hop)


def test_chunk_shorter_than_window_rejected():
    with pytest.raises(ChunkTooShort):
        mel_log_spectrogram(np.zeros(10), _cfg())


def test_every_band_has_filter_support():
    for n_bands in (6, 21):
        bank = _mel_filterbank(SR, 256, n_bands)
        assert bank.shape == (n_bands, 129)
        assert (bank.sum(axis=1) > 0).all()


def test_pure_tone_energy_lands_in_matching_band():
    cfg = _cfg(n_bands=8)
    bank = _mel_filterbank(SR, cfg.fft_size, cfg.n_bands)
    freqs = np.arange(cfg.fft_size // 2 + 1) * (SR / cfg.fft_size)
    for f0 in (500.0, 1500.0, 4000.0):
        t = np.arange(1600) / SR
        mel = mel_log_spectrogram(np.sin(2 * np.pi * f0 * t), cfg)
        got = int(np.argmax(mel.mean(axis=1)))
        want = int(np.argmax(bank[:, int(np.argmin(np.abs(freqs - f0)))]))
        assert abs(got - want) <= 1


def test_silence_hits_log_floor():
    mel = mel_log_spectrogram(np.zeros(400), _cfg())
    np.testing.assert_allclose(mel, np.log(1e-10), atol=1e-12)


# ---------------------------------------------------------------------------
# band sampling

def test_band_summary_is_sorted_subsequence():
    rng_master = np.random.default_rng(32)
    for _ in range(30):
        series = rng_master.normal(size=int(rng_master.integers(12, 60)))
        got = band_summary(series, 10, np.random.default_rng(5))
        assert got.shape == (10,)
        # without replacement: each sampled value is a distinct position
        pos = []
        used = set()
        for v in got:
            candidates = [i for i in np.flatnonzero(series == v) if i not in used]
            assert candidates
            pos.append(candidates[0])
            used.add(candidates[0])
        assert pos == sorted(pos)


def test_band_summary_exact_length_is_identity():
    series = np.arange(7.0)
    got = band_summary(series, 7, np.random.default_rng(0))
    np.testing.assert_array_equal(got, series)


def test_band_summary_short_series_samples_with_replacement():
    series = np.array([3.0, 1.0, 2.0])
    got = band_summary(series, 8, np.random.default_rng(1))
    assert got.shape == (8,)
    assert set(got).issubset(set(series))
    # order of original positions is preserved, so values sorted by index
    idx = [int(np.flatnonzero(series == v)[0]) for v in got]
    assert idx == sorted(idx)


def test_band_summary_deterministic_per_rng_seed():
    series = np.random.default_rng(2).normal(size=40)
    a = band_summary(series, 10, np.random.default_rng(9))
    b = band_summary(series, 10, np.random.default_rng(9))
    c = band_summary(series, 10, np.random.default_rng(10))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_band_summary_empty_rejected():
    with pytest.raises(EmptySignal):
        band_summary(np.array([]), 5, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# band correlations

def test_correlations_two_band_hand_case():
    cfg = _cfg(n_bands=2, sample_len=4)
    samples = np.array([[1.0, 2.0, 3.0, 4.0],
                        [2.0, 4.0, 6.0, 8.0]])
    got = band_correlations(samples, cfg)
    np.testing.assert_allclose(got, [1.0, 1.0, 1.0], atol=1e-12)
    anti = np.array([[1.0, 2.0, 3.0, 4.0],
                     [4.0, 3.0, 2.0, 1.0]])
    np.testing.assert_allclose(band_correlations(anti, cfg),
                               [1.0, -1.0, 1.0], atol=1e-12)


def test_correlations_zero_variance_band_is_zero_everywhere():
    cfg = _cfg(n_bands=3, sample_len=4)
    samples = np.array([[1.0, 2.0, 3.0, 4.0],
                        [5.0, 5.0, 5.0, 5.0],
                        [4.0, 3.0, 2.0, 1.0]])
    got = band_correlations(samples, cfg)
    # order: (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
    np.testing.assert_allclose(got, [1.0, 0.0, -1.0, 0.0, 0.0, 1.0], atol=1e-12)


def test_correlations_length_without_self():
    cfg = _cfg(n_bands=4, sample_len=5, include_self_correlation=False)
    samples = np.random.default_rng(3).normal(size=(4, 5))
    assert band_correlations(samples, cfg).shape == (6,)
    assert cfg.n_correlations == 6


# ---------------------------------------------------------------------------
# whole-token extraction

def test_extract_layout_and_block_contents():
    cfg = _cfg()
    sig = _burst_signal([0.07, 0.23], total_s=0.32)
    vec = extract_waveform(sig, cfg, token_id="tok0")
    assert vec.n_chunks == 3
    assert vec.unpadded_len == 3 * cfg.per_chunk_dim
    assert vec.values.shape[0] == vec.unpadded_len

    env = amplitude_envelope(sig, cfg)
    chunks = split_chunks(sig, chunk_boundaries(env, cfg), cfg)
    mel = mel_log_spectrogram(chunks[0], cfg)
    rows = [band_summary(mel[b], cfg.sample_len, _band_rng(cfg, "tok0", 0, b, None))
            for b in range(cfg.n_bands)]
    sampled = np.stack(rows)
    nv = cfg.n_bands * cfg.sample_len
    np.testing.assert_allclose(vec.values[:nv], sampled.ravel(), atol=1e-12)
    np.testing.assert_allclose(vec.values[nv:cfg.per_chunk_dim],
                               band_correlations(sampled, cfg), atol=1e-12)


def test_extract_sample_seed_makes_token_ids_irrelevant():
    cfg = _cfg()
    sig = _burst_signal([0.1], total_s=0.25)
    a = extract_waveform(sig, cfg, token_id="x", sample_seed=77)
    b = extract_waveform(sig, cfg, token_id="y", sample_seed=77)
    np.testing.assert_array_equal(a.values, b.values)
    c = extract_waveform(sig, cfg, token_id="x")
    d = extract_waveform(sig, cfg, token_id="y")
    assert not np.array_equal(c.values, d.values)


def test_extract_max_chunks_pads_and_rejects():
    cfg = _cfg(max_chunks=4)
    sig = _burst_signal([0.07, 0.23], total_s=0.32)
    vec = extract_waveform(sig, cfg, token_id="t")
    assert vec.values.shape[0] == 4 * cfg.per_chunk_dim
    assert np.all(vec.values[vec.unpadded_len:] == 0.0)
    tight = _cfg(max_chunks=2)
    with pytest.raises(TooManyChunks):
        extract_waveform(sig, tight, token_id="t")


def test_config_validation():
    with pytest.raises(InvalidSpec):
        _cfg(n_bands=0)
    with pytest.raises(InvalidSpec):
        _cfg(sample_len=1)
    with pytest.raises(InvalidSpec):
        _cfg(peak_min_prominence=0.0)
    with pytest.raises(InvalidSpec):
        _cfg(fft_size=10)  # smaller than the 80-sample window


# ---------------------------------------------------------------------------
# audio reading

def _write_wav(path, signal, sr=SR):
    pcm = np.clip(np.round(signal * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(path, sr, pcm)


def test_read_audio_int16_scaling(tmp_path):
    sig = 0.5 * np.sin(2 * np.pi * 440.0 * np.arange(1600) / SR)
    _write_wav(tmp_path / "a.wav", sig)
    back = read_audio_segment(tmp_path / "a.wav")
    assert back.dtype == np.float64
    assert np.abs(back - sig).max() < 1e-3


def test_read_audio_stereo_averaged(tmp_path):
    left = np.full(800, 0.25)
    right = np.full(800, 0.75)
    pcm = np.stack([left, right], axis=1)
    pcm = np.round(pcm * 32767.0).astype(np.int16)
    wavfile.write(tmp_path / "st.wav", SR, pcm)
    back = read_audio_segment(tmp_path / "st.wav")
    assert abs(back.mean() - 0.5) < 1e-3


def test_read_audio_segment_slicing(tmp_path):
    sig = np.linspace(-0.5, 0.5, SR)  # one second ramp
    _write_wav(tmp_path / "r.wav", sig)
    back = read_audio_segment(tmp_path / "r.wav", start_s=0.25, end_s=0.75)
    assert back.shape[0] == SR // 2
    assert abs(back[0] - sig[SR // 4]) < 1e-3


def test_read_audio_segment_beyond_end_rejected(tmp_path):
    _write_wav(tmp_path / "s.wav", np.zeros(1600))
    with pytest.raises(AudioReadFailure):
        read_audio_segment(tmp_path / "s.wav", start_s=0.0, end_s=5.0)


def test_read_audio_declared_rate_mismatch_rejected(tmp_path):
    _write_wav(tmp_path / "d.wav", np.zeros(1600))
    with pytest.raises(AudioReadFailure):
        read_audio_segment(tmp_path / "d.wav", declared_rate=8000)


def test_read_audio_resamples_to_target(tmp_path):
    _write_wav(tmp_path / "lo.wav", np.sin(2 * np.pi * 220.0 * np.arange(8000) / 8000),
               sr=8000)
    back = read_audio_segment(tmp_path / "lo.wav", target_rate=SR)
    assert back.shape[0] == SR


def test_read_audio_missing_file(tmp_path):
    with pytest.raises(AudioReadFailure):
        read_audio_segment(tmp_path / "absent.wav")


# ---------------------------------------------------------------------------
# batch assembly

def _token_batch(tmp_path, n=3):
    tokens = []
    for i in range(n):
        sig = _burst_signal([0.08], total_s=0.22 + 0.02 * i)
        _write_wav(tmp_path / f"k{i}.wav", 0.8 * sig)
        tokens.append(AudioToken(token_id=f"k{i}", type_id="t0",
                                 audio_path=f"k{i}.wav"))
    return tokens


def test_build_form_matrix_auto_width_and_rows(tmp_path):
    cfg = _cfg()
    tokens = _token_batch(tmp_path)
    fm = build_form_matrix(tokens, cfg, tmp_path)
    assert fm.token_ids == ("k0", "k1", "k2")
    assert fm.width == max(fm.unpadded_lens)
    assert fm.row_of()["k1"] == 1
    assert fm.failures == ()


def test_build_form_matrix_collects_failures(tmp_path):
    cfg = _cfg()
    tokens = _token_batch(tmp_path)
    tokens.append(AudioToken(token_id="gone", type_id="t0",
                             audio_path="missing.wav"))
    fm = build_form_matrix(tokens, cfg, tmp_path)
    assert len(fm.token_ids) == 3
    assert len(fm.failures) == 1
    assert fm.failures[0][0] == "gone"
    assert "AudioReadFailure" in fm.failures[0][1]


def test_build_form_matrix_all_failed_rejected(tmp_path):
    tokens = [AudioToken(token_id="a", type_id="t0", audio_path="no.wav")]
    with pytest.raises(NoUsableTokens):
        build_form_matrix(tokens, _cfg(), tmp_path)


def test_build_form_matrix_threading_matches_serial(tmp_path):
    cfg = _cfg()
    tokens = _token_batch(tmp_path, n=6)
    serial = build_form_matrix(tokens, cfg, tmp_path, threads=1)
    threaded = build_form_matrix(tokens, cfg, tmp_path, threads=4)
    np.testing.assert_array_equal(serial.values, threaded.values)
    assert serial.token_ids == threaded.token_ids


# ---------------------------------------------------------------------------
# feature cache

def test_feature_cache_round_trip(tmp_path):
    cfg = _cfg()
    fm = build_form_matrix(_token_batch(tmp_path), cfg, tmp_path)
    cache = tmp_path / "feats.bin"
    save_features(fm, cache)
    back = load_features(cache)
    np.testing.assert_array_equal(back.values, fm.values.astype(np.float32))
    assert back.token_ids == fm.token_ids
    assert back.n_chunks == fm.n_chunks
    assert back.config == cfg


def test_feature_cache_rejects_other_config(tmp_path):
    cfg = _cfg()
    fm = build_form_matrix(_token_batch(tmp_path), cfg, tmp_path)
    cache = tmp_path / "feats.bin"
    save_features(fm, cache)
    with pytest.raises(IoFailure):
        load_features(cache, expected_config=_cfg(seed=99))


def test_feature_cache_missing_rows_sidecar(tmp_path):
    cfg = _cfg()
    fm = build_form_matrix(_token_batch(tmp_path), cfg, tmp_path)
    cache = tmp_path / "feats.bin"
    save_features(fm, cache)
    (tmp_path / "feats.bin.rows.csv").unlink()
    with pytest.raises(IoFailure):
        load_features(cache)
