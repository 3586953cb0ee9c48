"""Chunk-based acoustic summary features for spoken word tokens.

The pipeline per token:

1. read the audio segment, downmix to mono, resample to the target rate
2. smoothed Hilbert amplitude envelope
3. chunk boundaries at envelope local maxima of sufficient prominence;
   chunks shorter than one spectrogram window merge into their predecessor
4. per chunk, a mel log spectrogram over short non-overlapping rectangular
   windows
5. per band, an order-preserving random sample of fixed length from the
   band's frame series
6. cross-band Pearson correlations of those samples
7. concatenate band samples (band-major) then correlations, chunk after
   chunk in time order, and zero-pad to a common width

The per-band sampling is the only random step. Its generator is derived
from (config seed, token id, chunk index, band index), so extraction is a
pure function of the audio bytes, the token id, and the configuration.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import find_peaks, hilbert, resample_poly

from . import matio
from .corpus import AudioToken
from .errors import (
    AudioReadFailure,
    ChunkTooShort,
    EmptySignal,
    InvalidSpec,
    IoFailure,
    NoUsableTokens,
    PluralsemError,
    TooManyChunks,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CfbsfConfig:
    """Extraction parameters; max_chunks None means infer from the batch."""

    n_bands: int = 21
    sample_len: int = 20
    fft_window_s: float = 0.005
    hop_s: float = 0.005
    include_self_correlation: bool = True
    envelope_smoothing_window_s: float = 0.02
    peak_min_prominence: float = 0.1
    target_sample_rate: int = 16000
    max_chunks: int | None = None
    fft_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.n_bands < 1:
            raise InvalidSpec(f"n_bands must be positive, got {self.n_bands}")
        if self.sample_len < 2:
            raise InvalidSpec(f"sample_len must be at least 2, got {self.sample_len}")
        if self.fft_window_s <= 0 or self.hop_s <= 0:
            raise InvalidSpec("window and hop must be positive")
        if self.envelope_smoothing_window_s <= 0:
            raise InvalidSpec("envelope smoothing window must be positive")
        if not 0 < self.peak_min_prominence <= 1:
            raise InvalidSpec("peak prominence must be in (0, 1]")
        if self.target_sample_rate <= 0:
            raise InvalidSpec("target sample rate must be positive")
        if self.max_chunks is not None and self.max_chunks < 1:
            raise InvalidSpec(f"max_chunks must be positive, got {self.max_chunks}")
        if self.fft_size < self.window_samples:
            raise InvalidSpec("fft_size smaller than the analysis window")

    @property
    def window_samples(self) -> int:
        return max(1, round(self.fft_window_s * self.target_sample_rate))

    @property
    def hop_samples(self) -> int:
        return max(1, round(self.hop_s * self.target_sample_rate))

    @property
    def n_correlations(self) -> int:
        n = self.n_bands
        pairs = n * (n - 1) // 2
        return pairs + n if self.include_self_correlation else pairs

    @property
    def per_chunk_dim(self) -> int:
        return self.n_bands * self.sample_len + self.n_correlations

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "CfbsfConfig":
        known = {f: doc[f] for f in cls.__dataclass_fields__ if f in doc}
        return cls(**known)

    def config_digest(self) -> bytes:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()


@dataclass(frozen=True)
class CfbsfVector:
    """One token's features.

    values has length max_chunks * per_chunk_dim when the config fixes
    max_chunks (zero past unpadded_len); with max_chunks inferred, values is
    the unpadded concatenation and batch assembly pads it.
    """

    values: np.ndarray
    n_chunks: int
    unpadded_len: int
    token_id: str

    def padded_to(self, width: int) -> np.ndarray:
        if self.unpadded_len > width:
            raise TooManyChunks(
                f"token {self.token_id}: {self.unpadded_len} values exceed "
                f"width {width}"
            )
        out = np.zeros(width)
        out[:self.unpadded_len] = self.values[:self.unpadded_len]
        return out


# ---------------------------------------------------------------------------
# audio reading

def read_audio_segment(path: str | Path, start_s: float | None = None,
                       end_s: float | None = None,
                       declared_rate: int | None = None,
                       target_rate: int = 16000) -> np.ndarray:
    """Mono float signal at target_rate for the given file segment."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError as exc:
        raise AudioReadFailure(f"missing audio file {path}") from exc
    except (OSError, ValueError) as exc:
        raise AudioReadFailure(f"cannot read {path}: {exc}") from exc
    if declared_rate is not None and rate != declared_rate:
        raise AudioReadFailure(
            f"{path}: file rate {rate} differs from declared {declared_rate}"
        )
    if data.dtype == np.int16:
        signal = data / 32768.0
    elif data.dtype == np.int32:
        signal = data / 2147483648.0
    elif data.dtype == np.uint8:
        signal = (data.astype(np.float64) - 128.0) / 128.0
    else:
        signal = data.astype(np.float64)
    if signal.ndim == 2:
        signal = signal.mean(axis=1)
    if start_s is not None:
        i0 = round(start_s * rate)
        i1 = round(end_s * rate)
        if i0 >= signal.shape[0] or i1 > signal.shape[0]:
            raise AudioReadFailure(
                f"{path}: segment {start_s}..{end_s}s beyond file end"
            )
        signal = signal[i0:i1]
    if signal.shape[0] == 0:
        raise EmptySignal(f"{path}: empty segment")
    if rate != target_rate:
        g = math.gcd(int(rate), int(target_rate))
        signal = resample_poly(signal, target_rate // g, rate // g)
        if signal.shape[0] == 0:
            raise EmptySignal(f"{path}: segment vanished in resampling")
    return np.asarray(signal, dtype=np.float64)


# ---------------------------------------------------------------------------
# envelope and chunking

def amplitude_envelope(signal: np.ndarray, cfg: CfbsfConfig) -> np.ndarray:
    """Smoothed magnitude of the analytic signal.

    Smoothing is an edge-normalized moving average: near the ends the kernel
    is renormalized by its overlap with the signal, so an onset peak at
    sample 0 stays at sample 0 instead of being dragged inward.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.shape[0] == 0:
        raise EmptySignal("cannot take the envelope of an empty signal")
    env = np.abs(hilbert(signal))
    w = max(1, round(cfg.envelope_smoothing_window_s * cfg.target_sample_rate))
    if w == 1:
        return env
    kernel = np.ones(w)
    weight = np.convolve(np.ones_like(env), kernel, mode="same")
    return np.convolve(env, kernel, mode="same") / weight


def chunk_boundaries(envelope: np.ndarray, cfg: CfbsfConfig) -> list[float]:
    """Boundary times (seconds) splitting the signal at envelope maxima.

    k approved maxima produce k boundaries, hence k+1 raw chunks; chunks
    shorter than one spectrogram window are merged into their predecessor
    (the leading chunk merges forward), so fewer boundaries can come back.
    An empty list means the whole signal is one chunk.
    """
    envelope = np.asarray(envelope, dtype=np.float64)
    if envelope.shape[0] == 0:
        raise EmptySignal("empty envelope")
    top = envelope.max()
    if top <= 0:
        return []
    peaks, _ = find_peaks(envelope, prominence=cfg.peak_min_prominence * top)
    bounds = [int(p) for p in peaks]
    min_len = cfg.window_samples
    n = envelope.shape[0]
    while bounds:
        edges = [0] + bounds + [n]
        lengths = [edges[i + 1] - edges[i] for i in range(len(edges) - 1)]
        short = [i for i, ln in enumerate(lengths) if ln < min_len]
        if not short:
            break
        j = short[0]
        # merge into the preceding chunk; a short leading chunk merges forward
        del bounds[max(j - 1, 0)]
    sr = cfg.target_sample_rate
    return [b / sr for b in bounds]


def split_chunks(signal: np.ndarray, boundaries: list[float],
                 cfg: CfbsfConfig) -> list[np.ndarray]:
    sr = cfg.target_sample_rate
    edges = [0] + [round(b * sr) for b in boundaries] + [signal.shape[0]]
    return [signal[edges[i]:edges[i + 1]] for i in range(len(edges) - 1)]


# ---------------------------------------------------------------------------
# spectrogram

def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def _mel_filterbank(sample_rate: int, fft_size: int, n_bands: int) -> np.ndarray:
    """Triangular filters on a mel-spaced grid, evaluated at rfft bin centers."""
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2.0), n_bands + 2))
    freqs = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
    bank = np.zeros((n_bands, freqs.shape[0]))
    for b in range(n_bands):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        bank[b] = np.maximum(0.0, np.minimum(up, down))
    bank.flags.writeable = False
    return bank


LOG_FLOOR = 1e-10


def mel_log_spectrogram(chunk: np.ndarray, cfg: CfbsfConfig) -> np.ndarray:
    """(n_bands, n_frames) natural-log band energies of one chunk.

    Rectangular windows, zero-padded to cfg.fft_size before the FFT so every
    band keeps support even at very short windows.
    """
    chunk = np.asarray(chunk, dtype=np.float64)
    win = cfg.window_samples
    hop = cfg.hop_samples
    if chunk.shape[0] < win:
        raise ChunkTooShort(
            f"chunk of {chunk.shape[0]} samples, window needs {win}"
        )
    n_frames = 1 + (chunk.shape[0] - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = chunk[idx]
    spectra = np.abs(np.fft.rfft(frames, n=cfg.fft_size, axis=1)) ** 2
    bank = _mel_filterbank(cfg.target_sample_rate, cfg.fft_size, cfg.n_bands)
    energies = spectra @ bank.T
    return np.log(energies.T + LOG_FLOOR)


# ---------------------------------------------------------------------------
# band sampling and correlation

def band_summary(series: np.ndarray, sample_len: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Order-preserving random sample of a band's frame series.

    Without replacement when enough frames exist, with replacement
    otherwise; indices are sorted so time order survives. A series of
    exactly sample_len frames comes back unchanged.
    """
    series = np.asarray(series, dtype=np.float64)
    n = series.shape[0]
    if n == 0:
        raise EmptySignal("empty band series")
    replace = n < sample_len
    idx = rng.choice(n, size=sample_len, replace=replace)
    idx.sort()
    return series[idx]


def band_correlations(samples: np.ndarray, cfg: CfbsfConfig) -> np.ndarray:
    """Upper-triangle Pearson correlations between band samples.

    Row-major (first band, second band) order with second >= first; the
    diagonal is included when include_self_correlation. Any correlation
    touching a zero-variance sample is 0, the self-correlation included.
    """
    samples = np.asarray(samples, dtype=np.float64)
    centered = samples - samples.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered * centered).sum(axis=1))
    safe = np.where(norms == 0.0, 1.0, norms)
    r = (centered / safe[:, None]) @ (centered / safe[:, None]).T
    r[norms == 0.0, :] = 0.0
    r[:, norms == 0.0] = 0.0
    r = np.clip(r, -1.0, 1.0)
    i, j = np.triu_indices(cfg.n_bands, k=0 if cfg.include_self_correlation else 1)
    return r[i, j]


# ---------------------------------------------------------------------------
# extraction

def _token_entropy(token_id: str) -> int:
    return int.from_bytes(hashlib.sha256(token_id.encode()).digest()[:8], "big")


def _band_rng(cfg: CfbsfConfig, token_id: str, chunk_idx: int, band_idx: int,
              sample_seed: int | None) -> np.random.Generator:
    if sample_seed is not None:
        entropy = [int(sample_seed), chunk_idx, band_idx]
    else:
        entropy = [cfg.seed, _token_entropy(token_id), chunk_idx, band_idx]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def extract_waveform(signal: np.ndarray, cfg: CfbsfConfig, token_id: str = "",
                     sample_seed: int | None = None) -> CfbsfVector:
    """Features for an already-loaded mono signal at the target rate.

    sample_seed overrides the (config seed, token id) entropy, which makes
    two extractions of identical audio comparable regardless of token id.
    """
    env = amplitude_envelope(signal, cfg)
    boundaries = chunk_boundaries(env, cfg)
    chunks = split_chunks(signal, boundaries, cfg)
    if cfg.max_chunks is not None and len(chunks) > cfg.max_chunks:
        raise TooManyChunks(
            f"token {token_id or '<anonymous>'}: {len(chunks)} chunks, "
            f"config allows {cfg.max_chunks}"
        )
    pieces = []
    for ci, chunk in enumerate(chunks):
        mel = mel_log_spectrogram(chunk, cfg)
        rows = [
            band_summary(mel[b], cfg.sample_len,
                         _band_rng(cfg, token_id, ci, b, sample_seed))
            for b in range(cfg.n_bands)
        ]
        sampled = np.stack(rows)
        pieces.append(np.concatenate([sampled.ravel(),
                                      band_correlations(sampled, cfg)]))
    values = np.concatenate(pieces)
    unpadded = values.shape[0]
    if cfg.max_chunks is not None:
        padded = np.zeros(cfg.max_chunks * cfg.per_chunk_dim)
        padded[:unpadded] = values
        values = padded
    return CfbsfVector(values=values, n_chunks=len(chunks),
                       unpadded_len=unpadded, token_id=token_id)


def extract(token: AudioToken, cfg: CfbsfConfig,
            base_dir: str | Path | None = None,
            sample_seed: int | None = None) -> CfbsfVector:
    """Read a token's audio segment and extract its features."""
    path = Path(token.audio_path)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    signal = read_audio_segment(path, token.start_s, token.end_s,
                                token.sample_rate, cfg.target_sample_rate)
    return extract_waveform(signal, cfg, token.token_id, sample_seed)


# ---------------------------------------------------------------------------
# batch assembly and cache

@dataclass
class FormMatrix:
    """Stacked feature rows for a token batch, one row per surviving token."""

    values: np.ndarray
    token_ids: tuple[str, ...]
    n_chunks: tuple[int, ...]
    unpadded_lens: tuple[int, ...]
    config: CfbsfConfig | None = None
    failures: tuple[tuple[str, str], ...] = ()

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    def row_of(self) -> dict[str, int]:
        return {tid: i for i, tid in enumerate(self.token_ids)}


def build_form_matrix(tokens: list[AudioToken], cfg: CfbsfConfig,
                      base_dir: str | Path | None = None,
                      threads: int = 1) -> FormMatrix:
    """Extract every token, collect failures, and pad rows to one width.

    Failed tokens are dropped and reported in FormMatrix.failures; if all
    tokens fail (or none were given) NoUsableTokens is raised. Row order
    follows the input token order.
    """
    def one(token: AudioToken):
        try:
            return token.token_id, extract(token, cfg, base_dir), None
        except PluralsemError as exc:
            return token.token_id, None, f"{type(exc).__name__}: {exc}"

    if threads > 1 and len(tokens) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, tokens))
    else:
        results = [one(t) for t in tokens]
    vectors = [(tid, vec) for tid, vec, _ in results if vec is not None]
    failures = tuple((tid, err) for tid, _, err in results if err is not None)
    for tid, err in failures:
        log.warning("feature extraction failed for %s (%s)", tid, err)
    if not vectors:
        raise NoUsableTokens(
            f"no usable tokens among {len(tokens)} ({len(failures)} failed)"
        )
    if cfg.max_chunks is not None:
        width = cfg.max_chunks * cfg.per_chunk_dim
    else:
        width = max(v.unpadded_len for _, v in vectors)
    matrix = np.stack([v.padded_to(width) for _, v in vectors])
    return FormMatrix(
        values=matrix,
        token_ids=tuple(tid for tid, _ in vectors),
        n_chunks=tuple(v.n_chunks for _, v in vectors),
        unpadded_lens=tuple(v.unpadded_len for _, v in vectors),
        config=cfg,
        failures=failures,
    )


def _rows_sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".rows.csv")


def _config_sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".config.json")


def save_features(fm: FormMatrix, path: str | Path) -> None:
    """Cache a form matrix: binary container plus row and config sidecars."""
    path = Path(path)
    digest = fm.config.config_digest() if fm.config else b"\x00" * 32
    matio.write_matrix(path, fm.values, digest)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "token_id", "n_chunks", "unpadded_len"])
    for i, tid in enumerate(fm.token_ids):
        writer.writerow([i, tid, fm.n_chunks[i], fm.unpadded_lens[i]])
    try:
        _rows_sidecar(path).write_text(buf.getvalue(), encoding="utf-8")
        if fm.config is not None:
            doc = json.dumps(fm.config.to_dict(), sort_keys=True, indent=2)
            _config_sidecar(path).write_text(doc + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write feature sidecars at {path}: {exc}") from exc


def load_features(path: str | Path,
                  expected_config: CfbsfConfig | None = None) -> FormMatrix:
    """Load a cached form matrix, verifying config identity when possible."""
    path = Path(path)
    values, digest = matio.read_matrix(path)
    config = None
    cfg_path = _config_sidecar(path)
    if cfg_path.exists():
        config = CfbsfConfig.from_dict(json.loads(cfg_path.read_text()))
        if config.config_digest() != digest:
            raise IoFailure(f"{path}: config sidecar does not match cache header")
    if expected_config is not None:
        if expected_config.config_digest() != digest:
            raise IoFailure(f"{path}: cache was built with a different config")
        config = expected_config
    rows_path = _rows_sidecar(path)
    if not rows_path.exists():
        raise IoFailure(f"missing row sidecar {rows_path}")
    token_ids: list[str] = []
    n_chunks: list[int] = []
    unpadded: list[int] = []
    reader = csv.reader(io.StringIO(rows_path.read_text(encoding="utf-8")))
    header = next(reader, None)
    if header != ["row", "token_id", "n_chunks", "unpadded_len"]:
        raise IoFailure(f"{rows_path}: unexpected sidecar header {header}")
    for cells in reader:
        if not cells:
            continue
        token_ids.append(cells[1])
        n_chunks.append(int(cells[2]))
        unpadded.append(int(cells[3]))
    if len(token_ids) != values.shape[0]:
        raise IoFailure(
            f"{rows_path}: {len(token_ids)} rows for a matrix of {values.shape[0]}"
        )
    return FormMatrix(
        values=values.astype(np.float64),
        token_ids=tuple(token_ids),
        n_chunks=tuple(n_chunks),
        unpadded_lens=tuple(unpadded),
        config=config,
    )
