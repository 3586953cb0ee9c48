"""Corpus data model: word types, audio tokens, manifests, embeddings.

A corpus is a set of word types (distinct orthographic words with number and
lexeme identity) plus a set of audio tokens (individual recordings, each
pointing at one type). Manifests come in two interchangeable layouts:

* a directory holding ``types.csv`` and ``tokens.csv``
* a single CSV file with ``[types]`` and ``[tokens]`` section markers, each
  marker followed by an ordinary header+rows block

Type rows: ``type_id,orth,lexeme_id,number,phones,semantic_class`` where
number is SG or PL, phones is a space-separated symbol string (may be empty)
and semantic_class may be empty. Token rows:
``token_id,type_id,audio_path,start_s,end_s,sample_rate`` where the offsets
and rate may be empty (whole file, rate read from the file itself).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DanglingTypeReference,
    DimensionMismatch,
    DuplicateId,
    IoFailure,
    MalformedRow,
    UnparsableFloat,
)

log = logging.getLogger(__name__)

SINGULAR = "SG"
PLURAL = "PL"

_TYPE_COLUMNS = ("type_id", "orth", "lexeme_id", "number", "phones", "semantic_class")
_TOKEN_COLUMNS = ("token_id", "type_id", "audio_path", "start_s", "end_s", "sample_rate")


@dataclass(frozen=True)
class WordType:
    """One orthographic word form with its lexeme and number identity."""

    type_id: str
    orth: str
    lexeme_id: str
    number: str
    phones: tuple[str, ...] = ()
    semantic_class: str | None = None


@dataclass(frozen=True)
class AudioToken:
    """One recording of one word type.

    start_s/end_s delimit the word inside the file; both None means the whole
    file. sample_rate is the declared rate, None means trust the file header.
    """

    token_id: str
    type_id: str
    audio_path: str
    start_s: float | None = None
    end_s: float | None = None
    sample_rate: int | None = None


@dataclass
class Corpus:
    """Validated collection of types and tokens.

    base_dir is the directory audio paths are resolved against; it is set to
    the manifest's directory by load_manifest.
    """

    types: dict[str, WordType] = field(default_factory=dict)
    tokens: dict[str, AudioToken] = field(default_factory=dict)
    base_dir: Path | None = None

    def sorted_type_ids(self) -> list[str]:
        return sorted(self.types)

    def sorted_token_ids(self) -> list[str]:
        return sorted(self.tokens)

    def lexemes(self) -> dict[str, dict[str, WordType]]:
        """lexeme_id -> {number -> type} for all types."""
        out: dict[str, dict[str, WordType]] = {}
        for t in self.types.values():
            out.setdefault(t.lexeme_id, {})[t.number] = t
        return out

    def tokens_by_type(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for tok_id in self.sorted_token_ids():
            out.setdefault(self.tokens[tok_id].type_id, []).append(tok_id)
        return out

    def resolve_audio_path(self, token: AudioToken) -> Path:
        p = Path(token.audio_path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


def _parse_float_field(raw: str, line: int, what: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise UnparsableFloat(f"line {line}: {what} {raw!r}") from None
    if not np.isfinite(value):
        raise UnparsableFloat(f"line {line}: {what} {raw!r} is not finite")
    return value


def _make_type(row: dict[str, str], line: int) -> WordType:
    missing = [c for c in _TYPE_COLUMNS if row.get(c) is None]
    if missing:
        raise MalformedRow(f"type row missing column(s) {missing}", line)
    if not row["type_id"]:
        raise MalformedRow("empty type_id", line)
    if not row["orth"]:
        raise MalformedRow("empty orth", line)
    if not row["lexeme_id"]:
        raise MalformedRow("empty lexeme_id", line)
    if row["number"] not in (SINGULAR, PLURAL):
        raise MalformedRow(f"number must be SG or PL, got {row['number']!r}", line)
    phones = tuple(s for s in row["phones"].split(" ") if s)
    cls = row["semantic_class"] or None
    return WordType(
        type_id=row["type_id"],
        orth=row["orth"],
        lexeme_id=row["lexeme_id"],
        number=row["number"],
        phones=phones,
        semantic_class=cls,
    )


def _make_token(row: dict[str, str], line: int) -> AudioToken:
    missing = [c for c in _TOKEN_COLUMNS if row.get(c) is None]
    if missing:
        raise MalformedRow(f"token row missing column(s) {missing}", line)
    if not row["token_id"]:
        raise MalformedRow("empty token_id", line)
    if not row["type_id"]:
        raise MalformedRow("empty type_id", line)
    if not row["audio_path"]:
        raise MalformedRow("empty audio_path", line)
    start_raw, end_raw = row["start_s"], row["end_s"]
    if bool(start_raw) != bool(end_raw):
        raise MalformedRow("start_s and end_s must be given together", line)
    start = end = None
    if start_raw:
        start = _parse_float_field(start_raw, line, "start_s")
        end = _parse_float_field(end_raw, line, "end_s")
        if start < 0:
            raise MalformedRow(f"negative start_s {start}", line)
        if end <= start:
            raise MalformedRow(f"end_s {end} not after start_s {start}", line)
    rate = None
    if row["sample_rate"]:
        try:
            rate = int(row["sample_rate"])
        except ValueError:
            raise MalformedRow(f"bad sample_rate {row['sample_rate']!r}", line) from None
        if rate <= 0:
            raise MalformedRow(f"sample_rate must be positive, got {rate}", line)
    return AudioToken(
        token_id=row["token_id"],
        type_id=row["type_id"],
        audio_path=row["audio_path"],
        start_s=start,
        end_s=end,
        sample_rate=rate,
    )


def _check_lexeme_structure(types: dict[str, WordType]) -> None:
    seen: dict[tuple[str, str], str] = {}
    for type_id in sorted(types):
        t = types[type_id]
        key = (t.lexeme_id, t.number)
        if key in seen:
            raise MalformedRow(
                f"lexeme {t.lexeme_id} has two {t.number} types: "
                f"{seen[key]} and {type_id}"
            )
        seen[key] = type_id


def _parse_rows(kind: str, header: list[str], rows: list[tuple[int, list[str]]],
                corpus: Corpus) -> None:
    columns = _TYPE_COLUMNS if kind == "types" else _TOKEN_COLUMNS
    if [h.strip() for h in header] != list(columns):
        raise MalformedRow(f"{kind} header must be {','.join(columns)}")
    for line, cells in rows:
        if len(cells) != len(columns):
            raise MalformedRow(
                f"expected {len(columns)} fields, got {len(cells)}", line
            )
        row = dict(zip(columns, cells))
        if kind == "types":
            t = _make_type(row, line)
            if t.type_id in corpus.types:
                raise DuplicateId(f"duplicate type_id {t.type_id!r}")
            corpus.types[t.type_id] = t
        else:
            tok = _make_token(row, line)
            if tok.token_id in corpus.tokens:
                raise DuplicateId(f"duplicate token_id {tok.token_id!r}")
            corpus.tokens[tok.token_id] = tok


def _read_csv_rows(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header: list[str] | None = None
    rows: list[tuple[int, list[str]]] = []
    for line, cells in enumerate(reader, start=1):
        if not cells or (len(cells) == 1 and not cells[0].strip()):
            continue
        if header is None:
            header = cells
        else:
            rows.append((line, cells))
    if header is None:
        header = []
    return header, rows


def _load_two_file(directory: Path) -> Corpus:
    corpus = Corpus(base_dir=directory)
    types_path = directory / "types.csv"
    tokens_path = directory / "tokens.csv"
    if not types_path.exists():
        raise IoFailure(f"missing {types_path}")
    header, rows = _read_csv_rows(types_path)
    if header or rows:
        _parse_rows("types", header, rows, corpus)
    if tokens_path.exists():
        header, rows = _read_csv_rows(tokens_path)
        if header or rows:
            _parse_rows("tokens", header, rows, corpus)
    return corpus


def _load_single_file(path: Path) -> Corpus:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    corpus = Corpus(base_dir=path.parent)
    section: str | None = None
    pending: list[str] = []
    pending_lines: list[int] = []

    def flush() -> None:
        if section is None:
            return
        reader = csv.reader(pending)
        parsed = [cells for cells in reader]
        if not parsed:
            return
        header = parsed[0]
        rows = list(zip(pending_lines[1:], parsed[1:]))
        _parse_rows(section, header, rows, corpus)

    for line, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped in ("[types]", "[tokens]"):
            flush()
            section = stripped[1:-1]
            pending = []
            pending_lines = []
            continue
        if not stripped:
            continue
        if section is None:
            raise MalformedRow("content before [types]/[tokens] marker", line)
        pending.append(raw)
        pending_lines.append(line)
    flush()
    return corpus


def load_manifest(path: str | Path) -> Corpus:
    """Read a manifest from either layout and validate it.

    Raises MalformedRow, DuplicateId, or DanglingTypeReference on schema or
    referential problems, IoFailure when files cannot be read.
    """
    path = Path(path)
    if path.is_dir():
        corpus = _load_two_file(path)
    elif path.exists():
        corpus = _load_single_file(path)
    else:
        raise IoFailure(f"no manifest at {path}")
    _check_lexeme_structure(corpus.types)
    for token_id in corpus.sorted_token_ids():
        tok = corpus.tokens[token_id]
        if tok.type_id not in corpus.types:
            raise DanglingTypeReference(
                f"token {token_id} references unknown type {tok.type_id!r}"
            )
    return corpus


def _format_float(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _type_row(t: WordType) -> list[str]:
    return [t.type_id, t.orth, t.lexeme_id, t.number,
            " ".join(t.phones), t.semantic_class or ""]


def _token_row(tok: AudioToken) -> list[str]:
    return [tok.token_id, tok.type_id, tok.audio_path,
            _format_float(tok.start_s), _format_float(tok.end_s),
            "" if tok.sample_rate is None else str(tok.sample_rate)]


def _csv_block(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_manifest(corpus: Corpus, path: str | Path, single_file: bool = False) -> None:
    """Write a manifest; directory layout unless single_file is set.

    Rows are emitted in sorted id order so identical corpora produce
    byte-identical files.
    """
    path = Path(path)
    type_rows = [_type_row(corpus.types[i]) for i in corpus.sorted_type_ids()]
    token_rows = [_token_row(corpus.tokens[i]) for i in corpus.sorted_token_ids()]
    types_block = _csv_block(_TYPE_COLUMNS, type_rows)
    tokens_block = _csv_block(_TOKEN_COLUMNS, token_rows)
    try:
        if single_file:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(
                "[types]\n" + types_block + "[tokens]\n" + tokens_block,
                encoding="utf-8",
            )
        else:
            path.mkdir(parents=True, exist_ok=True)
            (path / "types.csv").write_text(types_block, encoding="utf-8")
            (path / "tokens.csv").write_text(tokens_block, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest at {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# embeddings

@dataclass
class EmbeddingTable:
    """Word-keyed embedding vectors of a single dimensionality."""

    vectors: dict[str, np.ndarray]
    dim: int
    n_skipped: int = 0


def load_embeddings(path: str | Path, expected_dim: int | None = None,
                    lexicon: set[str] | None = None) -> EmbeddingTable:
    """Read a text embedding table: one word plus floats per line.

    An optional first line of two integers (count and dimensionality) is
    accepted and checked. Words outside lexicon are skipped and counted.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    vectors: dict[str, np.ndarray] = {}
    dim = expected_dim
    declared: tuple[int, int] | None = None
    n_skipped = 0
    for line, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split()
        if line == 1 and len(parts) == 2:
            try:
                declared = (int(parts[0]), int(parts[1]))
            except ValueError:
                declared = None
            if declared is not None:
                if expected_dim is not None and declared[1] != expected_dim:
                    raise DimensionMismatch(
                        f"header declares dim {declared[1]}, expected {expected_dim}"
                    )
                dim = declared[1]
                continue
        word, fields = parts[0], parts[1:]
        if not fields:
            raise MalformedRow("embedding row with no values", line)
        if lexicon is not None and word not in lexicon:
            n_skipped += 1
            continue
        if word in vectors:
            raise DuplicateId(f"duplicate embedding for {word!r}")
        values = np.empty(len(fields))
        for i, f in enumerate(fields):
            values[i] = _parse_float_field(f, line, f"component {i} of {word!r}")
        if dim is None:
            dim = values.size
        elif values.size != dim:
            raise DimensionMismatch(
                f"line {line}: {word!r} has {values.size} components, expected {dim}"
            )
        values.flags.writeable = False
        vectors[word] = values
    if declared is not None and lexicon is None and len(vectors) != declared[0]:
        log.warning("embedding header declared %d rows, read %d",
                    declared[0], len(vectors))
    if dim is None:
        dim = 0
    if n_skipped:
        log.info("skipped %d embedding rows outside the lexicon", n_skipped)
    return EmbeddingTable(vectors=vectors, dim=dim, n_skipped=n_skipped)


def write_embeddings(vectors: dict[str, np.ndarray], path: str | Path,
                     header: bool = True) -> None:
    words = sorted(vectors)
    lines = []
    if header and words:
        lines.append(f"{len(words)} {vectors[words[0]].size}")
    for w in words:
        lines.append(w + " " + " ".join(repr(float(x)) for x in vectors[w]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def embeddings_by_type(corpus: Corpus, table: EmbeddingTable) -> dict[str, np.ndarray]:
    """type_id -> vector for every type whose orth has an embedding.

    Types sharing an orth share the same array object, so identity (not just
    equality) of singular rows across derived spaces is preserved.
    """
    out: dict[str, np.ndarray] = {}
    for type_id in corpus.sorted_type_ids():
        vec = table.vectors.get(corpus.types[type_id].orth)
        if vec is not None:
            out[type_id] = vec
    return out


# ---------------------------------------------------------------------------
# lexeme pairing

@dataclass(frozen=True)
class LexemeGroups:
    """Partition of types by number and partner availability."""

    sg_with_pl: tuple[str, ...]
    sg_without_pl: tuple[str, ...]
    pl_with_sg: tuple[str, ...]
    pl_without_sg: tuple[str, ...]

    def group_of(self, type_id: str) -> str | None:
        for name in ("sg_with_pl", "sg_without_pl", "pl_with_sg", "pl_without_sg"):
            if type_id in getattr(self, name):
                return name
        return None

    def counts(self) -> dict[str, int]:
        return {
            "sg_with_pl": len(self.sg_with_pl),
            "sg_without_pl": len(self.sg_without_pl),
            "pl_with_sg": len(self.pl_with_sg),
            "pl_without_sg": len(self.pl_without_sg),
        }


def pair_lexemes(types: dict[str, WordType] | list[WordType],
                 reference: set[str] | None = None) -> LexemeGroups:
    """Classify types by whether their opposite-number partner is available.

    reference is the inventory partners are looked up in (think training-fold
    types); by default the classified types themselves. The four groups are
    disjoint and exhaust the input.
    """
    if isinstance(types, dict):
        type_list = [types[i] for i in sorted(types)]
    else:
        type_list = sorted(types, key=lambda t: t.type_id)
    if reference is None:
        ref_types = type_list
    else:
        ref_types = [t for t in type_list if t.type_id in reference]
    ref_numbers: dict[str, set[str]] = {}
    for t in ref_types:
        ref_numbers.setdefault(t.lexeme_id, set()).add(t.number)
    groups: dict[str, list[str]] = {
        "sg_with_pl": [], "sg_without_pl": [], "pl_with_sg": [], "pl_without_sg": []
    }
    for t in type_list:
        partner = PLURAL if t.number == SINGULAR else SINGULAR
        has = partner in ref_numbers.get(t.lexeme_id, set())
        if t.number == SINGULAR:
            groups["sg_with_pl" if has else "sg_without_pl"].append(t.type_id)
        else:
            groups["pl_with_sg" if has else "pl_without_sg"].append(t.type_id)
    return LexemeGroups(
        sg_with_pl=tuple(groups["sg_with_pl"]),
        sg_without_pl=tuple(groups["sg_without_pl"]),
        pl_with_sg=tuple(groups["pl_with_sg"]),
        pl_without_sg=tuple(groups["pl_without_sg"]),
    )
