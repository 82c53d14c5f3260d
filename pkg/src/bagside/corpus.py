"""Bag-structured corpus: EMB1 matrices, vocab files, JSONL bag records, batching.

Everything here is parse-and-validate; a loaded ``BagDataset`` is immutable
and safe to share across threads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadEmbRowError,
    BadMagicError,
    DuplicateNameError,
    EmptyBagError,
    InvalidMatrixError,
    MalformedRecordError,
    MissingNullError,
    NonFiniteError,
    TruncatedError,
    UnknownAliasError,
    UnknownRelationError,
    UnknownTypeError,
    ValidationError,
)

EMB_MAGIC = b"EMB1"
_EMB_HEADER = struct.Struct("<4sII")

NA_RELATION = "NA"
NO_TYPE = "NO_TYPE"
NO_ALIAS = "NO_ALIAS"

RELATIONS_FILE = "relations.txt"
TYPES_FILE = "types.txt"
ALIASES_FILE = "aliases.txt"


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense rows x dim table of 32-bit feature vectors."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise InvalidMatrixError(f"expected a 2-d matrix, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidMatrixError(f"degenerate shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("embedding matrix contains NaN or Inf")
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Vocab:
    """Name<->id maps for relations, entity types, and relation aliases.

    Line order defines ids; id 0 is reserved for the null name of each
    namespace (NA / NO_TYPE / NO_ALIAS).
    """

    relations: tuple[str, ...]
    types: tuple[str, ...]
    aliases: tuple[str, ...]
    relation_ids: dict = field(init=False, repr=False, compare=False)
    type_ids: dict = field(init=False, repr=False, compare=False)
    alias_ids: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "relation_ids", {n: i for i, n in enumerate(self.relations)})
        object.__setattr__(self, "type_ids", {n: i for i, n in enumerate(self.types)})
        object.__setattr__(self, "alias_ids", {n: i for i, n in enumerate(self.aliases)})


@dataclass(frozen=True)
class SentenceRec:
    """One sentence of a bag: embedding row plus matched alias ids."""

    emb_row: int
    alias_ids: tuple[int, ...] = ()
    text: str | None = None


@dataclass(frozen=True)
class Bag:
    """One entity pair with its gold relation and member sentences."""

    sub: str
    obj: str
    rel: int
    sub_types: tuple[int, ...]
    obj_types: tuple[int, ...]
    sentences: tuple[SentenceRec, ...]

    def __post_init__(self):
        if len(self.sentences) == 0:
            raise EmptyBagError(f"bag ({self.sub!r}, {self.obj!r}) has no sentences")
        if len(self.sub_types) == 0 or len(self.obj_types) == 0:
            raise MalformedRecordError(
                f"bag ({self.sub!r}, {self.obj!r}) has an empty type list after normalization"
            )


@dataclass(frozen=True)
class BagDataset:
    bags: tuple[Bag, ...]
    embeddings: EmbeddingMatrix
    vocab: Vocab

    def __len__(self) -> int:
        return len(self.bags)

    @property
    def n_relations(self) -> int:
        return len(self.vocab.relations)

    @property
    def sentence_count(self) -> int:
        return sum(len(b.sentences) for b in self.bags)


def parse_embedding_file(raw: bytes) -> EmbeddingMatrix:
    """Decode an EMB1 byte sequence into a matrix, bit-exactly."""
    if raw[:4] != EMB_MAGIC:
        raise BadMagicError(f"expected magic {EMB_MAGIC!r}, got {bytes(raw[:4])!r}")
    if len(raw) < _EMB_HEADER.size:
        raise TruncatedError(f"header needs {_EMB_HEADER.size} bytes, file has {len(raw)}")
    _, rows, dim = _EMB_HEADER.unpack_from(raw, 0)
    if rows < 1 or dim < 1:
        raise InvalidMatrixError(f"header declares degenerate shape {rows}x{dim}")
    need = rows * dim * 4
    have = len(raw) - _EMB_HEADER.size
    if have < need:
        raise TruncatedError(f"payload needs {need} bytes, file has {have}")
    if have > need:
        raise InvalidMatrixError(f"{have - need} trailing bytes after {rows}x{dim} payload")
    values = np.frombuffer(raw, dtype="<f4", count=rows * dim, offset=_EMB_HEADER.size)
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("embedding payload contains NaN or Inf")
    return EmbeddingMatrix(values.reshape(rows, dim).copy())


def write_embedding_file(m: EmbeddingMatrix) -> bytes:
    """Inverse of :func:`parse_embedding_file`."""
    header = _EMB_HEADER.pack(EMB_MAGIC, m.rows, m.dim)
    return header + np.ascontiguousarray(m.data, dtype="<f4").tobytes()


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e}") from e


def load_embedding_file(path: str | Path) -> EmbeddingMatrix:
    return parse_embedding_file(_read_bytes(Path(path)))


def save_embedding_file(path: str | Path, m: EmbeddingMatrix) -> None:
    Path(path).write_bytes(write_embedding_file(m))


def _parse_names(text: str, null_name: str, label: str) -> tuple[str, ...]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    names = [line.rstrip("\r") for line in lines]
    if not names or names[0] != null_name:
        got = names[0] if names else "<empty file>"
        raise MissingNullError(f"{label} line 0 must be {null_name!r}, got {got!r}")
    seen = set()
    for i, name in enumerate(names):
        if name == "":
            raise MalformedRecordError(f"{label} line {i} is empty")
        if name in seen:
            raise DuplicateNameError(f"{label} name {name!r} appears more than once")
        seen.add(name)
    return tuple(names)


def load_vocab(relations_text: str, types_text: str, aliases_text: str) -> Vocab:
    """Build a Vocab from the three newline-separated name files."""
    return Vocab(
        relations=_parse_names(relations_text, NA_RELATION, "relations"),
        types=_parse_names(types_text, NO_TYPE, "types"),
        aliases=_parse_names(aliases_text, NO_ALIAS, "aliases"),
    )


def load_vocab_dir(path: str | Path) -> Vocab:
    """Load relations.txt / types.txt / aliases.txt from a directory."""
    d = Path(path)
    return load_vocab(
        _read_bytes(d / RELATIONS_FILE).decode("utf-8"),
        _read_bytes(d / TYPES_FILE).decode("utf-8"),
        _read_bytes(d / ALIASES_FILE).decode("utf-8"),
    )


def _resolve_id(value, names: Sequence[str], ids: dict, err, what: str, line: int) -> int:
    if isinstance(value, bool):
        raise MalformedRecordError(f"line {line}: boolean is not a valid {what}")
    if isinstance(value, int):
        if not 0 <= value < len(names):
            raise err(f"line {line}: {what} id {value} outside 0..{len(names) - 1}")
        return value
    if isinstance(value, str):
        if value not in ids:
            raise err(f"line {line}: unknown {what} {value!r}")
        return ids[value]
    raise MalformedRecordError(f"line {line}: {what} must be a name or id, got {type(value).__name__}")


def _parse_sentence(item, vocab: Vocab, emb: EmbeddingMatrix, line: int) -> SentenceRec:
    if not isinstance(item, dict):
        raise MalformedRecordError(f"line {line}: sentence entry must be an object")
    if "emb" not in item:
        raise MalformedRecordError(f"line {line}: sentence is missing 'emb'")
    row = item["emb"]
    if isinstance(row, bool) or not isinstance(row, int):
        raise MalformedRecordError(f"line {line}: 'emb' must be an integer row index")
    if not 0 <= row < emb.rows:
        raise BadEmbRowError(f"line {line}: emb row {row} outside 0..{emb.rows - 1}")
    raw_aliases = item.get("aliases", [])
    if not isinstance(raw_aliases, list):
        raise MalformedRecordError(f"line {line}: 'aliases' must be an array")
    aliases = tuple(
        _resolve_id(a, vocab.aliases, vocab.alias_ids, UnknownAliasError, "alias", line)
        for a in raw_aliases
    )
    text = item.get("text")
    if text is not None and not isinstance(text, str):
        raise MalformedRecordError(f"line {line}: 'text' must be a string")
    return SentenceRec(emb_row=row, alias_ids=aliases, text=text)


def _parse_types(value, vocab: Vocab, key: str, line: int) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise MalformedRecordError(f"line {line}: {key!r} must be an array")
    ids = tuple(
        _resolve_id(t, vocab.types, vocab.type_ids, UnknownTypeError, "type", line)
        for t in value
    )
    # partial KB coverage: an absent type annotation becomes the NO_TYPE row
    return ids if ids else (0,)


def load_bags(lines: Iterable[str], vocab: Vocab, emb: EmbeddingMatrix) -> BagDataset:
    """Parse and validate JSONL bag records; record order is preserved."""
    bags = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRecordError(f"line {line_no}: invalid JSON ({e.msg})") from e
        if not isinstance(rec, dict):
            raise MalformedRecordError(f"line {line_no}: record must be an object")
        for key in ("sub", "obj", "rel", "sentences"):
            if key not in rec:
                raise MalformedRecordError(f"line {line_no}: missing key {key!r}")
        sub, obj = rec["sub"], rec["obj"]
        if not isinstance(sub, str) or not isinstance(obj, str):
            raise MalformedRecordError(f"line {line_no}: 'sub' and 'obj' must be strings")
        rel = _resolve_id(rec["rel"], vocab.relations, vocab.relation_ids,
                          UnknownRelationError, "relation", line_no)
        sub_types = _parse_types(rec.get("sub_types", []), vocab, "sub_types", line_no)
        obj_types = _parse_types(rec.get("obj_types", []), vocab, "obj_types", line_no)
        raw_sentences = rec["sentences"]
        if not isinstance(raw_sentences, list):
            raise MalformedRecordError(f"line {line_no}: 'sentences' must be an array")
        if len(raw_sentences) == 0:
            raise EmptyBagError(f"line {line_no}: bag has no sentences")
        sentences = tuple(_parse_sentence(s, vocab, emb, line_no) for s in raw_sentences)
        bags.append(Bag(sub=sub, obj=obj, rel=rel, sub_types=sub_types,
                        obj_types=obj_types, sentences=sentences))
    if not bags:
        raise MalformedRecordError("bags file contains no records")
    return BagDataset(bags=tuple(bags), embeddings=emb, vocab=vocab)


def load_bags_file(path: str | Path, vocab: Vocab, emb: EmbeddingMatrix) -> BagDataset:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e}") from e
    with fh:
        return load_bags(fh, vocab, emb)


def batches(dataset: BagDataset, batch_size: int, seed: int) -> list[list[int]]:
    """Seeded permutation of bag ids, chunked into batch_size pieces."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    perm = np.random.default_rng(seed).permutation(len(dataset.bags))
    return [
        [int(i) for i in perm[start:start + batch_size]]
        for start in range(0, len(perm), batch_size)
    ]
