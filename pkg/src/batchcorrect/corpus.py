"""Corpus data model and on-disk formats.

A corpus is a line-delimited UTF-8 file of word records plus two optional
sidecars: ``<path>.emb`` holding the embedding matrix in a little-endian
binary layout, and ``<path>.meta.json`` holding free-form metadata. The text
file stays diff-friendly and streamable; the matrix stays memory-mappable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

EMBEDDING_MAGIC = b"BFEM"
EMBEDDING_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, count


class CorpusError(Exception):
    """Raised for malformed corpus or embedding files."""


@dataclass(frozen=True)
class WordInstance:
    """One segmented word image's record.

    ``prediction`` is the OCR output and may be empty; ``ground_truth`` is
    None when the instance is unannotated, never an empty string.
    """

    id: str
    book_id: str
    page_id: int
    prediction: str
    ground_truth: str | None = None
    image_ref: str | None = None
    embedding_row: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValueError("instance id must be non-empty")
        if self.page_id < 0:
            raise ValueError(f"instance {self.id!r}: page must be >= 0")
        if self.ground_truth is not None and not self.ground_truth.strip():
            raise ValueError(f"instance {self.id!r}: ground_truth must be non-empty or null")
        if self.embedding_row < 0:
            raise ValueError(f"instance {self.id!r}: embedding_row must be >= 0")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense count x dim matrix of float32 word-image features."""

    dim: int
    count: int
    data: np.ndarray

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dim must be positive")
        if self.data.shape != (self.count, self.dim):
            raise ValueError(
                f"embedding data shape {self.data.shape} does not match "
                f"count={self.count}, dim={self.dim}"
            )
        if self.data.dtype != np.float32:
            raise ValueError("embedding data must be float32")
        bad = ~np.isfinite(self.data)
        if bad.any():
            row = int(np.argwhere(bad)[0][0])
            raise CorpusError(f"non-finite embedding value at row {row}")
        self.data.flags.writeable = False

    @classmethod
    def from_array(cls, data: np.ndarray) -> "EmbeddingMatrix":
        arr = np.ascontiguousarray(data, dtype=np.float32)
        return cls(dim=arr.shape[1], count=arr.shape[0], data=arr)


@dataclass
class Corpus:
    """An ordered collection of word instances with optional embeddings."""

    instances: list[WordInstance]
    embeddings: EmbeddingMatrix | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for inst in self.instances:
            if inst.id in seen:
                raise CorpusError(f"duplicate instance id {inst.id!r}")
            seen.add(inst.id)
        if self.embeddings is not None:
            if self.embeddings.count != len(self.instances):
                raise CorpusError(
                    f"embedding count {self.embeddings.count} does not match "
                    f"{len(self.instances)} instances"
                )
            for pos, inst in enumerate(self.instances):
                if inst.embedding_row != pos:
                    raise CorpusError(
                        f"instance {inst.id!r} at position {pos} has embedding_row "
                        f"{inst.embedding_row}"
                    )

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def fully_annotated(self) -> bool:
        return all(inst.ground_truth is not None for inst in self.instances)

    def index_of(self, instance_id: str) -> int:
        try:
            return self._id_index[instance_id]
        except AttributeError:
            self._id_index = {inst.id: i for i, inst in enumerate(self.instances)}
            return self._id_index[instance_id]


def embeddings_path_for(path: str | Path) -> Path:
    return Path(str(path) + ".emb")


def metadata_path_for(path: str | Path) -> Path:
    return Path(str(path) + ".meta.json")


_REQUIRED_KEYS = ("id", "book", "page", "prediction", "ground_truth", "image")


def _instance_from_record(record: dict, row: int, where: str) -> WordInstance:
    for key in _REQUIRED_KEYS:
        if key not in record:
            raise CorpusError(f"{where}: missing field {key!r}")
    try:
        return WordInstance(
            id=record["id"],
            book_id=record["book"],
            page_id=record["page"],
            prediction=record["prediction"],
            ground_truth=record["ground_truth"],
            image_ref=record["image"],
            embedding_row=row,
        )
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"{where}: {exc}") from exc


def load_corpus(path: str | Path) -> Corpus:
    """Load a corpus file, attaching the ``.emb`` sidecar when present.

    Instances keep file order and embedding_row is the zero-based line index.
    Errors carry the offending line number.
    """
    path = Path(path)
    instances: list[WordInstance] = []
    ids: dict[str, int] = {}
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                text = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid UTF-8") from exc
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed record: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}:{lineno}: record is not an object")
            inst = _instance_from_record(record, len(instances), f"{path}:{lineno}")
            if inst.id in ids:
                raise CorpusError(
                    f"{path}:{lineno}: duplicate id {inst.id!r} "
                    f"(first seen on line {ids[inst.id]})"
                )
            ids[inst.id] = lineno
            instances.append(inst)

    embeddings = None
    sidecar = embeddings_path_for(path)
    if sidecar.exists():
        embeddings = load_embeddings(sidecar, expected_count=len(instances))

    metadata: dict[str, str] = {}
    meta_path = metadata_path_for(path)
    if meta_path.exists():
        with open(meta_path, encoding="utf-8") as fh:
            metadata = json.load(fh)

    return Corpus(instances=instances, embeddings=embeddings, metadata=metadata)


def write_corpus(corpus: Corpus, path: str | Path, extra_fields=None) -> None:
    """Write a corpus file; embeddings and metadata go to sidecars.

    ``extra_fields`` maps instance position to a dict of additional keys
    (used for the ``source`` column of corrected corpora).
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(corpus_to_text(corpus, extra_fields))
    if corpus.embeddings is not None:
        write_embeddings(corpus.embeddings, embeddings_path_for(path))
    if corpus.metadata:
        with open(metadata_path_for(path), "w", encoding="utf-8") as fh:
            json.dump(corpus.metadata, fh, ensure_ascii=False, sort_keys=True)
            fh.write("\n")


def corpus_to_text(corpus: Corpus, extra_fields=None) -> str:
    lines = []
    for pos, inst in enumerate(corpus.instances):
        record = {
            "id": inst.id,
            "book": inst.book_id,
            "page": inst.page_id,
            "prediction": inst.prediction,
            "ground_truth": inst.ground_truth,
            "image": inst.image_ref,
        }
        if extra_fields and pos in extra_fields:
            record.update(extra_fields[pos])
        lines.append(json.dumps(record, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def load_embeddings(path: str | Path, expected_count: int) -> EmbeddingMatrix:
    """Read a BFEM embedding file and validate it against expected_count."""
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise CorpusError(f"{path}: truncated header")
        magic, version, dim, count = _HEADER.unpack(header)
        if magic != EMBEDDING_MAGIC:
            raise CorpusError(f"{path}: bad magic {magic!r}")
        if version != EMBEDDING_VERSION:
            raise CorpusError(f"{path}: unsupported version {version}")
        if dim == 0:
            raise CorpusError(f"{path}: dim must be positive")
        if count != expected_count:
            raise CorpusError(f"{path}: header count {count} != expected {expected_count}")
        payload = fh.read()
    expected_bytes = count * dim * 4
    if len(payload) < expected_bytes:
        raise CorpusError(
            f"{path}: truncated payload ({len(payload)} bytes, expected {expected_bytes})"
        )
    if len(payload) > expected_bytes:
        raise CorpusError(f"{path}: {len(payload) - expected_bytes} trailing bytes")
    data = np.frombuffer(payload, dtype="<f4").reshape(count, dim).astype(np.float32)
    return EmbeddingMatrix(dim=dim, count=count, data=data)


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMBEDDING_MAGIC, EMBEDDING_VERSION, matrix.dim, matrix.count))
        fh.write(np.ascontiguousarray(matrix.data, dtype="<f4").tobytes())


def concat_corpora(first: Corpus, second: Corpus, metadata: dict[str, str] | None = None) -> Corpus:
    """Concatenate two corpora, re-assigning embedding rows.

    Both or neither must carry embeddings; ids must not collide.
    """
    if (first.embeddings is None) != (second.embeddings is None):
        raise CorpusError("cannot concatenate: embeddings present on only one side")
    instances = [
        inst if inst.embedding_row == i else replace(inst, embedding_row=i)
        for i, inst in enumerate(list(first.instances) + list(second.instances))
    ]
    embeddings = None
    if first.embeddings is not None:
        embeddings = EmbeddingMatrix.from_array(
            np.vstack([first.embeddings.data, second.embeddings.data])
        )
    return Corpus(instances=instances, embeddings=embeddings, metadata=dict(metadata or {}))
