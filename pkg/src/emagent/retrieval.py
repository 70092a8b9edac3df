"""Exact cosine top-k search over a chunk vector index.

The index is a flat in-memory store scored by brute force: desk-scale
corpora do not need approximate search, and exact scoring keeps the ranking
checkable against an independent oracle. Many readers may search
concurrently; writes take the lock and searches score a consistent snapshot.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass

from .corpus import Chunk, normalize_entities
from .errors import (
    DimensionMismatch,
    DuplicateChunkId,
    InvalidParams,
    IoError,
    SchemaError,
    ZeroVector,
)
from .providers import EmbeddingVector, ProviderConfig, embed_text

DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    vector: EmbeddingVector
    chunk: Chunk

    def __post_init__(self):
        if not self.vector.normalized:
            raise ValueError(f"index entry {self.chunk_id!r} requires a normalized vector")
        if self.chunk_id != self.chunk.chunk_id:
            raise ValueError("entry chunk_id must match its chunk")


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    score: float
    chunk: Chunk


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dims != b.dims:
        raise DimensionMismatch(f"dims {a.dims} vs {b.dims}")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    if a.normalized and b.normalized:
        return dot
    norm_a = math.sqrt(sum(x * x for x in a.values))
    norm_b = math.sqrt(sum(y * y for y in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity undefined for zero-norm vectors")
    return dot / (norm_a * norm_b)


class VectorIndex:
    """chunk_id -> (vector, chunk) store with exact top-k search."""

    def __init__(self):
        self._entries: dict[str, IndexEntry] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, entry: IndexEntry) -> None:
        with self._lock:
            if entry.chunk_id in self._entries:
                raise DuplicateChunkId(entry.chunk_id)
            self._entries[entry.chunk_id] = entry

    def add_chunks(self, chunks: list[Chunk], provider: ProviderConfig) -> None:
        for chunk in chunks:
            self.add(IndexEntry(
                chunk_id=chunk.chunk_id,
                vector=embed_text(chunk.index_text, provider),
                chunk=chunk,
            ))

    def snapshot(self) -> list[IndexEntry]:
        with self._lock:
            return list(self._entries.values())

    def search_top_k(self, query_text: str, k: int,
                     provider: ProviderConfig) -> list[ScoredChunk]:
        """Top-k entries by cosine score, descending; ties by chunk_id ascending."""
        if k < 1:
            raise InvalidParams(f"k must be >= 1, got {k}")
        query_vec = embed_text(normalize_entities(query_text), provider)
        scored = [
            ScoredChunk(
                chunk_id=entry.chunk_id,
                score=cosine_similarity(query_vec, entry.vector),
                chunk=entry.chunk,
            )
            for entry in self.snapshot()
        ]
        scored.sort(key=lambda s: (-s.score, s.chunk_id))
        return scored[:k]

    # --- persistence: JSON Lines of (chunk_id, dims, values, doc_id, seq) ---

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in sorted(self.snapshot(), key=lambda e: e.chunk_id):
                fh.write(json.dumps({
                    "chunk_id": entry.chunk_id,
                    "dims": entry.vector.dims,
                    "values": list(entry.vector.values),
                    "doc_id": entry.chunk.doc_id,
                    "seq": entry.chunk.seq,
                }, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path, chunks: list[Chunk]) -> "VectorIndex":
        """Rebuild an index from a saved vector file plus the re-chunked corpus.

        The file stores only vectors and provenance; chunk text comes from
        ``chunks`` (chunking is deterministic, so ids line up).
        """
        by_id = {chunk.chunk_id: chunk for chunk in chunks}
        index = cls()
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise IoError(f"cannot read index file {path}: {exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                vector = EmbeddingVector(
                    dims=int(raw["dims"]),
                    values=tuple(float(v) for v in raw["values"]),
                    normalized=True,
                )
                chunk_id = raw["chunk_id"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"line {lineno}: bad index entry: {exc}", line=lineno) from exc
            chunk = by_id.get(chunk_id)
            if chunk is None:
                raise SchemaError(
                    f"line {lineno}: chunk {chunk_id!r} not present in the corpus",
                    line=lineno,
                )
            index.add(IndexEntry(chunk_id=chunk_id, vector=vector, chunk=chunk))
        return index


def build_index(chunks: list[Chunk], provider: ProviderConfig) -> VectorIndex:
    index = VectorIndex()
    index.add_chunks(chunks, provider)
    return index
