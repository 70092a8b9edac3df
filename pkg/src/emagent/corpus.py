"""Document ingestion, entity normalization, and token-bounded chunking.

Documents arrive as plain text plus metadata (JSON Lines, one record per
line). Bodies are normalized (subscript digits, canonical species casing)
and split into chunks of at most ``max_tokens`` tokens, preferring to cut
at sentence boundaries.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import InvalidDocument, InvalidParams, IoError, SchemaError

DOC_TYPES = ("journal_article", "report", "book", "standard", "guideline")
LANGUAGES = ("zh", "en", "mixed")

# Canonical casing for every pollutant species the package understands.
SPECIES_REGISTRY = (
    "CO2", "CH4", "SO2", "NOx", "N2O", "NH3",
    "PM2.5", "PM10", "CO", "VOC", "O3", "BC", "OC",
)

SENTENCE_TERMINATORS = frozenset(".!?。！？")  # . ! ? 。 ！ ？

# How far back from a window boundary we look for a sentence terminator.
SENTENCE_LOOKBACK = 50

_SUBSCRIPT_DIGITS = str.maketrans("₀₁₂₃₄₅₆₇₈₉",
                                  "0123456789")

# Longest species first so e.g. "PM2.5" is not half-matched via "PM10"'s family.
_SPECIES_RE = re.compile(
    "|".join(
        r"\b" + re.escape(name) + r"\b"
        for name in sorted(SPECIES_REGISTRY, key=len, reverse=True)
    ),
    re.IGNORECASE,
)
_SPECIES_CANONICAL = {name.lower(): name for name in SPECIES_REGISTRY}


def normalize_entities(text: str) -> str:
    """Map subscript digits to ASCII and rewrite known species to canonical casing.

    Idempotent; everything outside the species registry passes through unchanged.
    """
    text = text.translate(_SUBSCRIPT_DIGITS)
    return _SPECIES_RE.sub(lambda m: _SPECIES_CANONICAL[m.group(0).lower()], text)


def tokenize(text: str) -> list[str]:
    """Split text into tokens.

    A token is a maximal run of Unicode letters/digits (subscript digits
    included), or any single other non-whitespace character. Whitespace only
    separates.
    """
    return [tok for tok, _, _ in tokenize_with_spans(text)]


def tokenize_with_spans(text: str) -> list[tuple[str, int, int]]:
    """tokenize(), but each token carries its (start, end) slice in the input."""
    out: list[tuple[str, int, int]] = []
    start = -1
    for i, ch in enumerate(text):
        if ch.isspace():
            if start >= 0:
                out.append((text[start:i], start, i))
                start = -1
        elif ch.isalnum():
            if start < 0:
                start = i
        else:
            if start >= 0:
                out.append((text[start:i], start, i))
                start = -1
            out.append((ch, i, i + 1))
    if start >= 0:
        out.append((text[start:], start, len(text)))
    return out


@dataclass(frozen=True)
class DocumentRecord:
    """One source document: plain-text body plus bibliographic metadata."""

    doc_id: str
    doc_type: str
    title: str
    body: str
    year: int | None = None
    region: str | None = None
    institution: str | None = None
    language: str = "en"

    def __post_init__(self):
        if not self.doc_id:
            raise InvalidDocument("doc_id must be non-empty")
        if self.doc_type not in DOC_TYPES:
            raise InvalidDocument(f"unknown doc_type {self.doc_type!r}")
        if self.language not in LANGUAGES:
            raise InvalidDocument(f"unknown language {self.language!r}")
        if not self.body or not self.body.strip():
            raise InvalidDocument(f"document {self.doc_id!r} has an empty body")


@dataclass(frozen=True)
class Chunk:
    """A retrieval unit: at most ``max_tokens`` tokens of one document.

    ``display_text`` is the original slice; ``index_text`` is the normalized
    form used for embedding. ``chunk_id`` is ``doc_id + "#" + seq``.
    """

    chunk_id: str
    doc_id: str
    seq: int
    display_text: str
    index_text: str
    token_count: int


def chunk_document(doc: DocumentRecord, max_tokens: int = 256,
                   overlap: int = 0) -> list[Chunk]:
    """Greedily segment a document's token stream into chunks.

    When a window boundary would split a sentence and a terminator exists in
    the window's trailing SENTENCE_LOOKBACK tokens, the cut moves to just
    after that terminator. Cuts only land where the source text has
    whitespace, so with overlap=0 the whitespace-collapsed display_texts
    concatenate back to the whitespace-collapsed body (a terminator glued
    inside a token run, like the dot of "PM2.5", is never a cut point).
    """
    if max_tokens < 16:
        raise InvalidParams(f"max_tokens must be >= 16, got {max_tokens}")
    if overlap < 0 or overlap >= max_tokens:
        raise InvalidParams(f"overlap must satisfy 0 <= overlap < max_tokens, got {overlap}")

    spans = tokenize_with_spans(doc.body)
    n = len(spans)

    def cuttable(i: int) -> bool:
        # a cut before token i is safe when whitespace separates it from i-1
        return i >= n or spans[i][1] > spans[i - 1][2]

    chunks: list[Chunk] = []
    start = 0
    while start < n:
        end = min(start + max_tokens, n)
        if end < n:
            lookback_from = max(start, end - SENTENCE_LOOKBACK)
            for t in range(end - 1, lookback_from - 1, -1):
                if spans[t][0] in SENTENCE_TERMINATORS and cuttable(t + 1):
                    end = t + 1
                    break
            else:
                # back off to the nearest word boundary; a single run longer
                # than max_tokens is split at the cap regardless
                window_end = end
                while end > start and not cuttable(end):
                    end -= 1
                if end == start:
                    end = window_end
        display = doc.body[spans[start][1]:spans[end - 1][2]]
        index_text = normalize_entities(display)
        seq = len(chunks)
        chunks.append(Chunk(
            chunk_id=f"{doc.doc_id}#{seq}",
            doc_id=doc.doc_id,
            seq=seq,
            display_text=display,
            index_text=index_text,
            token_count=len(tokenize(index_text)),
        ))
        # overlap may not exceed chunk length after a sentence cut; always advance
        start = max(end - overlap, start + 1) if overlap else end
    return chunks


def chunk_documents(docs: list[DocumentRecord], max_tokens: int = 256,
                    overlap: int = 0) -> list[Chunk]:
    out: list[Chunk] = []
    for doc in docs:
        out.extend(chunk_document(doc, max_tokens=max_tokens, overlap=overlap))
    return out


_DOC_FIELDS = {"doc_id", "doc_type", "title", "year", "region",
               "institution", "language", "body"}


def load_corpus(path) -> list[DocumentRecord]:
    """Read a JSON Lines corpus, one DocumentRecord per line.

    doc_ids must be unique; the load fails atomically at the first bad line.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read corpus file {path}: {exc}") from exc

    docs: list[DocumentRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: invalid JSON: {exc}", line=lineno) from exc
        if not isinstance(raw, dict):
            raise SchemaError(f"line {lineno}: expected an object", line=lineno)
        unknown = set(raw) - _DOC_FIELDS
        if unknown:
            raise SchemaError(f"line {lineno}: unknown fields {sorted(unknown)}", line=lineno)
        try:
            doc = DocumentRecord(
                doc_id=raw.get("doc_id", ""),
                doc_type=raw.get("doc_type", ""),
                title=raw.get("title", ""),
                body=raw.get("body", ""),
                year=raw.get("year"),
                region=raw.get("region"),
                institution=raw.get("institution"),
                language=raw.get("language", "en"),
            )
        except InvalidDocument as exc:
            raise SchemaError(f"line {lineno}: {exc}", line=lineno) from exc
        if doc.doc_id in seen:
            raise SchemaError(f"line {lineno}: duplicate doc_id {doc.doc_id!r}", line=lineno)
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs
