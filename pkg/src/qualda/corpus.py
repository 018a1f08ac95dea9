"""Corpus ingestion: tokenization with character spans, vocabulary, JSONL import.

Tokens are maximal runs of Unicode alphanumerics; a single apostrophe is kept
inside a token when it sits between two letters ("don't"). Surfaces are
lowercased copies of the original text slice, so every span can be highlighted
in the source document exactly as the engine saw it.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

from .errors import DuplicateId, EmptyVocabulary, ParseError

#: word_id of tokens removed by the stoplist or the min_df threshold.
STOPPED = -1

# Alphanumeric runs ([^\W_] = Unicode letters+digits, underscore excluded),
# glued across an apostrophe only when both neighbours are letters.
_TOKEN_RE = re.compile(r"[^\W_]+(?:(?<=[^\W\d_])'(?=[^\W\d_])[^\W_]+)*")


@dataclass
class Token:
    surface: str
    start: int
    end: int
    word_id: int = STOPPED

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass
class Document:
    doc_id: str
    text: str
    tokens: list[Token] = field(default_factory=list)
    thread_id: str = ""
    author: Optional[str] = None
    timestamp: Optional[str] = None
    geo: Optional[tuple[float, float]] = None

    def word_ids(self) -> list[int]:
        """Vocabulary ids of the document's tokens, stopped tokens excluded."""
        return [t.word_id for t in self.tokens if t.word_id != STOPPED]

    def tokens_overlapping(self, start: int, end: int) -> list[Token]:
        return [t for t in self.tokens if t.start < end and t.end > start]


class Vocabulary:
    """Lexicographically ordered word list with document frequencies."""

    def __init__(self, words: list[str], doc_freq: list[int]):
        if len(words) != len(doc_freq):
            raise ValueError("words and doc_freq must align")
        self.words = list(words)
        self.doc_freq = list(doc_freq)
        self.word_to_id = {w: i for i, w in enumerate(self.words)}
        if len(self.word_to_id) != len(self.words):
            raise ValueError("vocabulary words must be unique")

    @property
    def V(self) -> int:
        return len(self.words)

    def id_of(self, word: str) -> int:
        return self.word_to_id.get(word.lower(), STOPPED)

    def __len__(self) -> int:
        return len(self.words)

    def to_json(self) -> dict:
        return {"words": self.words, "doc_freq": self.doc_freq}

    @classmethod
    def from_json(cls, data: dict) -> "Vocabulary":
        return cls(data["words"], data["doc_freq"])


def tokenize(text: str) -> list[Token]:
    """Split text into tokens with character spans; word_id left unresolved."""
    return [
        Token(surface=m.group().lower(), start=m.start(), end=m.end())
        for m in _TOKEN_RE.finditer(text)
    ]


def build_vocabulary(
    documents: list[Document],
    stoplist: Iterable[str] = (),
    min_df: int = 1,
) -> Vocabulary:
    """Build the vocabulary and resolve every token's word_id in place.

    Retains exactly the surfaces that occur in at least min_df documents and
    are not stoplisted; tokens of dropped surfaces get word_id = STOPPED.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    stop = {w.lower() for w in stoplist}
    df: dict[str, int] = {}
    for doc in documents:
        for surface in {t.surface for t in doc.tokens}:
            df[surface] = df.get(surface, 0) + 1
    words = sorted(w for w, n in df.items() if n >= min_df and w not in stop)
    if not words:
        raise EmptyVocabulary("no word survives stoplist/min_df filtering")
    vocab = Vocabulary(words, [df[w] for w in words])
    for doc in documents:
        for tok in doc.tokens:
            tok.word_id = vocab.word_to_id.get(tok.surface, STOPPED)
    return vocab


@dataclass
class Corpus:
    """Tokenized documents plus the vocabulary they were resolved against."""

    documents: list[Document]
    vocabulary: Vocabulary

    def __post_init__(self) -> None:
        self._by_id = {d.doc_id: d for d in self.documents}

    @classmethod
    def build(
        cls,
        documents: list[Document],
        stoplist: Iterable[str] = (),
        min_df: int = 1,
    ) -> "Corpus":
        vocab = build_vocabulary(documents, stoplist, min_df)
        return cls(documents, vocab)

    def get(self, doc_id: str) -> Optional[Document]:
        return self._by_id.get(doc_id)

    def __len__(self) -> int:
        return len(self.documents)


def _default_doc_id(line_no: int, text: str) -> str:
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
    return f"{line_no}-{digest}"


def ingest_jsonl(lines: Iterable[str] | IO[str]) -> list[Document]:
    """Parse a JSON-Lines corpus, one comment per line.

    Required field: text. Optional: doc_id, thread_id, author, timestamp,
    geo ([lat, lon] decimal degrees). Missing doc_id is assigned as a content
    hash prefixed by the 1-based line number. Blank lines are skipped.
    """
    documents: list[Document] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            raise ParseError(line_no)
        if not isinstance(record, dict) or not isinstance(record.get("text"), str):
            raise ParseError(line_no, "expected an object with a string `text` field")
        geo = record.get("geo")
        if geo is not None:
            if (
                not isinstance(geo, (list, tuple))
                or len(geo) != 2
                or not all(isinstance(x, (int, float)) for x in geo)
            ):
                raise ParseError(line_no, "geo must be [lat, lon]")
            geo = (float(geo[0]), float(geo[1]))
        text = record["text"]
        doc_id = record.get("doc_id") or _default_doc_id(line_no, text)
        if doc_id in seen:
            raise DuplicateId(doc_id)
        seen.add(doc_id)
        documents.append(
            Document(
                doc_id=doc_id,
                text=text,
                tokens=tokenize(text),
                thread_id=record.get("thread_id") or "",
                author=record.get("author"),
                timestamp=record.get("timestamp"),
                geo=geo,
            )
        )
    return documents
