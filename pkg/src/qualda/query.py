"""Keyword/attribute search and topic-driven document ranking.

Everything here is read-only over the immutable corpus index and the latest
published model snapshot, so concurrent readers need no coordination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .corpus import Corpus, Document
from .engine import DocTopicState, TopicModel
from .errors import NotFound, StaleModel

_SNIPPET_CONTEXT = 40


@dataclass
class SearchQuery:
    terms: list[str] = field(default_factory=list)
    thread_id: Optional[str] = None
    geo_box: Optional[tuple[float, float, float, float]] = None  # min_lat, min_lon, max_lat, max_lon
    limit: int = 50
    offset: int = 0

    def __post_init__(self) -> None:
        if self.limit < 1:
            raise ValueError("limit must be >= 1")
        if self.offset < 0:
            raise ValueError("offset must be >= 0")
        if self.geo_box is not None:
            min_lat, min_lon, max_lat, max_lon = self.geo_box
            if min_lat > max_lat or min_lon > max_lon:
                raise ValueError("geo_box must be well-ordered")
        self.terms = [t.lower() for t in self.terms]


@dataclass
class RankedDoc:
    doc_id: str
    score: float
    snippet: str


def _matches(doc: Document, query: SearchQuery) -> bool:
    if query.thread_id is not None and doc.thread_id != query.thread_id:
        return False
    if query.geo_box is not None:
        if doc.geo is None:
            return False
        min_lat, min_lon, max_lat, max_lon = query.geo_box
        lat, lon = doc.geo
        if not (min_lat <= lat <= max_lat and min_lon <= lon <= max_lon):
            return False
    if query.terms:
        surfaces = {t.surface for t in doc.tokens}
        if not all(term in surfaces for term in query.terms):
            return False
    return True


def search(query: SearchQuery, corpus: Corpus) -> list[str]:
    """Documents containing ALL query terms (exact word types) and passing the
    thread/geo filters, ordered by doc_id with stable offset/limit paging."""
    hits = sorted(d.doc_id for d in corpus.documents if _matches(d, query))
    return hits[query.offset:query.offset + query.limit]


def _snippet(doc: Document, model: TopicModel, topic: int) -> str:
    """Context around the document token most at home in the topic."""
    best_tok = None
    best_p = -1.0
    for tok in doc.tokens:
        if tok.word_id < 0:
            continue
        p = model.beta[topic, tok.word_id]
        if p > best_p:
            best_p = p
            best_tok = tok
    if best_tok is None:
        return doc.text[: 2 * _SNIPPET_CONTEXT]
    lo = max(0, best_tok.start - _SNIPPET_CONTEXT)
    hi = min(len(doc.text), best_tok.end + _SNIPPET_CONTEXT)
    return doc.text[lo:hi]


def rank_by_topic_index(
    topic: int,
    doc_states: Mapping[str, DocTopicState],
    model: Optional[TopicModel],
    n: int,
    corpus: Corpus,
) -> list[RankedDoc]:
    if model is None:
        raise StaleModel("no model snapshot published yet")
    if not (0 <= topic < model.k):
        raise NotFound(f"topic {topic} out of range")
    scored = sorted(
        ((doc_id, float(state.theta_hat[topic])) for doc_id, state in doc_states.items()),
        key=lambda item: (-item[1], item[0]),
    )
    out = []
    for doc_id, score in scored[:n]:
        doc = corpus.get(doc_id)
        snippet = _snippet(doc, model, topic) if doc is not None else ""
        out.append(RankedDoc(doc_id=doc_id, score=score, snippet=snippet))
    return out


def rank_by_topic(
    theme_id: int,
    doc_states: Mapping[str, DocTopicState],
    model: Optional[TopicModel],
    n: int,
    corpus: Corpus,
) -> list[RankedDoc]:
    """Top-n documents by the theme's topic proportion, ties by doc_id."""
    if model is None:
        raise StaleModel("no model snapshot published yet")
    topic = model.topic_for_theme(theme_id)
    if topic is None:
        raise NotFound(f"theme {theme_id} is not bound to a topic")
    return rank_by_topic_index(topic, doc_states, model, n, corpus)


def explain_assignment(
    doc_id: str,
    theme_id: int,
    doc_states: Mapping[str, DocTopicState],
    model: Optional[TopicModel],
    corpus: Corpus,
) -> list[tuple[str, list[tuple[int, int]], float]]:
    """Which words carried a document's assignment to a theme.

    Per word type: the summed responsibility of its tokens for the theme's
    topic, with the spans to highlight; sorted by contribution descending,
    zero contributions dropped.
    """
    if model is None:
        raise StaleModel("no model snapshot published yet")
    topic = model.topic_for_theme(theme_id)
    if topic is None:
        raise NotFound(f"theme {theme_id} is not bound to a topic")
    doc = corpus.get(doc_id)
    if doc is None:
        raise NotFound(f"document {doc_id} does not exist")
    state = doc_states.get(doc_id)
    if state is None or state.phi is None:
        raise ValueError(f"no responsibilities available for {doc_id}")

    contribution: dict[str, float] = {}
    spans: dict[str, list[tuple[int, int]]] = {}
    row = 0
    for tok in doc.tokens:
        if tok.word_id < 0:
            continue
        contribution[tok.surface] = contribution.get(tok.surface, 0.0) + float(
            state.phi[row, topic]
        )
        spans.setdefault(tok.surface, []).append(tok.span)
        row += 1
    ranked = sorted(
        ((w, spans[w], c) for w, c in contribution.items() if c > 0),
        key=lambda item: (-item[2], item[0]),
    )
    return ranked
