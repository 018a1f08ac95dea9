"""Codes, themes, span annotations, and the constraints they induce.

A code is a researcher-applied word or short phrase over a text span. Each
code lives in exactly one theme; each theme is bound to one model topic.
Manual annotations clamp token responsibilities, deletion records forbid
them, and both survive retraining. Auto annotations are regenerated wholesale
whenever a new model version is published.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

from .corpus import STOPPED, Document
from .errors import EmptySelection, LastCode, NotFound, SelfMerge

MANUAL = "manual"
AUTO = "auto"
DELETED = "deleted"

ORIGINS = (MANUAL, AUTO, DELETED)


@dataclass
class Code:
    code_id: int
    label: str


@dataclass
class Theme:
    theme_id: int
    name: str
    code_ids: list[int] = field(default_factory=list)


@dataclass
class Annotation:
    ann_id: int
    doc_id: str
    span: tuple[int, int]
    code_id: int
    origin: str
    #: model version that produced the record (auto and deleted only)
    version: Optional[int] = None
    #: word surfaces captured from the auto records a deletion replaced;
    #: stored as strings so re-imports that reshape the vocabulary cannot
    #: dangle them
    words: tuple[str, ...] = ()
    #: True for document-level auto codes (theta above threshold, no one token)
    doc_level: bool = False


@dataclass
class ConstraintSet:
    """Per-document hard constraints on token responsibilities.

    clamp[doc_id][word_id] is the set of theme_ids the word was manually
    coded with in that document; forbid[doc_id][word_id] the set of themes a
    deletion excluded it from. The two sets are disjoint for any
    (doc, word): a manual code wins over a prior deletion.
    """

    clamp: dict[str, dict[int, frozenset[int]]] = field(default_factory=dict)
    forbid: dict[str, dict[int, frozenset[int]]] = field(default_factory=dict)

    def clamp_for(self, doc_id: str) -> dict[int, frozenset[int]]:
        return self.clamp.get(doc_id, {})

    def forbid_for(self, doc_id: str) -> dict[int, frozenset[int]]:
        return self.forbid.get(doc_id, {})

    def forbidden_pairs(self) -> set[tuple[int, int]]:
        """All (word_id, theme_id) pairs with a forbid record in any document."""
        pairs: set[tuple[int, int]] = set()
        for by_word in self.forbid.values():
            for word_id, themes in by_word.items():
                pairs.update((word_id, t) for t in themes)
        return pairs

    def is_empty(self) -> bool:
        return not self.clamp and not self.forbid


def _span_word_ids(doc: Document, span: tuple[int, int]) -> set[int]:
    """Non-stopped word types of the tokens overlapping a span."""
    return {
        t.word_id
        for t in doc.tokens_overlapping(*span)
        if t.word_id != STOPPED
    }


def _span_surfaces(doc: Document, span: tuple[int, int]) -> set[str]:
    return {
        t.surface for t in doc.tokens_overlapping(*span) if t.word_id != STOPPED
    }


def _ids_of_surfaces(doc: Document, surfaces: tuple[str, ...]) -> set[int]:
    wanted = set(surfaces)
    return {
        t.word_id
        for t in doc.tokens
        if t.surface in wanted and t.word_id != STOPPED
    }


def derive_constraints(
    annotations: Iterable[Annotation],
    documents: Mapping[str, Document],
    code_to_theme: Mapping[int, int],
) -> ConstraintSet:
    """Turn manual and deleted annotations into clamp/forbid constraints.

    Manual: every non-stopped word type under the span clamps to the code's
    theme, for all occurrences of that word within the same document.
    Deleted: the word types captured at deletion time are forbidden for the
    theme in that document. Clamp wins over forbid per (doc, word, theme).
    """
    clamp: dict[str, dict[int, set[int]]] = {}
    forbid: dict[str, dict[int, set[int]]] = {}
    for ann in annotations:
        theme_id = code_to_theme.get(ann.code_id)
        if theme_id is None:
            continue
        if ann.origin == MANUAL:
            doc = documents.get(ann.doc_id)
            if doc is None:
                continue
            for word_id in _span_word_ids(doc, ann.span):
                clamp.setdefault(ann.doc_id, {}).setdefault(word_id, set()).add(theme_id)
        elif ann.origin == DELETED:
            doc = documents.get(ann.doc_id)
            if doc is None:
                continue
            for word_id in _ids_of_surfaces(doc, ann.words):
                forbid.setdefault(ann.doc_id, {}).setdefault(word_id, set()).add(theme_id)
    out = ConstraintSet()
    for doc_id, by_word in clamp.items():
        out.clamp[doc_id] = {w: frozenset(ts) for w, ts in by_word.items()}
    for doc_id, by_word in forbid.items():
        cleaned: dict[int, frozenset[int]] = {}
        for word_id, themes in by_word.items():
            clamped = clamp.get(doc_id, {}).get(word_id, set())
            remaining = frozenset(themes - clamped)
            if remaining:
                cleaned[word_id] = remaining
        if cleaned:
            out.forbid[doc_id] = cleaned
    return out


class AnnotationStore:
    """Single project's codes, themes, and annotations.

    Mutations are expected to be serialized by the caller (one writer per
    project); reads hand out live objects that callers must not mutate.
    """

    def __init__(self) -> None:
        self.codes: dict[int, Code] = {}
        self.themes: dict[int, Theme] = {}
        self.annotations: dict[int, Annotation] = {}
        self._next_code_id = 1
        self._next_theme_id = 1
        self._next_ann_id = 1
        #: (kept_theme_id, retired_theme_id) pairs to merge at next retrain
        self.pending_merges: list[tuple[int, int]] = []

    # -- lookups ------------------------------------------------------------

    def code_by_label(self, label: str) -> Optional[Code]:
        label = normalize_label(label)
        for code in self.codes.values():
            if code.label == label:
                return code
        return None

    def theme_of_code(self, code_id: int) -> Theme:
        for theme in self.themes.values():
            if code_id in theme.code_ids:
                return theme
        raise NotFound(f"code {code_id} belongs to no theme")

    def code_to_theme(self) -> dict[int, int]:
        return {
            code_id: theme.theme_id
            for theme in self.themes.values()
            for code_id in theme.code_ids
        }

    def primary_code(self, theme_id: int) -> Code:
        """The theme's anchor code (lowest code_id); labels its auto chips."""
        theme = self._theme(theme_id)
        return self.codes[min(theme.code_ids)]

    def annotations_for(self, doc_id: str, origin: Optional[str] = None) -> list[Annotation]:
        out = [a for a in self.annotations.values() if a.doc_id == doc_id]
        if origin is not None:
            out = [a for a in out if a.origin == origin]
        out.sort(key=lambda a: (a.span, a.code_id, a.ann_id))
        return out

    def manual_spans_by_theme(self, doc_id: str) -> dict[int, list[tuple[int, int]]]:
        """Spans of manual annotations per theme, for suggestion skipping."""
        mapping = self.code_to_theme()
        out: dict[int, list[tuple[int, int]]] = {}
        for ann in self.annotations.values():
            if ann.doc_id != doc_id or ann.origin != MANUAL:
                continue
            theme_id = mapping.get(ann.code_id)
            if theme_id is not None:
                out.setdefault(theme_id, []).append(ann.span)
        return out

    def deleted_theme_ids(self, doc_id: str) -> set[int]:
        mapping = self.code_to_theme()
        return {
            mapping[a.code_id]
            for a in self.annotations.values()
            if a.doc_id == doc_id and a.origin == DELETED and a.code_id in mapping
        }

    def _theme(self, theme_id: int) -> Theme:
        theme = self.themes.get(theme_id)
        if theme is None:
            raise NotFound(f"theme {theme_id} does not exist")
        return theme

    def _code(self, code_id: int) -> Code:
        code = self.codes.get(code_id)
        if code is None:
            raise NotFound(f"code {code_id} does not exist")
        return code

    # -- mutations ----------------------------------------------------------

    def apply_code(self, doc: Document, span: tuple[int, int], label: str) -> Annotation:
        """Record a manual annotation, creating code and singleton theme if new.

        A manual code overrides any earlier deletion of the same code in the
        same document.
        """
        start, end = span
        if not (0 <= start < end <= len(doc.text)):
            raise ValueError(f"span {span} outside document {doc.doc_id}")
        if not _span_word_ids(doc, span):
            raise EmptySelection(f"span {span} covers no codable token")
        label = normalize_label(label)
        if not label:
            raise ValueError("code label must be non-empty")
        code = self.code_by_label(label)
        if code is None:
            code = Code(code_id=self._next_code_id, label=label)
            self._next_code_id += 1
            self.codes[code.code_id] = code
            theme = Theme(
                theme_id=self._next_theme_id, name=label, code_ids=[code.code_id]
            )
            self._next_theme_id += 1
            self.themes[theme.theme_id] = theme
        for ann in list(self.annotations.values()):
            if ann.doc_id == doc.doc_id and ann.code_id == code.code_id and ann.origin == DELETED:
                del self.annotations[ann.ann_id]
        ann = Annotation(
            ann_id=self._next_ann_id,
            doc_id=doc.doc_id,
            span=(start, end),
            code_id=code.code_id,
            origin=MANUAL,
        )
        self._next_ann_id += 1
        self.annotations[ann.ann_id] = ann
        return ann

    def retract_code(self, doc_id: str, code_id: int) -> None:
        """Remove manual annotations of a code from a document (no forbid record)."""
        self._code(code_id)
        victims = [
            a.ann_id
            for a in self.annotations.values()
            if a.doc_id == doc_id and a.code_id == code_id and a.origin == MANUAL
        ]
        if not victims:
            raise NotFound(f"no manual annotation of code {code_id} on {doc_id}")
        for ann_id in victims:
            del self.annotations[ann_id]

    def delete_auto_code(self, doc: Document, code_id: int) -> Annotation:
        """Replace the auto records of (doc, code) with one deleted record.

        The deleted record captures the word types the auto annotations
        covered; those feed forbid constraints on every later retrain.
        Deleting an already-deleted code is a no-op returning the record.
        """
        self._code(code_id)
        for ann in self.annotations.values():
            if ann.doc_id == doc.doc_id and ann.code_id == code_id and ann.origin == DELETED:
                return ann
        autos = [
            a
            for a in self.annotations.values()
            if a.doc_id == doc.doc_id and a.code_id == code_id and a.origin == AUTO
        ]
        if not autos:
            raise NotFound(f"no auto annotation of code {code_id} on {doc.doc_id}")
        surfaces: set[str] = set()
        for a in autos:
            if not a.doc_level:
                surfaces.update(_span_surfaces(doc, a.span))
        autos.sort(key=lambda a: a.span)
        for a in autos:
            del self.annotations[a.ann_id]
        record = Annotation(
            ann_id=self._next_ann_id,
            doc_id=doc.doc_id,
            span=autos[0].span,
            code_id=code_id,
            origin=DELETED,
            version=autos[0].version,
            words=tuple(sorted(surfaces)),
            doc_level=all(a.doc_level for a in autos),
        )
        self._next_ann_id += 1
        self.annotations[record.ann_id] = record
        return record

    def merge_codes(self, target_theme_id: int, code_id: int) -> Theme:
        """Move a code into the target theme; its emptied theme is retired.

        If the former theme is retired, the underlying topics are merged at
        the next retrain (recorded in pending_merges).
        """
        target = self._theme(target_theme_id)
        self._code(code_id)
        if code_id in target.code_ids:
            raise SelfMerge(f"code {code_id} already in theme {target_theme_id}")
        source = self.theme_of_code(code_id)
        source.code_ids.remove(code_id)
        target.code_ids.append(code_id)
        if not source.code_ids:
            del self.themes[source.theme_id]
            self.pending_merges.append((target.theme_id, source.theme_id))
        return target

    def split_code(self, theme_id: int, code_id: int) -> tuple[Theme, Theme]:
        """Move a code out into a fresh singleton theme named after it."""
        theme = self._theme(theme_id)
        code = self._code(code_id)
        if code_id not in theme.code_ids:
            raise NotFound(f"code {code_id} not in theme {theme_id}")
        if len(theme.code_ids) < 2:
            raise LastCode(f"theme {theme_id} has a single code")
        theme.code_ids.remove(code_id)
        fresh = Theme(
            theme_id=self._next_theme_id, name=code.label, code_ids=[code_id]
        )
        self._next_theme_id += 1
        self.themes[fresh.theme_id] = fresh
        return theme, fresh

    def rename_theme(self, theme_id: int, name: str) -> Theme:
        theme = self._theme(theme_id)
        name = name.strip()
        if not name:
            raise ValueError("theme name must be non-empty")
        theme.name = name
        return theme

    def replace_auto_annotations(self, fresh: Iterable[Annotation]) -> None:
        """Drop all auto records and install the new generation."""
        for ann in [a for a in self.annotations.values() if a.origin == AUTO]:
            del self.annotations[ann.ann_id]
        for ann in fresh:
            stamped = replace(ann, ann_id=self._next_ann_id)
            self._next_ann_id += 1
            self.annotations[stamped.ann_id] = stamped

    def take_pending_merges(self) -> list[tuple[int, int]]:
        out, self.pending_merges = self.pending_merges, []
        return out

    # -- derived views --------------------------------------------------------

    def constraints(self, documents: Mapping[str, Document]) -> ConstraintSet:
        return derive_constraints(
            self.annotations.values(), documents, self.code_to_theme()
        )

    def theme_seed_words(self, documents: Mapping[str, Document]) -> dict[int, frozenset[int]]:
        """Per theme: word types manually coded with any of its codes."""
        mapping = self.code_to_theme()
        seeds: dict[int, set[int]] = {t: set() for t in self.themes}
        for ann in self.annotations.values():
            if ann.origin != MANUAL:
                continue
            theme_id = mapping.get(ann.code_id)
            doc = documents.get(ann.doc_id)
            if theme_id is None or doc is None:
                continue
            seeds[theme_id].update(_span_word_ids(doc, ann.span))
        return {t: frozenset(ws) for t, ws in seeds.items()}

    def code_word_ids(self, doc: Document, code_id: int) -> set[int]:
        """Word types associated with a code in one document, any origin."""
        self._code(code_id)
        words: set[int] = set()
        for ann in self.annotations.values():
            if ann.doc_id != doc.doc_id or ann.code_id != code_id:
                continue
            if ann.origin == DELETED:
                words.update(_ids_of_surfaces(doc, ann.words))
            elif not ann.doc_level:
                words.update(_span_word_ids(doc, ann.span))
        return words

    def code_occurrences(self, doc: Document, code_id: int) -> list[tuple[int, int]]:
        """Spans of every in-document occurrence of the code's word types.

        Includes occurrences outside the annotated selections: the engine
        treats all appearances of a word within a document as equivalent, and
        the highlight makes that visible.
        """
        words = self.code_word_ids(doc, code_id)
        return [t.span for t in doc.tokens if t.word_id in words]

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "codes": [
                {"code_id": c.code_id, "label": c.label}
                for c in sorted(self.codes.values(), key=lambda c: c.code_id)
            ],
            "themes": [
                {"theme_id": t.theme_id, "name": t.name, "code_ids": list(t.code_ids)}
                for t in sorted(self.themes.values(), key=lambda t: t.theme_id)
            ],
            "annotations": [
                {
                    "ann_id": a.ann_id,
                    "doc_id": a.doc_id,
                    "span": list(a.span),
                    "code_id": a.code_id,
                    "origin": a.origin,
                    "version": a.version,
                    "words": list(a.words),
                    "doc_level": a.doc_level,
                }
                for a in sorted(self.annotations.values(), key=lambda a: a.ann_id)
            ],
            "pending_merges": [list(p) for p in self.pending_merges],
        }

    @classmethod
    def from_json(cls, data: dict) -> "AnnotationStore":
        store = cls()
        for c in data.get("codes", []):
            store.codes[c["code_id"]] = Code(c["code_id"], c["label"])
        for t in data.get("themes", []):
            store.themes[t["theme_id"]] = Theme(
                t["theme_id"], t["name"], list(t["code_ids"])
            )
        for a in data.get("annotations", []):
            store.annotations[a["ann_id"]] = Annotation(
                ann_id=a["ann_id"],
                doc_id=a["doc_id"],
                span=tuple(a["span"]),
                code_id=a["code_id"],
                origin=a["origin"],
                version=a.get("version"),
                words=tuple(a.get("words", ())),
                doc_level=a.get("doc_level", False),
            )
        store.pending_merges = [tuple(p) for p in data.get("pending_merges", [])]
        store._next_code_id = max(store.codes, default=0) + 1
        store._next_theme_id = max(store.themes, default=0) + 1
        store._next_ann_id = max(store.annotations, default=0) + 1
        return store


def normalize_label(label: str) -> str:
    return " ".join(label.lower().split())
