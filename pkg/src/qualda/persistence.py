"""Project persistence: one transparent directory per project.

Layout: corpus.jsonl (also valid import input), annotations.json, model.json
(latest published snapshot), config.json. All JSON is written with sorted
keys for diffability, and every write goes through a temp file plus
os.replace so a crash mid-write leaves the previous state intact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .annotation import AnnotationStore
from .corpus import Corpus, Document, Vocabulary, build_vocabulary, ingest_jsonl
from .engine import DocTopicState, TopicModel, TrainConfig
from .errors import NotFound, StorageError, VersionMismatch

SCHEMA_VERSION = 1

CORPUS_FILE = "corpus.jsonl"
ANNOTATIONS_FILE = "annotations.json"
MODEL_FILE = "model.json"
CONFIG_FILE = "config.json"


@dataclass
class Snapshot:
    """An immutable published training result."""

    model: TopicModel
    doc_states: dict[str, DocTopicState]
    config: TrainConfig

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "version": self.model.version,
            "model": self.model.to_json(),
            "config": self.config.to_json(),
            "doc_states": {
                doc_id: st.to_json() for doc_id, st in sorted(self.doc_states.items())
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "Snapshot":
        _check_schema(data)
        return cls(
            model=TopicModel.from_json(data["model"]),
            doc_states={
                doc_id: DocTopicState.from_json(st)
                for doc_id, st in data["doc_states"].items()
            },
            config=TrainConfig.from_json(data["config"]),
        )


@dataclass
class Project:
    """Everything a project owns, minus runtime state (jobs, locks)."""

    project_id: str
    name: str
    stoplist: list[str] = field(default_factory=list)
    min_df: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    documents: list[Document] = field(default_factory=list)
    vocabulary: Optional[Vocabulary] = None
    store: AnnotationStore = field(default_factory=AnnotationStore)
    snapshot: Optional[Snapshot] = None

    def corpus(self) -> Corpus:
        if self.vocabulary is None:
            raise NotFound("project has no documents yet")
        return Corpus(self.documents, self.vocabulary)

    def documents_by_id(self) -> dict[str, Document]:
        return {d.doc_id: d for d in self.documents}

    def snapshot_version(self) -> Optional[int]:
        return self.snapshot.model.version if self.snapshot else None


def _check_schema(data: dict) -> None:
    found = data.get("schema_version")
    if found != SCHEMA_VERSION:
        raise VersionMismatch(found if isinstance(found, int) else -1, SCHEMA_VERSION)


def _atomic_write(path: Path, content: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp.write_text(content, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write {path}") from exc


def _dump(data: dict) -> str:
    return json.dumps(data, sort_keys=True, ensure_ascii=False, indent=1) + "\n"


def document_record(doc: Document) -> dict:
    record = {"doc_id": doc.doc_id, "text": doc.text}
    if doc.thread_id:
        record["thread_id"] = doc.thread_id
    if doc.author is not None:
        record["author"] = doc.author
    if doc.timestamp is not None:
        record["timestamp"] = doc.timestamp
    if doc.geo is not None:
        record["geo"] = list(doc.geo)
    return record


def corpus_jsonl(documents: list[Document]) -> str:
    return "".join(
        json.dumps(document_record(d), sort_keys=True, ensure_ascii=False) + "\n"
        for d in documents
    )


def save_corpus(project: Project, directory: Path) -> None:
    _atomic_write(directory / CORPUS_FILE, corpus_jsonl(project.documents))


def save_annotations(project: Project, directory: Path) -> None:
    data = {"schema_version": SCHEMA_VERSION, **project.store.to_json()}
    _atomic_write(directory / ANNOTATIONS_FILE, _dump(data))


def save_config(project: Project, directory: Path) -> None:
    data = {
        "schema_version": SCHEMA_VERSION,
        "project_id": project.project_id,
        "name": project.name,
        "stoplist": sorted(project.stoplist),
        "min_df": project.min_df,
        "train": project.train.to_json(),
    }
    _atomic_write(directory / CONFIG_FILE, _dump(data))


def save_snapshot(snapshot: Snapshot, directory: Path) -> None:
    """Publish step one: write-new-then-swap on disk."""
    _atomic_write(directory / MODEL_FILE, _dump(snapshot.to_json()))


def save_project(project: Project, directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create {directory}") from exc
    save_config(project, directory)
    save_corpus(project, directory)
    save_annotations(project, directory)
    if project.snapshot is not None:
        save_snapshot(project.snapshot, directory)


def load_project(directory: Path) -> Project:
    """Rebuild a project bit-equivalently from its directory.

    Tokens and vocabulary are re-derived from corpus.jsonl with the stored
    stoplist/min_df, which is deterministic, so word ids match the saved
    snapshot exactly.
    """
    config_path = directory / CONFIG_FILE
    if not config_path.exists():
        raise NotFound(f"no project at {directory}")
    try:
        config = json.loads(config_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise StorageError(f"cannot read {config_path}") from exc
    _check_schema(config)

    project = Project(
        project_id=config["project_id"],
        name=config["name"],
        stoplist=list(config.get("stoplist", [])),
        min_df=config.get("min_df", 1),
        train=TrainConfig.from_json(config.get("train", {})),
    )

    corpus_path = directory / CORPUS_FILE
    if corpus_path.exists():
        with corpus_path.open(encoding="utf-8") as fh:
            project.documents = ingest_jsonl(fh)
        if project.documents:
            project.vocabulary = build_vocabulary(
                project.documents, project.stoplist, project.min_df
            )

    ann_path = directory / ANNOTATIONS_FILE
    if ann_path.exists():
        data = json.loads(ann_path.read_text(encoding="utf-8"))
        _check_schema(data)
        project.store = AnnotationStore.from_json(data)

    model_path = directory / MODEL_FILE
    if model_path.exists():
        data = json.loads(model_path.read_text(encoding="utf-8"))
        project.snapshot = Snapshot.from_json(data)

    return project


# -- single-file bundles (CLI export / import) -------------------------------

def export_bundle(project: Project) -> dict:
    """One JSON document carrying the whole project."""
    bundle = {
        "schema_version": SCHEMA_VERSION,
        "project_id": project.project_id,
        "name": project.name,
        "stoplist": sorted(project.stoplist),
        "min_df": project.min_df,
        "train": project.train.to_json(),
        "corpus": [document_record(d) for d in project.documents],
        "annotations": project.store.to_json(),
    }
    if project.snapshot is not None:
        bundle["snapshot"] = project.snapshot.to_json()
    return bundle


def write_bundle(project: Project, out_path: Path) -> None:
    _atomic_write(out_path, _dump(export_bundle(project)))


def restore_bundle(bundle_path: Path, directory: Path) -> Project:
    """Materialize an exported bundle as a fresh project directory."""
    try:
        data = json.loads(Path(bundle_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise StorageError(f"cannot read bundle {bundle_path}") from exc
    _check_schema(data)

    project = Project(
        project_id=data["project_id"],
        name=data["name"],
        stoplist=list(data.get("stoplist", [])),
        min_df=data.get("min_df", 1),
        train=TrainConfig.from_json(data.get("train", {})),
    )
    lines = [json.dumps(r, sort_keys=True, ensure_ascii=False) for r in data.get("corpus", [])]
    project.documents = ingest_jsonl(lines)
    if project.documents:
        project.vocabulary = build_vocabulary(
            project.documents, project.stoplist, project.min_df
        )
    project.store = AnnotationStore.from_json(data.get("annotations", {}))
    if "snapshot" in data:
        project.snapshot = Snapshot.from_json(data["snapshot"])
    save_project(project, directory)
    return project
