"""Project-scoped REST API tying corpus, annotation, engine, and query together.

One writer per project: every mutation runs under the project lock. Training
runs on a worker thread against a frozen view (theme seeds, constraints,
previous snapshot) and publishes its result atomically: snapshot written to
disk first (temp file + rename), then swapped into memory, then auto
annotations regenerated wholesale. Reads are served from the last published
snapshot and never wait on a running job.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse

from . import persistence
from .annotation import MANUAL, Annotation, AnnotationStore
from .corpus import build_vocabulary, ingest_jsonl
from .engine import TrainConfig, e_step_document
from .training import execute_plan, plan_training, publish_snapshot
from .errors import (
    Busy,
    Cancelled,
    DuplicateId,
    EmptySelection,
    LastCode,
    NotFound,
    ParseError,
    QualdaError,
    SelfMerge,
    StaleModel,
    StorageError,
    VersionMismatch,
)
from .persistence import Project
from .query import SearchQuery, explain_assignment, rank_by_topic, rank_by_topic_index, search

API_PREFIX = "/api/v1"


@dataclass
class TrainingJob:
    job_id: str
    project_id: str
    config: TrainConfig
    state: str = "queued"  # queued | running | done | failed | cancelled
    version: Optional[int] = None
    message: Optional[str] = None
    trace: Optional[Any] = None
    started_at: Optional[str] = None
    cancel_requested: bool = False

    def to_json(self) -> dict:
        out = {
            "job_id": self.job_id,
            "project_id": self.project_id,
            "state": self.state,
            "config": self.config.to_json(),
            "version": self.version,
            "message": self.message,
            "started_at": self.started_at,
            "trace": None,
        }
        if self.trace is not None:
            out["trace"] = {
                "elbos": list(self.trace.elbos),
                "iterations": self.trace.iterations,
                "converged": self.trace.converged,
                "degenerate_rows": self.trace.degenerate_rows,
            }
        return out


@dataclass
class ManagedProject:
    project: Project
    directory: Path
    lock: threading.RLock = field(default_factory=threading.RLock)
    jobs: dict[str, TrainingJob] = field(default_factory=dict)
    active_job: Optional[TrainingJob] = None
    request_cache: dict[str, tuple[int, dict]] = field(default_factory=dict)
    _job_counter: int = 0

    def next_job_id(self) -> str:
        self._job_counter += 1
        return f"j{self._job_counter}"


class ProjectManager:
    """All projects under one root directory; the service's single backend."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._projects: dict[str, ManagedProject] = {}
        self._registry_lock = threading.Lock()
        self._create_cache: dict[str, dict] = {}
        if (self.root / persistence.CONFIG_FILE).exists():
            # the root itself is one project directory (CLI `serve --project`)
            project = persistence.load_project(self.root)
            self._projects[project.project_id] = ManagedProject(project, self.root)
            return
        for child in sorted(self.root.iterdir()):
            if (child / persistence.CONFIG_FILE).exists():
                project = persistence.load_project(child)
                self._projects[project.project_id] = ManagedProject(project, child)

    # -- project lifecycle ---------------------------------------------------

    def create_project(self, name: str, stoplist: Optional[list[str]] = None,
                       min_df: int = 1, train: Optional[dict] = None) -> ManagedProject:
        project_id = uuid.uuid4().hex[:12]
        config = TrainConfig.from_json(train or {})
        project = Project(
            project_id=project_id,
            name=name,
            stoplist=sorted(stoplist or []),
            min_df=min_df,
            train=config,
        )
        directory = self.root / project_id
        persistence.save_project(project, directory)
        managed = ManagedProject(project, directory)
        with self._registry_lock:
            self._projects[project_id] = managed
        return managed

    def get(self, project_id: str) -> ManagedProject:
        with self._registry_lock:
            managed = self._projects.get(project_id)
        if managed is None:
            raise NotFound(f"project {project_id} does not exist")
        return managed

    def list_projects(self) -> list[dict]:
        with self._registry_lock:
            items = list(self._projects.values())
        return [self.project_summary(m) for m in items]

    def project_summary(self, mp: ManagedProject) -> dict:
        with mp.lock:
            p = mp.project
            return {
                "project_id": p.project_id,
                "name": p.name,
                "documents": len(p.documents),
                "vocabulary_size": p.vocabulary.V if p.vocabulary else 0,
                "themes": len(p.store.themes),
                "codes": len(p.store.codes),
                "snapshot_version": p.snapshot_version(),
                "job": mp.active_job.to_json() if mp.active_job else None,
            }

    # -- idempotent mutations --------------------------------------------------

    def idempotent(
        self, mp: ManagedProject, request_id: Optional[str], fn: Callable[[], tuple[int, dict]]
    ) -> tuple[int, dict]:
        """Replay-safe mutations: the same client request id returns the
        stored response instead of re-applying the change."""
        if request_id:
            with mp.lock:
                cached = mp.request_cache.get(request_id)
            if cached is not None:
                return cached
        result = fn()
        if request_id:
            with mp.lock:
                mp.request_cache[request_id] = result
        return result

    # -- corpus ---------------------------------------------------------------

    def import_documents(self, mp: ManagedProject, jsonl: str) -> dict:
        with mp.lock:
            if mp.active_job and mp.active_job.state in ("queued", "running"):
                raise Busy("cannot import documents while a training job runs")
            incoming = ingest_jsonl(jsonl.splitlines())
            existing = {d.doc_id for d in mp.project.documents}
            for doc in incoming:
                if doc.doc_id in existing:
                    raise DuplicateId(doc.doc_id)
            mp.project.documents.extend(incoming)
            if mp.project.documents:
                mp.project.vocabulary = build_vocabulary(
                    mp.project.documents, mp.project.stoplist, mp.project.min_df
                )
            persistence.save_corpus(mp.project, mp.directory)
            return {
                "documents": len(mp.project.documents),
                "vocabulary_size": mp.project.vocabulary.V if mp.project.vocabulary else 0,
            }

    # -- annotation operations --------------------------------------------------

    def _doc(self, mp: ManagedProject, doc_id: str):
        doc = next((d for d in mp.project.documents if d.doc_id == doc_id), None)
        if doc is None:
            raise NotFound(f"document {doc_id} does not exist")
        return doc

    def _chip_label(self, store: AnnotationStore, ann: Annotation) -> str:
        code = store.codes.get(ann.code_id)
        if code is None:
            return f"code {ann.code_id}"
        if ann.origin == MANUAL:
            return code.label
        try:
            return store.theme_of_code(code.code_id).name
        except NotFound:
            return code.label

    def _annotation_json(self, mp: ManagedProject, doc, ann: Annotation) -> dict:
        store = mp.project.store
        return {
            "ann_id": ann.ann_id,
            "doc_id": ann.doc_id,
            "code_id": ann.code_id,
            "label": self._chip_label(store, ann),
            "origin": ann.origin,
            "span": list(ann.span),
            "version": ann.version,
            "doc_level": ann.doc_level,
            "occurrences": [list(s) for s in store.code_occurrences(doc, ann.code_id)],
        }

    def apply_code(self, mp: ManagedProject, doc_id: str, span: tuple[int, int],
                   label: str) -> dict:
        with mp.lock:
            doc = self._doc(mp, doc_id)
            ann = mp.project.store.apply_code(doc, span, label)
            persistence.save_annotations(mp.project, mp.directory)
            return self._annotation_json(mp, doc, ann)

    def delete_auto_code(self, mp: ManagedProject, doc_id: str, code_id: int) -> dict:
        with mp.lock:
            doc = self._doc(mp, doc_id)
            record = mp.project.store.delete_auto_code(doc, code_id)
            persistence.save_annotations(mp.project, mp.directory)
            return self._annotation_json(mp, doc, record)

    def document_view(self, mp: ManagedProject, doc_id: str) -> dict:
        with mp.lock:
            doc = self._doc(mp, doc_id)
            store = mp.project.store
            annotations = [
                self._annotation_json(mp, doc, a) for a in store.annotations_for(doc_id)
            ]
            chips: dict[tuple[int, str], dict] = {}
            for ann in annotations:
                key = (ann["code_id"], ann["origin"])
                chip = chips.setdefault(
                    key,
                    {
                        "code_id": ann["code_id"],
                        "label": ann["label"],
                        "origin": ann["origin"],
                        "spans": [],
                        "occurrences": ann["occurrences"],
                        "doc_level": False,
                    },
                )
                if ann["doc_level"]:
                    chip["doc_level"] = True
                else:
                    chip["spans"].append(ann["span"])
            ordered = sorted(
                chips.values(),
                key=lambda c: (
                    {"manual": 0, "auto": 1, "deleted": 2}[c["origin"]],
                    c["label"],
                ),
            )
            return {
                "doc_id": doc.doc_id,
                "text": doc.text,
                "thread_id": doc.thread_id,
                "author": doc.author,
                "timestamp": doc.timestamp,
                "geo": list(doc.geo) if doc.geo else None,
                "snapshot_version": mp.project.snapshot_version(),
                "annotations": annotations,
                "chips": ordered,
            }

    # -- themes -----------------------------------------------------------------

    def theme_json(self, mp: ManagedProject, theme) -> dict:
        store = mp.project.store
        snapshot = mp.project.snapshot
        topic = snapshot.model.topic_for_theme(theme.theme_id) if snapshot else None
        return {
            "theme_id": theme.theme_id,
            "name": theme.name,
            "codes": [
                {"code_id": cid, "label": store.codes[cid].label}
                for cid in theme.code_ids
            ],
            "topic": topic,
        }

    def list_themes(self, mp: ManagedProject) -> dict:
        with mp.lock:
            themes = sorted(mp.project.store.themes.values(), key=lambda t: t.theme_id)
            return {
                "themes": [self.theme_json(mp, t) for t in themes],
                "snapshot_version": mp.project.snapshot_version(),
            }

    def merge_codes(self, mp: ManagedProject, theme_id: int, code_id: int) -> dict:
        with mp.lock:
            theme = mp.project.store.merge_codes(theme_id, code_id)
            persistence.save_annotations(mp.project, mp.directory)
            return self.theme_json(mp, theme)

    def split_code(self, mp: ManagedProject, theme_id: int, code_id: int) -> dict:
        with mp.lock:
            theme, fresh = mp.project.store.split_code(theme_id, code_id)
            persistence.save_annotations(mp.project, mp.directory)
            return {
                "theme": self.theme_json(mp, theme),
                "new_theme": self.theme_json(mp, fresh),
            }

    def rename_theme(self, mp: ManagedProject, theme_id: int, name: str) -> dict:
        with mp.lock:
            theme = mp.project.store.rename_theme(theme_id, name)
            persistence.save_annotations(mp.project, mp.directory)
            return self.theme_json(mp, theme)

    # -- search / ranking ----------------------------------------------------------

    def search_documents(self, mp: ManagedProject, query: SearchQuery) -> dict:
        with mp.lock:
            corpus = mp.project.corpus()
            hits = search(query, corpus)
            return {"doc_ids": hits}

    def ranked_documents(self, mp: ManagedProject, theme_id: int, n: int) -> dict:
        with mp.lock:
            project = mp.project
            snapshot = project.snapshot
            if snapshot is None:
                raise StaleModel("train the project first")
            ranked = rank_by_topic(
                theme_id, snapshot.doc_states, snapshot.model, n, project.corpus()
            )
            return {
                "documents": [
                    {"doc_id": r.doc_id, "score": r.score, "snippet": r.snippet}
                    for r in ranked
                ],
                "snapshot_version": snapshot.model.version,
            }

    def ranked_by_topic_index(self, mp: ManagedProject, topic: int, n: int) -> dict:
        with mp.lock:
            project = mp.project
            snapshot = project.snapshot
            if snapshot is None:
                raise StaleModel("train the project first")
            ranked = rank_by_topic_index(
                topic, snapshot.doc_states, snapshot.model, n, project.corpus()
            )
            return {
                "documents": [
                    {"doc_id": r.doc_id, "score": r.score, "snippet": r.snippet}
                    for r in ranked
                ],
                "snapshot_version": snapshot.model.version,
            }

    def top_words(self, mp: ManagedProject, topic: int, n: int) -> dict:
        with mp.lock:
            project = mp.project
            snapshot = project.snapshot
            if snapshot is None:
                raise StaleModel("train the project first")
            model = snapshot.model
            if not (0 <= topic < model.k):
                raise NotFound(f"topic {topic} out of range")
            binding = model.topic_meta[topic]
            name = None
            if binding is not None:
                theme = project.store.themes.get(binding.theme_id)
                name = theme.name if theme else f"theme {binding.theme_id}"
            return {
                "topic": topic,
                "theme_id": binding.theme_id if binding else None,
                "name": name,
                "words": [
                    {"word": w, "probability": p}
                    for w, p in model.top_words(topic, n, project.corpus().vocabulary)
                ],
                "snapshot_version": model.version,
            }

    def explain(self, mp: ManagedProject, doc_id: str, theme_id: int) -> dict:
        with mp.lock:
            project = mp.project
            snapshot = project.snapshot
            if snapshot is None:
                raise StaleModel("train the project first")
            state = snapshot.doc_states.get(doc_id)
            doc = self._doc(mp, doc_id)
            if state is not None and state.phi is None:
                # snapshot reloaded from disk: responsibilities are recomputed
                # on demand against the current constraints
                constraints = project.store.constraints(project.documents_by_id())
                state.phi = e_step_document(
                    doc, snapshot.model, constraints, snapshot.config,
                    init_gamma=state.gamma,
                ).phi
            if state is None:
                raise NotFound(f"no topic state for document {doc_id}")
            entries = explain_assignment(
                doc_id, theme_id, snapshot.doc_states, snapshot.model, project.corpus()
            )
            return {
                "doc_id": doc_id,
                "theme_id": theme_id,
                "words": [
                    {
                        "word": word,
                        "spans": [list(s) for s in spans],
                        "contribution": contribution,
                    }
                    for word, spans, contribution in entries
                ],
                "snapshot_version": snapshot.model.version,
            }

    # -- training ------------------------------------------------------------------

    def start_training(self, mp: ManagedProject, overrides: Optional[dict] = None) -> dict:
        with mp.lock:
            if mp.active_job and mp.active_job.state in ("queued", "running"):
                raise Busy("a training job is already running")
            if not mp.project.documents:
                raise NotFound("project has no documents to train on")
            merged = {**mp.project.train.to_json(), **(overrides or {})}
            config = TrainConfig.from_json(merged)
            job = TrainingJob(
                job_id=mp.next_job_id(),
                project_id=mp.project.project_id,
                config=config,
            )
            mp.jobs[job.job_id] = job
            mp.active_job = job
        thread = threading.Thread(target=self._run_training, args=(mp, job), daemon=True)
        thread.start()
        return job.to_json()

    def get_job(self, mp: ManagedProject, job_id: str) -> dict:
        with mp.lock:
            job = mp.jobs.get(job_id)
            if job is None:
                raise NotFound(f"job {job_id} does not exist")
            return job.to_json()

    def cancel_job(self, mp: ManagedProject, job_id: str) -> dict:
        """Request cancellation; the fit stops at the next iteration boundary.
        Terminal jobs are left untouched (terminal states are immutable)."""
        with mp.lock:
            job = mp.jobs.get(job_id)
            if job is None:
                raise NotFound(f"job {job_id} does not exist")
            if job.state in ("queued", "running"):
                job.cancel_requested = True
            return job.to_json()

    def _run_training(self, mp: ManagedProject, job: TrainingJob) -> None:
        def cancel_requested() -> bool:
            with mp.lock:
                return job.cancel_requested

        try:
            with mp.lock:
                job.state = "running"
                job.started_at = datetime.now(timezone.utc).isoformat()
                plan = plan_training(mp.project, job.config)

            # outside the lock: reads never wait on a running fit
            snapshot, trace = execute_plan(plan, should_cancel=cancel_requested)

            with mp.lock:
                persistence.save_snapshot(snapshot, mp.directory)  # write-new-then-swap
                publish_snapshot(mp.project, snapshot, plan)
                persistence.save_annotations(mp.project, mp.directory)
                persistence.save_config(mp.project, mp.directory)
                job.state = "done"
                job.version = snapshot.model.version
                job.trace = trace
        except Cancelled:
            with mp.lock:
                job.state = "cancelled"
        except Exception as exc:  # job surface: fail, keep previous snapshot
            with mp.lock:
                job.state = "failed"
                job.message = f"{type(exc).__name__}: {exc}"
        finally:
            with mp.lock:
                if mp.active_job is job:
                    mp.active_job = None


# -- HTTP layer ------------------------------------------------------------------

_STATUS = {
    NotFound: 404,
    Busy: 409,
    StaleModel: 409,
    EmptySelection: 422,
    SelfMerge: 422,
    LastCode: 422,
    ParseError: 422,
    DuplicateId: 422,
    VersionMismatch: 422,
    StorageError: 500,
}


def _status_for(exc: Exception) -> int:
    for klass, status in _STATUS.items():
        if isinstance(exc, klass):
            return status
    return 422


def _parse_bbox(raw: Optional[str]) -> Optional[tuple[float, float, float, float]]:
    if not raw:
        return None
    parts = raw.split(",")
    if len(parts) != 4:
        raise ValueError("bbox must be min_lat,min_lon,max_lat,max_lon")
    a, b, c, d = (float(x) for x in parts)
    return (a, b, c, d)


def create_app(root: Path, ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="qualda", version="0.1.0")
    manager = ProjectManager(Path(root))
    app.state.manager = manager

    @app.exception_handler(QualdaError)
    async def domain_error(_req: Request, exc: QualdaError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"code": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(ValueError)
    async def value_error(_req: Request, exc: ValueError):
        return JSONResponse(
            status_code=422, content={"code": "ValueError", "message": str(exc)}
        )

    p = API_PREFIX

    @app.post(f"{p}/projects")
    def create_project(body: dict, x_request_id: Optional[str] = Header(default=None)):
        if x_request_id and x_request_id in manager._create_cache:
            return manager._create_cache[x_request_id]
        mp = manager.create_project(
            name=body.get("name", "untitled"),
            stoplist=body.get("stoplist"),
            min_df=body.get("min_df", 1),
            train=body.get("train"),
        )
        summary = manager.project_summary(mp)
        if x_request_id:
            manager._create_cache[x_request_id] = summary
        return summary

    @app.get(f"{p}/projects")
    def list_projects():
        return {"projects": manager.list_projects()}

    @app.get(f"{p}/projects/{{pid}}")
    def get_project(pid: str):
        return manager.project_summary(manager.get(pid))

    @app.post(f"{p}/projects/{{pid}}/documents:import")
    async def import_documents(
        pid: str, request: Request, x_request_id: Optional[str] = Header(default=None)
    ):
        mp = manager.get(pid)
        body = (await request.body()).decode("utf-8")
        _, payload = manager.idempotent(
            mp, x_request_id, lambda: (200, manager.import_documents(mp, body))
        )
        return payload

    @app.get(f"{p}/projects/{{pid}}/documents")
    def list_documents(
        pid: str,
        terms: Optional[str] = None,
        thread: Optional[str] = None,
        bbox: Optional[str] = None,
        topic: Optional[int] = None,
        limit: int = 50,
        offset: int = 0,
    ):
        mp = manager.get(pid)
        if topic is not None:
            return manager.ranked_documents(mp, topic, limit)
        query = SearchQuery(
            terms=[t for t in (terms or "").replace(",", " ").split() if t],
            thread_id=thread,
            geo_box=_parse_bbox(bbox),
            limit=limit,
            offset=offset,
        )
        return manager.search_documents(mp, query)

    @app.get(f"{p}/projects/{{pid}}/documents/{{doc_id}}")
    def document_view(pid: str, doc_id: str):
        return manager.document_view(manager.get(pid), doc_id)

    @app.post(f"{p}/projects/{{pid}}/documents/{{doc_id}}/codes")
    def apply_code(
        pid: str,
        doc_id: str,
        body: dict,
        x_request_id: Optional[str] = Header(default=None),
    ):
        mp = manager.get(pid)
        span = body.get("span")
        if not isinstance(span, (list, tuple)) or len(span) != 2:
            raise ValueError("span must be [start, end]")
        label = body.get("label", "")
        _, payload = manager.idempotent(
            mp,
            x_request_id,
            lambda: (
                200,
                manager.apply_code(mp, doc_id, (int(span[0]), int(span[1])), label),
            ),
        )
        return payload

    @app.delete(f"{p}/projects/{{pid}}/documents/{{doc_id}}/codes/{{code_id}}")
    def delete_code(
        pid: str,
        doc_id: str,
        code_id: int,
        x_request_id: Optional[str] = Header(default=None),
    ):
        mp = manager.get(pid)
        _, payload = manager.idempotent(
            mp, x_request_id, lambda: (200, manager.delete_auto_code(mp, doc_id, code_id))
        )
        return payload

    @app.get(f"{p}/projects/{{pid}}/themes")
    def list_themes(pid: str):
        return manager.list_themes(manager.get(pid))

    @app.post(f"{p}/projects/{{pid}}/themes/{{theme_id}}/merge")
    def merge_codes(
        pid: str,
        theme_id: int,
        body: dict,
        x_request_id: Optional[str] = Header(default=None),
    ):
        mp = manager.get(pid)
        _, payload = manager.idempotent(
            mp,
            x_request_id,
            lambda: (200, manager.merge_codes(mp, theme_id, int(body["code_id"]))),
        )
        return payload

    @app.post(f"{p}/projects/{{pid}}/themes/{{theme_id}}/split")
    def split_code(
        pid: str,
        theme_id: int,
        body: dict,
        x_request_id: Optional[str] = Header(default=None),
    ):
        mp = manager.get(pid)
        _, payload = manager.idempotent(
            mp,
            x_request_id,
            lambda: (200, manager.split_code(mp, theme_id, int(body["code_id"]))),
        )
        return payload

    @app.patch(f"{p}/projects/{{pid}}/themes/{{theme_id}}")
    def rename_theme(
        pid: str,
        theme_id: int,
        body: dict,
        x_request_id: Optional[str] = Header(default=None),
    ):
        mp = manager.get(pid)
        _, payload = manager.idempotent(
            mp,
            x_request_id,
            lambda: (200, manager.rename_theme(mp, theme_id, body.get("name", ""))),
        )
        return payload

    @app.post(f"{p}/projects/{{pid}}/train")
    def start_training(
        pid: str, body: Optional[dict] = None, x_request_id: Optional[str] = Header(default=None)
    ):
        mp = manager.get(pid)
        _, payload = manager.idempotent(
            mp, x_request_id, lambda: (200, manager.start_training(mp, body or {}))
        )
        return payload

    @app.get(f"{p}/projects/{{pid}}/jobs/{{job_id}}")
    def get_job(pid: str, job_id: str):
        return manager.get_job(manager.get(pid), job_id)

    @app.post(f"{p}/projects/{{pid}}/jobs/{{job_id}}:cancel")
    def cancel_job(pid: str, job_id: str):
        return manager.cancel_job(manager.get(pid), job_id)

    @app.get(f"{p}/projects/{{pid}}/topics/{{topic}}/top-words")
    def top_words(pid: str, topic: int, n: int = 10):
        return manager.top_words(manager.get(pid), topic, n)

    @app.get(f"{p}/projects/{{pid}}/topics/{{topic}}/documents")
    def topic_documents(pid: str, topic: int, n: int = 10):
        return manager.ranked_by_topic_index(manager.get(pid), topic, n)

    @app.get(f"{p}/projects/{{pid}}/documents/{{doc_id}}/explain/{{theme_id}}")
    def explain(pid: str, doc_id: str, theme_id: int):
        return manager.explain(manager.get(pid), doc_id, theme_id)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
