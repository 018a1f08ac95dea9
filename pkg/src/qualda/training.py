"""Shared training orchestration for the CLI and the service.

A training run is planned against a frozen view of the project (theme seeds,
constraints, pending topic merges, previous snapshot), executed with the
engine, and published back: pending merges consumed, auto annotations
regenerated wholesale against the new snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .annotation import Annotation
from .corpus import Corpus
from .engine import (
    DocTopicState,
    FitTrace,
    ThemeSeed,
    TopicModel,
    TrainConfig,
    fit,
    merge_topics,
    suggest_annotations,
)
from .errors import Cancelled
from .persistence import Project, Snapshot


@dataclass
class FitPlan:
    corpus: Corpus
    seeds: list[ThemeSeed]
    constraints: object
    config: TrainConfig
    prev_model: Optional[TopicModel]
    prev_states: Optional[dict[str, DocTopicState]]
    pending_consumed: int


def plan_training(project: Project, config: TrainConfig) -> FitPlan:
    """Freeze everything the fit needs; call under the project's write lock."""
    corpus = project.corpus()
    docs_by_id = project.documents_by_id()
    seeds = [
        ThemeSeed(theme_id, words)
        for theme_id, words in sorted(project.store.theme_seed_words(docs_by_id).items())
    ]
    constraints = project.store.constraints(docs_by_id)
    pending = list(project.store.pending_merges)

    prev_model = project.snapshot.model if project.snapshot else None
    prev_states = dict(project.snapshot.doc_states) if project.snapshot else None
    if prev_model is not None:
        for kept, retired in pending:
            topic_a = prev_model.topic_for_theme(kept)
            topic_b = prev_model.topic_for_theme(retired)
            if topic_a is not None and topic_b is not None:
                prev_model, prev_states = merge_topics(
                    prev_model, topic_a, topic_b, prev_states or {}
                )
    return FitPlan(
        corpus=corpus,
        seeds=seeds,
        constraints=constraints,
        config=config,
        prev_model=prev_model,
        prev_states=prev_states,
        pending_consumed=len(pending),
    )


def execute_plan(
    plan: FitPlan,
    progress: Optional[Callable[[int, float], None]] = None,
    should_cancel: Optional[Callable[[], bool]] = None,
) -> tuple[Snapshot, FitTrace]:
    """Run the fit; safe to call outside any lock (inputs are frozen).

    Raises Cancelled at the next iteration boundary once should_cancel
    returns True; no snapshot is produced in that case.
    """
    callback = None
    if progress is not None or should_cancel is not None:
        def callback(_model, _states, trace):
            if progress is not None:
                progress(trace.iterations, trace.elbos[-1])
            if should_cancel is not None and should_cancel():
                raise Cancelled("training cancelled")

    model, states, trace = fit(
        plan.corpus,
        plan.seeds,
        plan.constraints,
        plan.config,
        prev=plan.prev_model,
        prev_states=plan.prev_states,
        iter_callback=callback,
    )
    return Snapshot(model=model, doc_states=states, config=plan.config), trace


def publish_snapshot(project: Project, snapshot: Snapshot, plan: FitPlan) -> None:
    """Install the new snapshot in memory; call under the project's lock.

    Consumes exactly the pending merges the plan froze (later ones apply to
    the next run) and regenerates every auto annotation from the new model.
    """
    project.snapshot = snapshot
    del project.store.pending_merges[: plan.pending_consumed]
    regenerate_autos(project)


def regenerate_autos(project: Project) -> None:
    snapshot = project.snapshot
    store = project.store
    if snapshot is None:
        store.replace_auto_annotations([])
        return
    code_for_theme = {
        theme_id: store.primary_code(theme_id).code_id for theme_id in store.themes
    }
    fresh: list[Annotation] = []
    for doc in project.documents:
        state = snapshot.doc_states.get(doc.doc_id)
        if state is None:
            continue
        fresh.extend(
            suggest_annotations(
                doc,
                state,
                snapshot.model,
                snapshot.config,
                code_for_theme=code_for_theme,
                manual_theme_spans=store.manual_spans_by_theme(doc.doc_id),
                deleted_theme_ids=frozenset(store.deleted_theme_ids(doc.doc_id)),
            )
        )
    store.replace_auto_annotations(fresh)
