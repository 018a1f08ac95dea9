"""Batch entry point: import corpora, train headlessly, inspect topics,
export bundles, and launch the REST service.

Exit codes: 0 success, 1 user/domain error, 2 internal error. Training
progress goes to stderr; result tables go to stdout in a stable order
(topic index, then probability descending, then word ascending) so runs
with a fixed --rng-seed are reproducible byte for byte.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import persistence
from .engine import TrainConfig
from .errors import DuplicateId, QualdaError, StaleModel
from .persistence import Project, load_project, save_project, write_bundle
from .training import execute_plan, plan_training, publish_snapshot

TRAIN_FLAGS = [
    click.option("--rng-seed", type=int, default=None, help="Random seed for free-topic initialization."),
    click.option("--k-free", type=int, default=None, help="Free topics beyond the themed ones."),
    click.option("--alpha", type=float, default=None, help="Document-topic Dirichlet concentration."),
    click.option("--eta", type=float, default=None, help="Topic-word smoothing."),
    click.option("--seed-mass", type=float, default=None, help="Initial probability mass on coded words."),
    click.option("--max-iters", type=int, default=None, help="EM iteration cap."),
    click.option("--tol", type=float, default=None, help="Relative objective change for convergence."),
    click.option("--global-exclusion/--no-global-exclusion", default=None,
                 help="Zero deleted words in the topics themselves, not just per document."),
    click.option("--tau-token", type=float, default=None, help="Token auto-code threshold."),
    click.option("--tau-doc", type=float, default=None, help="Document topic-list threshold."),
]

_FLAG_TO_CONFIG = {
    "rng_seed": "rng_seed",
    "k_free": "k_free",
    "alpha": "alpha",
    "eta": "eta",
    "seed_mass": "seed_mass",
    "max_iters": "max_em_iters",
    "tol": "conv_tol",
    "global_exclusion": "global_exclusion",
    "tau_token": "tau_token",
    "tau_doc": "tau_doc",
}


def train_flags(fn):
    for flag in reversed(TRAIN_FLAGS):
        fn = flag(fn)
    return fn


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except QualdaError as exc:
            click.echo(f"error: {exc}", err=True)
            if isinstance(exc, StaleModel):
                click.echo("hint: run `qualda train` first", err=True)
            sys.exit(1)
        except (OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except Exception as exc:  # pragma: no cover - defensive
            click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(2)

    return wrapper


def overrides_from_flags(kwargs) -> dict:
    return {
        _FLAG_TO_CONFIG[k]: v
        for k, v in kwargs.items()
        if k in _FLAG_TO_CONFIG and v is not None
    }


def resolved_config(project: Project, kwargs) -> TrainConfig:
    merged = {**project.train.to_json(), **overrides_from_flags(kwargs)}
    return TrainConfig.from_json(merged)


def load_or_create(project_dir: Path) -> Project:
    if (project_dir / persistence.CONFIG_FILE).exists():
        return load_project(project_dir)
    return Project(project_id=project_dir.name or "project", name=project_dir.name or "project")


def topic_label(project: Project, binding) -> str:
    if binding is None:
        return "free"
    theme = project.store.themes.get(binding.theme_id)
    return theme.name if theme else f"theme {binding.theme_id}"


def print_topics(project: Project, n_words: int) -> None:
    snapshot = project.snapshot
    if snapshot is None:
        raise StaleModel("no trained model in this project")
    model = snapshot.model
    vocab = project.corpus().vocabulary
    click.echo(f"model version {model.version}: {model.k} topics "
               f"({len(model.themed_indices())} themed + {len(model.free_indices())} free)")
    for k in range(model.k):
        label = topic_label(project, model.topic_meta[k])
        click.echo(f"topic {k} [{label}]")
        for word, prob in model.top_words(k, n_words, vocab):
            click.echo(f"  {word:<20s} {prob:.6f}")


@click.group()
def main() -> None:
    """Semi-supervised topic-modeling workbench for qualitative coding."""


@main.command("import")
@click.option("--project", "project_dir", required=True, type=click.Path(path_type=Path))
@click.argument("jsonl_path", type=click.Path(exists=True, path_type=Path))
@handle_errors
def cmd_import(project_dir: Path, jsonl_path: Path) -> None:
    """Add a JSON-Lines corpus file to the project (creating it if needed)."""
    from .corpus import build_vocabulary, ingest_jsonl

    project = load_or_create(project_dir)
    with open(jsonl_path, encoding="utf-8") as fh:
        incoming = ingest_jsonl(fh)
    existing = {d.doc_id for d in project.documents}
    for doc in incoming:
        if doc.doc_id in existing:
            raise DuplicateId(doc.doc_id)
    project.documents.extend(incoming)
    if project.documents:
        project.vocabulary = build_vocabulary(
            project.documents, project.stoplist, project.min_df
        )
    save_project(project, project_dir)
    v = project.vocabulary.V if project.vocabulary else 0
    click.echo(f"{len(project.documents)} documents, V={v}")


@main.command("train")
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True, path_type=Path))
@train_flags
@handle_errors
def cmd_train(project_dir: Path, **kwargs) -> None:
    """Run constrained variational EM synchronously and print the topics."""
    project = load_project(project_dir)
    config = resolved_config(project, kwargs)

    def progress(iteration: int, objective: float) -> None:
        click.echo(f"iter {iteration:3d}  elbo {objective:.6f}", err=True)

    plan = plan_training(project, config)
    snapshot, trace = execute_plan(plan, progress=progress)
    publish_snapshot(project, snapshot, plan)
    project.train = config
    save_project(project, project_dir)
    if not trace.converged:
        click.echo(
            f"warning: stopped at max_em_iters={config.max_em_iters} before convergence",
            err=True,
        )
    if trace.degenerate_rows:
        click.echo(
            f"warning: {trace.degenerate_rows} fully-forbidden token rows fell back to free topics",
            err=True,
        )
    print_topics(project, n_words=10)


@main.command("topics")
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("-n", "n_words", type=int, default=10, show_default=True)
@handle_errors
def cmd_topics(project_dir: Path, n_words: int) -> None:
    """Print each topic's name and top-n words with probabilities."""
    print_topics(load_project(project_dir), n_words)


@main.command("export")
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.argument("out_path", type=click.Path(path_type=Path))
@handle_errors
def cmd_export(project_dir: Path, out_path: Path) -> None:
    """Write the whole project (model + annotations + corpus) as one JSON bundle."""
    project = load_project(project_dir)
    if project.snapshot is None:
        raise StaleModel("no trained model to export")
    write_bundle(project, out_path)
    click.echo(f"exported to {out_path}")


@main.command("serve")
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--port", type=int, default=8800, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(path_type=Path), default=None,
              help="Directory with the built web client to serve at /.")
@handle_errors
def cmd_serve(project_dir: Path, port: int, host: str, ui_dir: Path | None) -> None:
    """Serve the REST API (and optionally the web UI) for a project root."""
    import uvicorn

    from .service import create_app

    app = create_app(project_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
