"""Command-line entry points: corpus building, serving, and simulation."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional

import click
import yaml

from .corpus import (
    DEFAULT_K1,
    DEFAULT_K2,
    DEFAULT_MIN_FRACTION,
    builtin_seed_set,
    embed_questions,
    filter_rare_clusters,
    generate_questions,
    hierarchical_cluster,
    parse_documents,
    select_seed_questions,
    write_corpus_file,
)
from .gateway import BackendConfig, HashEmbedder, HttpBackend, ScriptedBackend
from .service import SessionStore, load_events, replay_events
from .simulate import Persona, run_interview
from .termination import TerminationConfig

logger = logging.getLogger(__name__)


def _load_config(path: Optional[str]) -> TerminationConfig:
    if not path:
        return TerminationConfig()
    with open(path, "r", encoding="utf-8") as handle:
        mapping = yaml.safe_load(handle) or {}
    return TerminationConfig.from_mapping(mapping)


def _make_backend(backend_script: Optional[str]) -> Any:
    """Scripted backend when a script is given, HTTP otherwise."""
    if backend_script:
        return ScriptedBackend.from_file(backend_script)
    return HttpBackend(BackendConfig.from_env())


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Adaptive medical-interview engine."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.group()
def corpus() -> None:
    """Build or inspect seed question corpora."""


@corpus.command("build")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--k1", default=DEFAULT_K1, show_default=True, help="Broad cluster count.")
@click.option("--k2", default=DEFAULT_K2, show_default=True, help="Refined cluster count.")
@click.option("--min-fraction", default=DEFAULT_MIN_FRACTION, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--backend-script", type=click.Path(exists=True), default=None,
              help="Scripted backend file; offline hash embeddings are used with it.")
@click.option("--embed-dim", default=256, show_default=True,
              help="Hash-embedder dimensionality (scripted runs only).")
def corpus_build(
    input_path: str,
    k1: int,
    k2: int,
    min_fraction: float,
    seed: int,
    output_path: str,
    backend_script: Optional[str],
    embed_dim: int,
) -> None:
    """Documents in, clustered and prioritized seed questions out."""
    backend = _make_backend(backend_script)
    if backend_script:
        backend.embedder = HashEmbedder(dim=embed_dim, seed=seed)
    with open(input_path, "r", encoding="utf-8") as handle:
        parsed = parse_documents(handle)
    if parsed.rejects:
        click.echo(f"rejected {len(parsed.rejects)} malformed record(s)", err=True)
    candidates = []
    for doc in parsed.documents:
        candidates.extend(generate_questions(doc, backend))
    click.echo(f"generated {len(candidates)} candidate question(s) from {len(parsed.documents)} document(s)")
    embedded = embed_questions(candidates, backend)
    tree = hierarchical_cluster(embedded, k1=k1, k2=k2, seed=seed)
    tree = filter_rare_clusters(tree, min_fraction)
    seeds = select_seed_questions(tree, embedded)
    embedder_id = getattr(getattr(backend, "embedder", None), "embedder_id", None)
    write_corpus_file(
        output_path,
        seeds,
        tree=tree,
        provenance={
            "k1": k1,
            "k2": k2,
            "seed": seed,
            "min_fraction": min_fraction,
            "embedder_id": embedder_id or "remote",
            "documents": len(parsed.documents),
        },
    )
    click.echo(f"wrote {len(seeds)} seed question(s) to {output_path}")


@corpus.command("seeds")
@click.option("--builtin", "use_builtin", is_flag=True, required=True,
              help="Emit the shipped seed set.")
@click.option("--output", "output_path", type=click.Path(), default=None,
              help="Write to a corpus file instead of stdout.")
def corpus_seeds(use_builtin: bool, output_path: Optional[str]) -> None:
    """Emit the built-in prioritized seed questions."""
    seeds = builtin_seed_set()
    if output_path:
        write_corpus_file(output_path, seeds, provenance={"source": "builtin"})
        click.echo(f"wrote {len(seeds)} seed question(s) to {output_path}")
    else:
        click.echo(json.dumps([s.to_wire() for s in seeds], indent=2))


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--corpus", "corpus_source", default="builtin", show_default=True,
              help="'builtin' or a corpus file path.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--logs", "log_dir", type=click.Path(), default="./sessions", show_default=True)
@click.option("--backend-script", type=click.Path(exists=True), default=None,
              help="Run fully offline against a scripted backend.")
@click.option("--api-token", default=None, help="Require this bearer token on every call.")
@click.option("--ui-dist", type=click.Path(exists=True), default=None,
              help="Serve a built web UI from this directory.")
def serve(
    port: int,
    host: str,
    corpus_source: str,
    config_path: Optional[str],
    log_dir: str,
    backend_script: Optional[str],
    api_token: Optional[str],
    ui_dist: Optional[str],
) -> None:
    """Run the interview HTTP service."""
    import uvicorn

    from .api import create_app

    store = SessionStore(
        backend=_make_backend(backend_script),
        seed_source=corpus_source,
        termination=_load_config(config_path),
        log_dir=log_dir,
    )
    app = create_app(store, api_token=api_token, ui_dir=ui_dist)
    uvicorn.run(app, host=host, port=port)


@main.group()
def interview() -> None:
    """Headless interview runs."""


@interview.command("run")
@click.option("--scripted", "persona_path", required=True, type=click.Path(exists=True),
              help="Persona file answering the questions.")
@click.option("--backend-script", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_source", default="builtin", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for the event log and report.")
def interview_run(
    persona_path: str,
    backend_script: str,
    corpus_source: str,
    config_path: Optional[str],
    out_dir: Optional[str],
) -> None:
    """Simulate a complete interview with a scripted patient."""
    _simulate(persona_path, backend_script, corpus_source, config_path, out_dir)


@main.command()
@click.option("--persona", "persona_path", required=True, type=click.Path(exists=True))
@click.option("--backend-script", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_source", default="builtin", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def simulate(
    persona_path: str,
    backend_script: str,
    corpus_source: str,
    config_path: Optional[str],
    out_dir: Optional[str],
) -> None:
    """Alias of `interview run` with the persona/backend script pair."""
    _simulate(persona_path, backend_script, corpus_source, config_path, out_dir)


def _simulate(
    persona_path: str,
    backend_script: str,
    corpus_source: str,
    config_path: Optional[str],
    out_dir: Optional[str],
) -> None:
    persona = Persona.from_file(persona_path)
    backend = ScriptedBackend.from_file(backend_script)
    result = run_interview(
        persona,
        backend,
        termination=_load_config(config_path),
        seed_source=corpus_source,
        log_dir=out_dir,
    )
    click.echo(
        f"session {result.session_id}: {result.turns} turn(s), "
        f"score {result.score:.2f}, reason {result.reason}"
    )
    if out_dir:
        report_path = Path(out_dir) / f"{result.session_id}.report.json"
        with open(report_path, "w", encoding="utf-8") as handle:
            json.dump(result.report.to_wire(), handle, indent=2)
            handle.write("\n")
        click.echo(f"report written to {report_path}")
    else:
        click.echo(result.report.render_text())


@main.group()
def report() -> None:
    """Work with stored session reports."""


@report.command("render")
@click.option("--session", "session_id", required=True)
@click.option("--logs", "log_dir", type=click.Path(exists=True), default="./sessions",
              show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
def report_render(session_id: str, log_dir: str, fmt: str) -> None:
    """Render the report of a persisted session."""
    path = Path(log_dir) / f"{session_id}.jsonl"
    if not path.exists():
        click.echo(f"no event log for session {session_id} under {log_dir}", err=True)
        sys.exit(1)
    session = replay_events(load_events(path))
    if session.report is None:
        click.echo(f"session {session_id} has no generated report yet", err=True)
        sys.exit(1)
    if fmt == "json":
        click.echo(json.dumps(session.report.to_wire(), indent=2))
    else:
        click.echo(session.report.render_text())


if __name__ == "__main__":
    main()
