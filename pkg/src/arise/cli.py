"""Operator CLI: batch runs, traceability audits, reliability scores, serving.

Exit codes for ``run``: 0 when the draft is accepted, 2 when the round
budget stops the loop below threshold, 1 on configuration or pipeline
failure.
"""

from __future__ import annotations

import logging
import os
import sys
import threading
from pathlib import Path

import click

from .agreement import krippendorff_alpha, load_scores_csv
from .audit import ectr_audit, extract_references
from .errors import AriseError, ConfigError
from .gateway import ModelIdentity
from .jsonutil import dump_json
from .pipeline import (
    AutoApprove,
    DecisionQueue,
    build_live_context,
    build_scripted_context,
    execute_run,
    refinement_summary,
)
from .resolve import CompositeResolver, DoiRegistryClient, PreprintArchiveClient, ScholarGraphClient, StubResolver
from .runstate import Phase, RunConfig, RunDirectory
from .topics import Decision, TopicSet

logger = logging.getLogger(__name__)

DEFAULT_REVIEWERS = "openai:gpt-4.1,google:gemini-2.5-pro,anthropic:claude-3.7-sonnet"
DEFAULT_GENERATOR = "openai:gpt-4.1"


def _parse_identities(spec: str, role_tag: str) -> list[ModelIdentity]:
    identities = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ConfigError(f"reviewer spec {part!r} must look like family:model_name")
        family, model_name = part.split(":", 1)
        identities.append(ModelIdentity(family=family.strip(), model_name=model_name.strip(), role_tag=role_tag))
    if not identities:
        raise ConfigError(f"no identities parsed from {spec!r}")
    return identities


class InteractiveApproval:
    """Terminal approval loop mirroring the web UI's decision protocol."""

    def next_decision(self, topics: TopicSet) -> Decision:
        click.echo("\nProposed subtopics:")
        for i, subtopic in enumerate(topics.proposed):
            mark = "*" if subtopic in topics.approved else " "
            click.echo(f"  [{mark}] {i}: {subtopic}")
        click.echo("Commands: approve <i> | remove <i> | add <text> | edit <i> <text> | done")
        while True:
            raw = click.prompt("decision", type=str).strip()
            command, _, rest = raw.partition(" ")
            try:
                if command == "approve":
                    return Decision("approve", index=int(rest))
                if command == "remove":
                    return Decision("remove", index=int(rest))
                if command == "add":
                    return Decision("add", text=rest)
                if command == "edit":
                    index, _, text = rest.partition(" ")
                    return Decision("edit", index=int(index), text=text)
                if command == "done":
                    return Decision("finalize")
            except ValueError:
                pass
            click.echo("unrecognized command")


def _serve_in_background(addr: str, run_root: Path) -> threading.Thread:
    import uvicorn

    from .service import create_app

    host, _, port = addr.partition(":")
    app = create_app(
        run_root,
        admin_token=os.environ.get("ARISE_ADMIN_TOKEN"),
        read_token=os.environ.get("ARISE_READ_TOKEN"),
        ui_dir=os.environ.get("ARISE_UI_DIR"),
    )
    config = uvicorn.Config(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    return thread


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Agentic survey engine."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--topic", required=True, help="Survey theme seed.")
@click.option("--tau", type=float, default=92.0, show_default=True, help="Acceptance threshold.")
@click.option("--max-rounds", type=int, default=5, show_default=True)
@click.option("--reviewers", default=DEFAULT_REVIEWERS, show_default=True, help="family:model,family:model,...")
@click.option("--generator", default=DEFAULT_GENERATOR, show_default=True)
@click.option("--template", default="generic-article", show_default=True, help="Venue template id.")
@click.option("--scripted", type=click.Path(exists=True, file_okay=False), default=None,
              help="Fixture directory (script.json + corpus/) for an offline run.")
@click.option("--non-interactive", is_flag=True, help="Auto-approve all proposed subtopics.")
@click.option("--serve", "serve_addr", default=None, help="host:port to serve the API/UI during the run.")
@click.option("--run-root", type=click.Path(file_okay=False), default=None,
              help="Parent directory for run dirs (or ARISE_RUN_ROOT).")
@click.option("--run-id", default=None, help="Directory name for this run (derived if omitted).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--chunk-pages", type=int, default=3, show_default=True)
def run(topic, tau, max_rounds, reviewers, generator, template, scripted, non_interactive,
        serve_addr, run_root, run_id, seed, chunk_pages):
    """Execute the full survey pipeline for one topic."""
    try:
        config = RunConfig(
            topic_seed=topic,
            reviewer_pool=_parse_identities(reviewers, "reviewer"),
            generator_identity=_parse_identities(generator, "generator")[0],
            max_rounds=max_rounds,
            threshold_tau=tau,
            chunk_pages=chunk_pages,
            target_template=template,
            seed=seed,
        )
        root = Path(run_root or os.environ.get("ARISE_RUN_ROOT") or "runs")
        from .jsonutil import content_address

        run_dir = root / (run_id or "run-" + content_address(config.to_dict())[:12])

        if serve_addr:
            decisions = DecisionQueue(run_dir)
        elif non_interactive:
            decisions = AutoApprove()
        else:
            decisions = InteractiveApproval()

        if scripted:
            ctx = build_scripted_context(scripted, config, run_dir, decisions=decisions)
        else:
            resolver = CompositeResolver(
                [DoiRegistryClient(), ScholarGraphClient(), PreprintArchiveClient()]
            )
            ctx = build_live_context(config, run_dir, resolver, decisions)
    except AriseError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(1)

    if serve_addr:
        _serve_in_background(serve_addr, root)
        click.echo(f"serving run state on http://{serve_addr} (run {ctx.run.run_id})")

    state = execute_run(ctx)
    click.echo(f"run {ctx.run.run_id}: phase={state.phase.value}")
    if state.phase is Phase.Failed:
        click.echo(f"failure: {state.failure}", err=True)
        exit_code = 1
    elif state.phase is not Phase.Done:
        click.echo("run interrupted (checkpoint kept; resume with `arise resume`)")
        exit_code = 1
    else:
        summary = refinement_summary(ctx.run)
        click.echo(f"trajectory: {summary['trajectory_display']}")
        if summary["accepted"]:
            click.echo(f"accepted at round {summary['final_round']}")
            exit_code = 0
        else:
            click.echo(
                f"stopped at max rounds below threshold; emitting last draft "
                f"(best-scoring round was {summary['best_round']})"
            )
            exit_code = 2
    if serve_addr:
        click.echo("run finished; still serving (Ctrl-C to exit)")
        import time

        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass
    sys.exit(exit_code)


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--scripted", type=click.Path(exists=True, file_okay=False), required=True,
              help="Fixture directory used to resume offline.")
@click.option("--non-interactive", is_flag=True)
def resume(run_dir, scripted, non_interactive):
    """Resume an interrupted run from its checkpoint."""
    from .agents import default_registry
    from .gateway import Gateway, ScriptedProvider
    from .pipeline import RunContext
    from .rubric import builtin_rubric

    try:
        run = RunDirectory.resume(run_dir)
        provider = ScriptedProvider.from_file(Path(scripted) / "script.json")
        gateway = Gateway(provider, default_registry(), transcript_dir=run.root / "calls", seed=run.config.seed)
        ctx = RunContext(
            run=run,
            gateway=gateway,
            reviewer_pool=[(identity, gateway) for identity in run.config.reviewer_pool],
            resolver=StubResolver.from_dir(Path(scripted) / "corpus"),
            decisions=AutoApprove() if non_interactive else InteractiveApproval(),
            rubric=builtin_rubric(),
        )
    except AriseError as exc:
        click.echo(f"cannot resume: {exc}", err=True)
        sys.exit(1)
    state = execute_run(ctx)
    click.echo(f"run {run.run_id}: phase={state.phase.value}")
    sys.exit(0 if state.phase is Phase.Done else 1)


@main.command()
@click.option("--in", "in_paths", type=click.Path(exists=True, dir_okay=False), required=True,
              multiple=True, help="Manuscript (.tex), bibliography (.bib), or extracted text; repeatable.")
@click.option("--bib", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Bibliography file (overrides --in for extraction; single-input mode only).")
@click.option("--corpus", type=click.Path(exists=True, file_okay=False), default=None,
              help="Fixture corpus directory for offline matching (default: live registries).")
@click.option("--out", type=click.Path(dir_okay=False), default="ectr_report.json", show_default=True)
def audit(in_paths, bib, corpus, out):
    """Citation traceability audit (eCTR + hallucination rate).

    With several --in manuscripts, per-input reports land next to --out and
    the mean eCTR over the reports is printed and recorded.
    """
    try:
        if bib and len(in_paths) > 1:
            raise ConfigError("--bib applies to a single --in input")
        if corpus:
            resolver = StubResolver.from_dir(corpus)
        else:
            resolver = CompositeResolver(
                [DoiRegistryClient(), ScholarGraphClient(), PreprintArchiveClient()]
            )
        reports = []
        for in_path in in_paths:
            refs = extract_references(Path(bib) if bib else Path(in_path))
            reports.append((in_path, ectr_audit(refs, resolver)))
    except AriseError as exc:
        click.echo(f"audit failed: {exc}", err=True)
        sys.exit(1)

    if len(reports) == 1:
        _path, report = reports[0]
        dump_json(out, report.to_dict())
        click.echo(f"T={report.total} V={report.verified} eCTR={report.ectr:.2f} "
                   f"hallucination={report.hallucination_rate:.2f} -> {out}")
        return

    out_path = Path(out)
    mean_ectr = sum(r.ectr for _p, r in reports) / len(reports)
    summary = {"mean_ectr": mean_ectr, "reports": []}
    for i, (in_path, report) in enumerate(reports, start=1):
        per_path = out_path.with_name(f"{out_path.stem}_{i}{out_path.suffix}")
        dump_json(per_path, report.to_dict())
        summary["reports"].append({"input": str(in_path), "report": str(per_path), "ectr": report.ectr})
        click.echo(f"{in_path}: T={report.total} V={report.verified} eCTR={report.ectr:.2f}")
    dump_json(out_path, summary)
    click.echo(f"mean eCTR over {len(reports)} manuscripts: {mean_ectr:.2f} -> {out_path}")


@main.command()
@click.option("--scores", type=click.Path(exists=True, dir_okay=False), required=True,
              help="raters x items CSV, blank cells = missing.")
def alpha(scores):
    """Inter-rater reliability (interval-level Krippendorff's alpha)."""
    try:
        value = krippendorff_alpha(load_scores_csv(scores))
    except (ValueError, AriseError) as exc:
        click.echo(f"alpha failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"alpha = {value:.6f}")


@main.command()
@click.option("--addr", default="127.0.0.1:8080", show_default=True)
@click.option("--run-root", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None,
              help="Static frontend bundle to mount at /ui.")
def serve(addr, run_root, ui_dir):
    """Serve the run-inspection API (and the web UI if built)."""
    import uvicorn

    from .service import create_app

    root = Path(run_root or os.environ.get("ARISE_RUN_ROOT") or "runs")
    host, _, port = addr.partition(":")
    app = create_app(
        root,
        admin_token=os.environ.get("ARISE_ADMIN_TOKEN"),
        read_token=os.environ.get("ARISE_READ_TOKEN"),
        ui_dir=ui_dir or os.environ.get("ARISE_UI_DIR"),
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080))


if __name__ == "__main__":
    main()
