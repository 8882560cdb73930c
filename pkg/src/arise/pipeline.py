"""End-to-end run orchestration over the phase state machine.

Each phase handler loads its inputs from the previous phase's persisted
artifact and commits its own through ``RunDirectory.advance``, so a run can
be resumed at any phase boundary with no in-memory carryover. Operator
aborts checkpoint the current phase instead of failing the run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .agents import default_registry
from .bibtex import complete_citation, parse_bibliography
from .citations import Citation, dedupe_and_validate, retrieve_candidates
from .compose import Draft, assemble, draft_section, edit_section, outline_sections, render_plaintext
from .errors import AriseError
from .gateway import Gateway, HttpChatProvider, ModelIdentity, ScriptedProvider
from .jsonutil import dump_json, dump_text
from .kb import CkmStore, ErrorList, build_kb
from .latexfmt import render_manuscript
from .outline import MergeAudit, Outline, synthesize
from .refine import ReviewerPool, RoundRecord, paginate, run_refinement
from .resolve import Resolver, StubResolver
from .rubric import Rubric, builtin_rubric
from .runstate import Artifact, Phase, RunConfig, RunDirectory
from .topics import Decision, SourcePlan, TopicSet, apply_user_decision, expand_topics, scope_domains

logger = logging.getLogger(__name__)


class AbortRequested(Exception):
    """Operator abort: stop executing, leave the checkpoint intact."""


class DecisionSource(Protocol):
    def next_decision(self, topics: TopicSet) -> Decision: ...


class AutoApprove:
    """Non-interactive approval: accept every proposed subtopic, finalize."""

    def next_decision(self, topics: TopicSet) -> Decision:
        for i, subtopic in enumerate(topics.proposed):
            if subtopic not in topics.approved:
                return Decision("approve", index=i)
        return Decision("finalize")


class DecisionQueue:
    """Approval decisions posted through the API, consumed in file order.

    The JSONL queue doubles as the replay log for API-driven mutations.
    Blocks (poll + sleep) until a new decision arrives or the wait budget
    runs out.
    """

    def __init__(self, run_root: Path | str, poll_interval: float = 0.2, max_wait: float = 600.0):
        self.queue_path = Path(run_root) / "phase_scoping" / "decisions.jsonl"
        self.poll_interval = poll_interval
        self.max_wait = max_wait
        self._consumed = 0

    def next_decision(self, topics: TopicSet) -> Decision:
        import json
        import time

        waited = 0.0
        while True:
            if self.queue_path.exists():
                lines = self.queue_path.read_text(encoding="utf-8").splitlines()
                if len(lines) > self._consumed:
                    raw = json.loads(lines[self._consumed])
                    self._consumed += 1
                    return Decision.from_dict(raw)
            if waited >= self.max_wait:
                raise AriseError(
                    f"no approval decision arrived within {self.max_wait:.0f}s; aborting scoping"
                )
            time.sleep(self.poll_interval)
            waited += self.poll_interval


@dataclass
class RunContext:
    run: RunDirectory
    gateway: Gateway
    reviewer_pool: ReviewerPool
    resolver: Resolver
    decisions: DecisionSource
    rubric: Rubric

    @property
    def config(self) -> RunConfig:
        return self.run.config


def build_scripted_context(
    fixture_dir: Path | str,
    config: RunConfig,
    run_root: Path | str,
    decisions: DecisionSource | None = None,
) -> RunContext:
    """Wire a fully offline run from a fixture directory.

    Expects ``script.json`` (provider entries) and ``corpus/`` (stub
    resolver records); one scripted stream serves every agent role.
    """
    fixture_dir = Path(fixture_dir)
    run = RunDirectory(run_root, config)
    provider = ScriptedProvider.from_file(fixture_dir / "script.json")
    gateway = Gateway(
        provider, default_registry(), transcript_dir=run.root / "calls", seed=config.seed
    )
    pool: ReviewerPool = [(identity, gateway) for identity in config.reviewer_pool]
    return RunContext(
        run=run,
        gateway=gateway,
        reviewer_pool=pool,
        resolver=StubResolver.from_dir(fixture_dir / "corpus"),
        decisions=decisions or AutoApprove(),
        rubric=builtin_rubric(),
    )


def build_live_context(
    config: RunConfig,
    run_root: Path | str,
    resolver: Resolver,
    decisions: DecisionSource,
    rubric: Rubric | None = None,
) -> RunContext:
    """Wire live providers: one per model family, keyed from environment."""
    run = RunDirectory(run_root, config)
    registry = default_registry()
    providers: dict[str, HttpChatProvider] = {}

    def provider_for(identity: ModelIdentity) -> HttpChatProvider:
        if identity.family not in providers:
            providers[identity.family] = HttpChatProvider(identity)
        return providers[identity.family]

    gateway = Gateway(
        provider_for(config.generator_identity),
        registry,
        transcript_dir=run.root / "calls",
        seed=config.seed,
    )
    pool: ReviewerPool = [
        (
            identity,
            Gateway(
                provider_for(identity),
                registry,
                transcript_dir=run.root / "calls" / identity.family,
                seed=config.seed,
            ),
        )
        for identity in config.reviewer_pool
    ]
    return RunContext(
        run=run,
        gateway=gateway,
        reviewer_pool=pool,
        resolver=resolver,
        decisions=decisions,
        rubric=rubric or builtin_rubric(),
    )


def _check_abort(run: RunDirectory) -> None:
    if (run.root / "abort.flag").exists():
        raise AbortRequested(f"abort requested for {run.run_id}")


# --- phase handlers -------------------------------------------------------------


def _phase_scoping(ctx: RunContext) -> None:
    config = ctx.config
    proposed = expand_topics(config.topic_seed, ctx.gateway)
    topics = TopicSet(seed=config.topic_seed, proposed=proposed)
    snapshot_path = ctx.run.phase_dir(Phase.Scoping) / "topics.json"
    dump_json(snapshot_path, topics.to_dict())
    while not topics.finalized:
        _check_abort(ctx.run)
        decision = ctx.decisions.next_decision(topics)
        try:
            topics = apply_user_decision(topics, decision, now=f"t{len(topics.revision_log)}")
        except (AriseError, ValueError) as exc:
            # Queued decisions can go stale against a moving topic set;
            # skip them rather than killing the run.
            logger.warning("skipping invalid decision %s: %s", decision, exc)
            continue
        dump_json(snapshot_path, topics.to_dict())
    plan = scope_domains(topics, ctx.gateway)
    ctx.run.advance(
        Artifact(
            kind="approved_topics",
            files={"topics.json": topics.to_dict(), "source_plan.json": plan.to_dict()},
        )
    )


def _phase_citation_prep(ctx: RunContext) -> None:
    plan = SourcePlan.from_dict(ctx.run.load_artifact(Phase.Scoping)["source_plan.json"])
    outcome = retrieve_candidates(plan, ctx.resolver, ctx.config.candidates_per_pair)
    curated, report = dedupe_and_validate(outcome.candidates)
    if not curated:
        raise AriseError("no curated citations survived retrieval and validation")
    ctx.run.advance(
        Artifact(
            kind="curated_citations",
            files={
                "citations.json": [c.to_dict() for c in curated],
                "curation_report.json": report.to_dict(),
                "retrieval_failures.json": outcome.failures,
            },
        )
    )


def _phase_kb(ctx: RunContext) -> None:
    raw = ctx.run.load_artifact(Phase.CitationPrep)["citations.json"]
    citations = [Citation.from_dict(c) for c in raw]
    store, errors = build_kb(citations, ctx.resolver, ctx.gateway)
    ctx.run.advance(
        Artifact(
            kind="knowledge_base",
            files={"ckm.json": store.to_dict(), "errors.json": errors.to_dict()},
        )
    )


def _phase_outline(ctx: RunContext) -> None:
    store = CkmStore.from_dict(ctx.run.load_artifact(Phase.KbBuild)["ckm.json"])
    if len(store) == 0:
        raise AriseError("knowledge base is empty; every citation landed on the error list")
    audits: list[MergeAudit] = []
    outline = synthesize(store, ctx.gateway, ctx.config.batch_size, audit_sink=audits)
    ctx.run.advance(
        Artifact(
            kind="final_outline",
            files={
                "outline.json": outline.to_dict(),
                "merge_audits.json": [a.to_dict() for a in audits],
            },
        )
    )


def _phase_compose(ctx: RunContext) -> None:
    files = ctx.run.load_artifact(Phase.Outline)
    outline = Outline.from_dict(files["outline.json"])
    store = CkmStore.from_dict(ctx.run.load_artifact(Phase.KbBuild)["ckm.json"])
    skeleton = "\n".join(
        f"{'  ' * (node.level - 1)}- {node.title}" for _sid, node in outline_sections(outline)
    )
    bodies: dict[str, tuple[str, list[str]]] = {}
    prev_tail = ""
    for sid, node in outline_sections(outline):
        _check_abort(ctx.run)
        evidence, missing = store.query(node.cite_keys)
        if missing:
            logger.info("section %s lacks summaries for %s (error-list keys)", sid, sorted(missing))
        body, flags = draft_section(node, evidence, ctx.gateway, skeleton)
        body, reverted = edit_section(body, ctx.gateway, prev_tail=prev_tail)
        if reverted:
            flags = flags + ["edit_reverted"]
        bodies[sid] = (body, flags)
        paragraphs = [p for p in body.split("\n\n") if p.strip()]
        prev_tail = paragraphs[-1] if paragraphs else ""
    draft = assemble(outline, bodies, ctx.gateway, store)
    ctx.run.advance(
        Artifact(
            kind="unified_draft",
            files={"draft.json": draft.to_dict(), "draft.txt": render_plaintext(draft)},
        )
    )


def _phase_format(ctx: RunContext) -> None:
    draft = Draft.from_dict(ctx.run.load_artifact(Phase.Compose)["draft.json"])
    raw = ctx.run.load_artifact(Phase.CitationPrep)["citations.json"]
    citations = [Citation.from_dict(c) for c in raw]
    entries = []
    completion_flags: dict[str, list[str]] = {}
    for citation in citations:
        entry, flags = complete_citation(citation, ctx.resolver)
        entries.append(entry)
        if flags:
            completion_flags[citation.ref_id] = flags
    project = render_manuscript(draft, entries, ctx.config.target_template)
    report = project.hygiene.to_dict()
    report["completion_flags"] = completion_flags
    report["unused_bib_keys"] = project.unused_bib_keys
    ctx.run.advance(
        Artifact(
            kind="manuscript",
            files={
                "main.tex": project.main_tex,
                "references.bib": project.bibliography,
                "hygiene_report.json": report,
            },
        )
    )


def _phase_refine(ctx: RunContext) -> None:
    draft = Draft.from_dict(ctx.run.load_artifact(Phase.Compose)["draft.json"])
    store = CkmStore.from_dict(ctx.run.load_artifact(Phase.KbBuild)["ckm.json"])
    bib = parse_bibliography(ctx.run.load_artifact(Phase.Format)["references.bib"])
    config = ctx.config
    trajectory_display: list[float] = []

    def persist_round(record: RoundRecord) -> None:
        _check_abort(ctx.run)
        rdir = ctx.run.rounds_dir(record.round_t)
        dump_json(rdir / "draft.json", record.draft.to_dict())
        project = render_manuscript(record.draft, bib, config.target_template)
        dump_text(rdir / "draft.tex", project.main_tex)
        for review in record.reviews:
            name = f"{review.reviewer.family}_{review.reviewer.model_name}_{review.chunk_index}.json"
            dump_json(rdir / "reviews" / name, review.to_dict())
        dump_json(
            rdir / "scores.json",
            {
                "totals": record.totals,
                "avg": record.average,
                "avg_display": round(record.average, 1),
                "decision": record.decision.value,
                "missing_cells": [list(c) for c in record.missing_cells],
                "page_estimator": "chars3500",
            },
        )
        if record.plan is not None:
            dump_json(rdir / "plan.json", record.plan.to_dict())
        trajectory_display.append(round(record.average, 1))
        dump_json(
            ctx.run.root / "trajectory.json",
            {"tau": config.threshold_tau, "points": trajectory_display},
        )
        ctx.run.record_round(record.average)

    final, trajectory, records = run_refinement(
        draft,
        ctx.reviewer_pool,
        store,
        ctx.rubric,
        ctx.gateway,
        tau=config.threshold_tau,
        max_rounds=config.max_rounds,
        chunk_pages=config.chunk_pages,
        render_pages=lambda d: paginate(render_plaintext(d)),
        round_hook=persist_round,
    )
    best_round = max(range(len(trajectory)), key=trajectory.__getitem__)
    accepted = records[-1].decision.value == "accept"
    ctx.run.state.best_round = best_round
    ctx.run.advance(
        Artifact(
            kind="refinement_result",
            files={
                "refinement.json": {
                    "accepted": accepted,
                    "final_round": records[-1].round_t,
                    "trajectory": trajectory,
                    "trajectory_display": trajectory_display,
                    "best_round": best_round,
                    # Rejected runs emit the last draft; the best-scoring
                    # round is recorded as a deviation candidate.
                    "deviation_candidate": (not accepted) and best_round != records[-1].round_t,
                    "page_estimator": "chars3500",
                },
                "final_draft.json": final.to_dict(),
            },
        )
    )


_HANDLERS = {
    Phase.Scoping: _phase_scoping,
    Phase.CitationPrep: _phase_citation_prep,
    Phase.KbBuild: _phase_kb,
    Phase.Outline: _phase_outline,
    Phase.Compose: _phase_compose,
    Phase.Format: _phase_format,
    Phase.Refine: _phase_refine,
}


def execute_run(ctx: RunContext):
    """Drive the run from its current phase to Done, Failed, or abort."""
    run = ctx.run
    while run.state.phase not in (Phase.Done, Phase.Failed):
        handler = _HANDLERS[run.state.phase]
        logger.info("run %s: executing phase %s", run.run_id, run.state.phase.value)
        try:
            _check_abort(run)
            handler(ctx)
        except AbortRequested:
            logger.warning("run %s aborted during %s; checkpoint kept", run.run_id, run.state.phase.value)
            return run.state
        except AriseError as exc:
            logger.error("run %s failed in %s: %s", run.run_id, run.state.phase.value, exc)
            run.fail(f"{run.state.phase.value}: {exc}")
            return run.state
    return run.state


def refinement_summary(run: RunDirectory) -> dict | None:
    if run.state.artifacts.get(Phase.Refine.value) is None:
        return None
    return run.load_artifact(Phase.Refine)["refinement.json"]
