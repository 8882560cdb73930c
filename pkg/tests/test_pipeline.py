from __future__ import annotations

from pathlib import Path

import pytest

from arise.compose import Draft
from arise.gateway import ModelIdentity
from arise.jsonutil import load_json
from arise.kb import CkmStore
from arise.pipeline import (
    AutoApprove,
    build_scripted_context,
    execute_run,
    refinement_summary,
)
from arise.runstate import Phase, RunConfig, RunDirectory

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "demo_run"

REVIEWERS = [
    ModelIdentity(family="openai", model_name="reviewer-a", role_tag="reviewer"),
    ModelIdentity(family="google", model_name="reviewer-b", role_tag="reviewer"),
    ModelIdentity(family="anthropic", model_name="reviewer-c", role_tag="reviewer"),
]
GENERATOR = ModelIdentity(family="openai", model_name="writer-1", role_tag="generator")


def demo_config(**overrides):
    fields = dict(
        topic_seed="agentic systems for automated survey generation",
        reviewer_pool=list(REVIEWERS),
        generator_identity=GENERATOR,
        max_rounds=3,
    )
    fields.update(overrides)
    return RunConfig(**fields)


@pytest.fixture(scope="module")
def completed_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo") / "run1"
    ctx = build_scripted_context(FIXTURE, demo_config(), root)
    state = execute_run(ctx)
    return ctx, state


class TestScriptedEndToEnd:
    def test_reaches_done(self, completed_run):
        _ctx, state = completed_run
        assert state.phase is Phase.Done

    def test_every_phase_artifact_persisted_and_addressed(self, completed_run):
        ctx, state = completed_run
        assert set(state.artifacts) == {
            "scoping",
            "citation_prep",
            "kb",
            "outline",
            "compose",
            "format",
            "refine",
        }
        resumed = RunDirectory.resume(ctx.run.root)
        assert resumed.state.phase is Phase.Done

    def test_all_fifteen_citations_survive_to_kb(self, completed_run):
        ctx, _state = completed_run
        store = CkmStore.from_dict(ctx.run.load_artifact(Phase.KbBuild)["ckm.json"])
        assert len(store) == 15
        errors = ctx.run.load_artifact(Phase.KbBuild)["errors.json"]
        assert errors["entries"] == []

    def test_outline_covers_all_keys(self, completed_run):
        ctx, _state = completed_run
        from arise.outline import Outline

        outline = Outline.from_dict(ctx.run.load_artifact(Phase.Outline)["outline.json"])
        assert outline.cite() == {f"ref{i}" for i in range(1, 16)}

    def test_manuscript_cites_all_keys_and_lints_clean(self, completed_run):
        ctx, _state = completed_run
        from arise.latexfmt import lint_manuscript

        files = ctx.run.load_artifact(Phase.Format)
        main_tex, bib = files["main.tex"], files["references.bib"]
        assert lint_manuscript(main_tex, bib) == []
        for i in range(1, 16):
            assert f"ref{i}" in main_tex

    def test_refinement_accepts_at_round_zero(self, completed_run):
        ctx, _state = completed_run
        summary = refinement_summary(ctx.run)
        assert summary["accepted"] is True
        assert summary["final_round"] == 0
        assert len(summary["trajectory"]) == 1

    def test_round_zero_audit_trail(self, completed_run):
        ctx, _state = completed_run
        rdir = ctx.run.rounds_dir(0)
        assert (rdir / "draft.tex").exists()
        assert (rdir / "scores.json").exists()
        reviews = list((rdir / "reviews").glob("*.json"))
        assert len(reviews) >= 3  # 3 reviewers x >= 1 chunk
        scores = load_json(rdir / "scores.json")
        assert scores["decision"] == "accept"
        assert len(scores["totals"]) == 3

    def test_trajectory_file_matches_scores(self, completed_run):
        ctx, _state = completed_run
        trajectory = load_json(ctx.run.root / "trajectory.json")
        assert trajectory["tau"] == 92.0
        assert trajectory["points"] == [100.0]

    def test_final_draft_matches_compose_draft_round_zero(self, completed_run):
        ctx, _state = completed_run
        final = Draft.from_dict(ctx.run.load_artifact(Phase.Refine)["final_draft.json"])
        composed = Draft.from_dict(ctx.run.load_artifact(Phase.Compose)["draft.json"])
        assert final.to_dict() == composed.to_dict()

    def test_transcripts_persisted_for_all_calls(self, completed_run):
        ctx, _state = completed_run
        transcripts = list((ctx.run.root / "calls").glob("*.json"))
        assert len(transcripts) == len(ctx.gateway.transcripts)
        assert transcripts  # non-empty


class TestAbort:
    def test_abort_flag_checkpoints_instead_of_failing(self, tmp_path):
        class NeverFinalize(AutoApprove):
            def next_decision(self, topics):
                (tmp_path / "run2" / "abort.flag").touch()
                return super().next_decision(topics)

        ctx = build_scripted_context(
            FIXTURE, demo_config(), tmp_path / "run2", decisions=NeverFinalize()
        )
        state = execute_run(ctx)
        assert state.phase is Phase.Scoping
        assert state.failure is None
        resumed = RunDirectory.resume(tmp_path / "run2")
        assert resumed.state.phase is Phase.Scoping


class TestFailure:
    def test_exhausted_script_fails_run(self, tmp_path):
        # A fixture whose script lacks most responses dies mid-scoping.
        from arise.jsonutil import dump_json

        broken = tmp_path / "broken_fixture"
        dump_json(
            broken / "script.json",
            [{"template_id": "topic_expansion", "response": {"subtopics": [f"t{i}" for i in range(6)]}}],
        )
        dump_json(broken / "corpus" / "records.json", [])
        ctx = build_scripted_context(broken, demo_config(), tmp_path / "run3")
        state = execute_run(ctx)
        assert state.phase is Phase.Failed
        assert "scoping" in state.failure
