"""Run configuration, phase state machine, and run-directory persistence.

A run lives in one directory: a versioned manifest plus one subdirectory
per phase, with refinement rounds under ``rounds/``. Phase artifacts are
content-addressed canonical files, so a resumed run can prove that nothing
drifted and replays produce byte-identical state records (the manifest
carries no wall-clock fields). Mutations are serialized through a single
writer lock per directory.
"""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError, CorruptManifest, InvalidTransition, MissingArtifact, PersistenceFailure
from .gateway import ModelIdentity
from .jsonutil import canonical_bytes, content_address, dump_json, dump_text, file_address, load_json

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
DEFAULT_TAU = 92.0


class Phase(enum.Enum):
    Scoping = "scoping"
    CitationPrep = "citation_prep"
    KbBuild = "kb"
    Outline = "outline"
    Compose = "compose"
    Format = "format"
    Refine = "refine"
    Done = "done"
    Failed = "failed"


PHASE_ORDER = (
    Phase.Scoping,
    Phase.CitationPrep,
    Phase.KbBuild,
    Phase.Outline,
    Phase.Compose,
    Phase.Format,
    Phase.Refine,
    Phase.Done,
)

ARTIFACT_KINDS = {
    Phase.Scoping: "approved_topics",
    Phase.CitationPrep: "curated_citations",
    Phase.KbBuild: "knowledge_base",
    Phase.Outline: "final_outline",
    Phase.Compose: "unified_draft",
    Phase.Format: "manuscript",
    Phase.Refine: "refinement_result",
}

PHASE_DIRS = {
    Phase.Scoping: "phase_scoping",
    Phase.CitationPrep: "phase_citation_prep",
    Phase.KbBuild: "phase_kb",
    Phase.Outline: "phase_outline",
    Phase.Compose: "phase_compose",
    Phase.Format: "phase_format",
    Phase.Refine: "phase_refine",
}


def next_phase(phase: Phase) -> Phase:
    index = PHASE_ORDER.index(phase)
    if index == len(PHASE_ORDER) - 1:
        raise InvalidTransition(f"phase {phase.value} is terminal")
    return PHASE_ORDER[index + 1]


@dataclass
class RunConfig:
    topic_seed: str
    reviewer_pool: list[ModelIdentity]
    generator_identity: ModelIdentity
    max_rounds: int = 5
    threshold_tau: float = DEFAULT_TAU
    chunk_pages: int = 3
    target_template: str = "generic-article"
    seed: int = 0
    batch_size: int = 8
    candidates_per_pair: int = 20

    def __post_init__(self):
        if not self.topic_seed.strip():
            raise ConfigError("topic_seed must be non-empty")
        if not self.reviewer_pool:
            raise ConfigError("reviewer_pool must be non-empty")
        if not 20.0 <= self.threshold_tau <= 100.0:
            raise ConfigError("threshold_tau must lie in [20, 100] (rubric total range)")
        if self.max_rounds < 0:
            raise ConfigError("max_rounds must be >= 0")
        if self.chunk_pages < 1:
            raise ConfigError("chunk_pages must be >= 1")

    def to_dict(self) -> dict:
        def ident(i: ModelIdentity) -> dict:
            return {"family": i.family, "model_name": i.model_name, "role_tag": i.role_tag}

        return {
            "topic_seed": self.topic_seed,
            "reviewer_pool": [ident(i) for i in self.reviewer_pool],
            "generator_identity": ident(self.generator_identity),
            "max_rounds": self.max_rounds,
            "threshold_tau": self.threshold_tau,
            "chunk_pages": self.chunk_pages,
            "target_template": self.target_template,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "candidates_per_pair": self.candidates_per_pair,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        def ident(d: dict) -> ModelIdentity:
            return ModelIdentity(family=d["family"], model_name=d["model_name"], role_tag=d.get("role_tag", ""))

        return cls(
            topic_seed=data["topic_seed"],
            reviewer_pool=[ident(d) for d in data["reviewer_pool"]],
            generator_identity=ident(data["generator_identity"]),
            max_rounds=data["max_rounds"],
            threshold_tau=data["threshold_tau"],
            chunk_pages=data["chunk_pages"],
            target_template=data["target_template"],
            seed=data["seed"],
            batch_size=data.get("batch_size", 8),
            candidates_per_pair=data.get("candidates_per_pair", 20),
        )


@dataclass
class RunState:
    phase: Phase = Phase.Scoping
    round_t: int = 0
    trajectory: list[float] = field(default_factory=list)
    artifacts: dict[str, dict] = field(default_factory=dict)  # phase value -> {files, address}
    best_round: int | None = None
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "phase": self.phase.value,
            "round_t": self.round_t,
            "trajectory": list(self.trajectory),
            "artifacts": {k: dict(v) for k, v in sorted(self.artifacts.items())},
            "best_round": self.best_round,
            "failure": self.failure,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunState":
        return cls(
            phase=Phase(data["phase"]),
            round_t=data["round_t"],
            trajectory=list(data["trajectory"]),
            artifacts={k: dict(v) for k, v in data["artifacts"].items()},
            best_round=data.get("best_round"),
            failure=data.get("failure"),
        )


@dataclass
class Artifact:
    """Typed phase output: named files (JSON payloads or text) in the phase dir."""

    kind: str
    files: dict[str, object]

    def __post_init__(self):
        if not self.files:
            raise ValueError("artifact must carry at least one file")


class RunDirectory:
    """Single-writer checkpointed run store."""

    def __init__(self, root: Path | str, config: RunConfig, run_id: str | None = None):
        self.root = Path(root)
        self.config = config
        self.run_id = run_id or ("run-" + content_address(config.to_dict())[:12])
        self.state = RunState()
        self._lock = threading.Lock()
        self.root.mkdir(parents=True, exist_ok=True)
        self._persist()

    # -- construction ------------------------------------------------------

    @classmethod
    def resume(cls, root: Path | str) -> "RunDirectory":
        """Rehydrate a run from its manifest; completed phases stay done.

        Raises CorruptManifest for unreadable manifests and MissingArtifact
        (naming the phase) when a recorded artifact is absent or its bytes
        no longer match the recorded content address.
        """
        root = Path(root)
        manifest_path = root / "manifest.json"
        try:
            manifest = load_json(manifest_path)
            if manifest.get("version") != MANIFEST_VERSION:
                raise CorruptManifest(f"unsupported manifest version {manifest.get('version')!r}")
            config = RunConfig.from_dict(manifest["config"])
            state = RunState.from_dict(manifest["state"])
            run_id = manifest["run_id"]
        except CorruptManifest:
            raise
        except Exception as exc:
            raise CorruptManifest(f"cannot load manifest from {root}: {exc}") from exc

        run = cls.__new__(cls)
        run.root = root
        run.config = config
        run.run_id = run_id
        run.state = state
        run._lock = threading.Lock()

        for phase_value, entry in state.artifacts.items():
            for rel_path, digest in entry["files"].items():
                path = root / rel_path
                if not path.exists():
                    raise MissingArtifact(phase_value, f"{rel_path} not on disk")
                if file_address(path) != digest:
                    raise MissingArtifact(phase_value, f"{rel_path} content drifted")

        if state.phase is Phase.Refine and state.trajectory:
            logger.warning("run %s interrupted mid-refinement; the phase restarts clean", run_id)
            run.state = replace(state, trajectory=[], round_t=0)
            run._persist()
        return run

    # -- persistence -------------------------------------------------------

    def manifest_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "run_id": self.run_id,
            "config": self.config.to_dict(),
            "state": self.state.to_dict(),
        }

    def _persist(self) -> None:
        try:
            dump_json(self.root / "manifest.json", self.manifest_dict())
        except OSError as exc:
            raise PersistenceFailure(f"cannot write manifest: {exc}") from exc

    def manifest_bytes(self) -> bytes:
        return canonical_bytes(self.manifest_dict())

    def phase_dir(self, phase: Phase) -> Path:
        return self.root / PHASE_DIRS[phase]

    # -- mutations ---------------------------------------------------------

    def advance(self, artifact: Artifact) -> RunState:
        """Persist the phase artifact and move to the next phase."""
        with self._lock:
            phase = self.state.phase
            expected = ARTIFACT_KINDS.get(phase)
            if expected is None:
                raise InvalidTransition(f"phase {phase.value} accepts no artifact")
            if artifact.kind != expected:
                raise InvalidTransition(
                    f"phase {phase.value} expects artifact kind {expected!r}, got {artifact.kind!r}"
                )
            directory = self.phase_dir(phase)
            hashes: dict[str, str] = {}
            try:
                for name, payload in artifact.files.items():
                    path = directory / name
                    if isinstance(payload, str):
                        digest = dump_text(path, payload)
                    else:
                        digest = dump_json(path, payload)
                    hashes[str(path.relative_to(self.root))] = digest
            except OSError as exc:
                raise PersistenceFailure(f"cannot persist artifact for {phase.value}: {exc}") from exc
            self.state.artifacts[phase.value] = {
                "files": hashes,
                "address": content_address(hashes),
            }
            self.state.phase = next_phase(phase)
            self._persist()
            return self.state

    def record_round(self, average: float, best_round: int | None = None) -> None:
        """Append one completed review round to the trajectory."""
        with self._lock:
            self.state.trajectory.append(average)
            self.state.round_t = len(self.state.trajectory) - 1
            if best_round is not None:
                self.state.best_round = best_round
            self._persist()

    def fail(self, reason: str) -> None:
        with self._lock:
            self.state.failure = reason
            self.state.phase = Phase.Failed
            self._persist()

    def load_artifact(self, phase: Phase) -> dict[str, object]:
        """Reload a completed phase's files (JSON parsed, text as str)."""
        entry = self.state.artifacts.get(phase.value)
        if entry is None:
            raise MissingArtifact(phase.value, "phase not completed")
        out: dict[str, object] = {}
        for rel_path in entry["files"]:
            path = self.root / rel_path
            name = path.name
            if path.suffix == ".json":
                out[name] = load_json(path)
            else:
                out[name] = path.read_text(encoding="utf-8")
        return out

    def rounds_dir(self, round_t: int) -> Path:
        return self.root / "rounds" / f"round_{round_t}"
