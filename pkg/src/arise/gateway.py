"""Provider-agnostic chat-completion gateway.

Every agent in the engine is a prompt template plus an output schema bound
to this gateway; nothing else in the system talks to a model. Structured
output is requested as JSON (the schema is appended to the prompt), parsed,
and validated; invalid replies get repair reprompts up to the call's
attempt budget. Raw request/response transcripts are persisted for every
call. The scripted provider replays canned responses deterministically so
each algorithmic component can be exercised without live model access.
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Protocol

import jinja2
import jinja2.meta
import jsonschema

from .errors import ProviderError, SchemaViolation, ScriptExhausted, TemplateError
from .jsonutil import dump_json
from .throttle import TokenBucket

logger = logging.getLogger(__name__)

_JINJA = jinja2.Environment(undefined=jinja2.StrictUndefined, autoescape=False)


@dataclass(frozen=True)
class ModelIdentity:
    """A model bound to an agent role; family matters for judge pooling."""

    family: str
    model_name: str
    role_tag: str = ""

    def __post_init__(self):
        if not self.family.strip():
            raise ValueError("ModelIdentity.family must be non-empty")

    @property
    def label(self) -> str:
        return f"{self.family}/{self.model_name}"


@dataclass
class AgentCall:
    template_id: str
    variables: dict[str, Any]
    expected_schema: str
    temperature: float = 0.0
    max_attempts: int = 2

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class ProviderRequest:
    template_id: str
    prompt: str
    temperature: float


class Provider(Protocol):
    deterministic: bool

    def send(self, request: ProviderRequest) -> str: ...


class Registry:
    """Template and schema registry backing the agent roster."""

    def __init__(self):
        self._templates: dict[str, str] = {}
        self._schemas: dict[str, dict] = {}
        self._validators: dict[str, jsonschema.Draft202012Validator] = {}

    def add_template(self, template_id: str, text: str) -> None:
        self._templates[template_id] = text

    def add_schema(self, schema_id: str, schema: dict) -> None:
        jsonschema.Draft202012Validator.check_schema(schema)
        self._schemas[schema_id] = schema
        self._validators[schema_id] = jsonschema.Draft202012Validator(schema)

    def validator(self, schema_id: str) -> jsonschema.Draft202012Validator:
        try:
            return self._validators[schema_id]
        except KeyError:
            raise TemplateError(f"unknown schema {schema_id!r}") from None

    def template(self, template_id: str) -> str:
        try:
            return self._templates[template_id]
        except KeyError:
            raise TemplateError(f"unknown template {template_id!r}") from None

    def schema(self, schema_id: str) -> dict:
        try:
            return self._schemas[schema_id]
        except KeyError:
            raise TemplateError(f"unknown schema {schema_id!r}") from None

    def has_template(self, template_id: str) -> bool:
        return template_id in self._templates

    def template_ids(self) -> list[str]:
        return sorted(self._templates)


@lru_cache(maxsize=256)
def _compile_template(text: str) -> tuple[frozenset[str], "jinja2.Template"]:
    try:
        referenced = jinja2.meta.find_undeclared_variables(_JINJA.parse(text))
    except jinja2.TemplateSyntaxError as exc:
        raise TemplateError(f"template syntax error: {exc}") from exc
    return frozenset(referenced), _JINJA.from_string(text)


def render_template(text: str, variables: dict[str, Any]) -> str:
    """Render a prompt template, requiring every referenced variable."""
    referenced, template = _compile_template(text)
    missing = referenced - set(variables)
    if missing:
        raise TemplateError(f"unbound template variables: {sorted(missing)}")
    return template.render(**variables)


def extract_json(text: str) -> Any:
    """Pull a JSON payload out of a model reply (fences tolerated)."""
    candidate = text.strip()
    fence = re.search(r"```(?:json)?\s*\n(.*?)```", candidate, re.DOTALL)
    if fence:
        candidate = fence.group(1).strip()
    if not candidate.startswith(("{", "[")):
        start = min((i for i in (candidate.find("{"), candidate.find("[")) if i >= 0), default=-1)
        if start >= 0:
            candidate = candidate[start:]
    return json.loads(candidate)


@dataclass
class Transcript:
    seq: int
    template_id: str
    prompt: str
    raw_response: str
    parsed: Any
    attempts: int
    timing: float

    def to_dict(self) -> dict:
        return {
            "template_id": self.template_id,
            "rendered_prompt": self.prompt,
            "raw_response": self.raw_response,
            "parsed": self.parsed,
            "attempts": self.attempts,
            "timing": self.timing,
        }


_REPAIR_SUFFIX = (
    "\n\nYour previous reply could not be used ({error}). "
    "Reply again with ONLY a single JSON object that validates against the schema above."
)


class Gateway:
    """Binds a provider to the registry; owns retries, parsing, transcripts."""

    def __init__(
        self,
        provider: Provider,
        registry: Registry,
        transcript_dir: Path | str | None = None,
        seed: int = 0,
        max_provider_retries: int = 3,
        backoff_base: float = 0.5,
        clock: Callable[[], float] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.provider = provider
        self.registry = registry
        self.transcript_dir = Path(transcript_dir) if transcript_dir else None
        self.transcripts: list[Transcript] = []
        self._rng = random.Random(seed)
        self._max_provider_retries = max_provider_retries
        self._backoff_base = backoff_base
        self._sleep = sleep
        if clock is None:
            deterministic = getattr(provider, "deterministic", False)
            clock = (lambda: 0.0) if deterministic else time.perf_counter
        self._clock = clock
        self._lock = threading.Lock()
        self._seq = 0

    def complete(self, call: AgentCall) -> Any:
        """Run one structured agent call; returns the schema-valid payload."""
        template = self.registry.template(call.template_id)
        schema = self.registry.schema(call.expected_schema)
        validator = self.registry.validator(call.expected_schema)
        prompt = render_template(template, call.variables)
        prompt += "\n\nRespond with a single JSON object matching this schema:\n" + json.dumps(
            schema, sort_keys=True
        )

        started = self._clock()
        raw = ""
        error = ""
        attempt_prompt = prompt
        for attempt in range(1, call.max_attempts + 1):
            raw = self._send_with_retries(
                ProviderRequest(call.template_id, attempt_prompt, call.temperature)
            )
            try:
                parsed = extract_json(raw)
                validator.validate(parsed)
            except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
                error = exc.__class__.__name__
                logger.debug("attempt %d for %s invalid: %s", attempt, call.template_id, exc)
                attempt_prompt = prompt + _REPAIR_SUFFIX.format(error=error)
                continue
            self._record(call.template_id, prompt, raw, parsed, attempt, self._clock() - started)
            return parsed

        self._record(call.template_id, prompt, raw, None, call.max_attempts, self._clock() - started)
        raise SchemaViolation(
            f"{call.template_id} produced no schema-valid output in {call.max_attempts} attempts ({error})",
            raw_text=raw,
            attempts=call.max_attempts,
        )

    def _send_with_retries(self, request: ProviderRequest) -> str:
        for retry in range(self._max_provider_retries + 1):
            try:
                return self.provider.send(request)
            except ProviderError as exc:
                if not exc.retryable or retry == self._max_provider_retries:
                    raise
                delay = exc.retry_after
                if delay is None:
                    delay = self._backoff_base * (2**retry) * (1.0 + 0.25 * self._rng.random())
                logger.warning("provider error (%s); retry %d in %.2fs", exc, retry + 1, delay)
                self._sleep(delay)
        raise AssertionError("unreachable")

    def _record(
        self, template_id: str, prompt: str, raw: str, parsed: Any, attempts: int, timing: float
    ) -> None:
        with self._lock:
            seq = self._seq
            self._seq += 1
        transcript = Transcript(seq, template_id, prompt, raw, parsed, attempts, round(timing, 6))
        self.transcripts.append(transcript)
        if self.transcript_dir is not None:
            dump_json(self.transcript_dir / f"{seq:06d}.json", transcript.to_dict())


# --- scripted provider ---------------------------------------------------------


@dataclass
class ScriptEntry:
    """One canned response; matches on template id and optional prompt regex."""

    response: str
    template_id: str | None = None
    prompt_regex: str | None = None
    times: int = 1
    _pattern: re.Pattern | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.times < 1:
            raise ValueError("times must be >= 1")
        if self.prompt_regex is not None:
            self._pattern = re.compile(self.prompt_regex, re.DOTALL)

    def matches(self, request: ProviderRequest) -> bool:
        if self.template_id is not None and request.template_id != self.template_id:
            return False
        if self._pattern is not None and not self._pattern.search(request.prompt):
            return False
        return True


class ScriptedProvider:
    """Deterministic provider that consumes the first matching script entry."""

    deterministic = True

    def __init__(self, entries: list[ScriptEntry]):
        if not entries:
            raise ValueError("script must be non-empty")
        self._entries = list(entries)
        self._remaining = [e.times for e in self._entries]
        self._lock = threading.Lock()

    def send(self, request: ProviderRequest) -> str:
        with self._lock:
            for i, entry in enumerate(self._entries):
                if self._remaining[i] > 0 and entry.matches(request):
                    self._remaining[i] -= 1
                    return entry.response
        raise ScriptExhausted(
            f"no scripted response left for template {request.template_id!r}"
        )

    @classmethod
    def from_file(cls, path: Path | str) -> "ScriptedProvider":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls([_entry_from_dict(item) for item in raw])


def _entry_from_dict(item: dict) -> ScriptEntry:
    response = item["response"]
    if not isinstance(response, str):
        response = json.dumps(response, sort_keys=True)
    return ScriptEntry(
        response=response,
        template_id=item.get("template_id"),
        prompt_regex=item.get("prompt_regex"),
        times=int(item.get("times", 1)),
    )


def script_provider(script: list) -> ScriptedProvider:
    """Build a scripted provider from (matcher, canned response) pairs.

    A matcher may be a template id, a {"template_id", "prompt_regex"} dict,
    or None (match anything). Responses that are not strings are serialized
    as JSON.
    """

    entries = []
    for matcher, response in script:
        if not isinstance(response, str):
            response = json.dumps(response, sort_keys=True)
        if matcher is None:
            entries.append(ScriptEntry(response=response))
        elif isinstance(matcher, str):
            entries.append(ScriptEntry(response=response, template_id=matcher))
        elif isinstance(matcher, dict):
            entries.append(
                ScriptEntry(
                    response=response,
                    template_id=matcher.get("template_id"),
                    prompt_regex=matcher.get("prompt_regex"),
                    times=int(matcher.get("times", 1)),
                )
            )
        else:
            raise ValueError(f"unsupported matcher {matcher!r}")
    return ScriptedProvider(entries)


# --- live provider -------------------------------------------------------------


class HttpChatProvider:
    """Minimal OpenAI-style chat-completions client.

    Credentials come from ``ARISE_API_KEY_<FAMILY>``; an optional
    ``ARISE_BASE_URL_<FAMILY>`` overrides the endpoint. One token bucket per
    provider instance serializes bursts.
    """

    deterministic = False

    def __init__(self, identity: ModelIdentity, rate: float = 1.0, timeout: float = 120.0):
        self.identity = identity
        self.timeout = timeout
        self._limiter = TokenBucket(rate)
        family_key = re.sub(r"[^A-Z0-9]", "_", identity.family.upper())
        self.api_key = os.environ.get(f"ARISE_API_KEY_{family_key}", "")
        self.base_url = os.environ.get(
            f"ARISE_BASE_URL_{family_key}", "https://api.openai.com/v1"
        ).rstrip("/")
        if not self.api_key:
            raise ProviderError(
                f"no API key configured for provider family {identity.family!r} "
                f"(set ARISE_API_KEY_{family_key})",
                retryable=False,
            )

    def send(self, request: ProviderRequest) -> str:
        import httpx

        self._limiter.acquire()
        body = {
            "model": self.identity.model_name,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        }
        try:
            response = httpx.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise ProviderError(f"transport failure: {exc}") from exc
        if response.status_code == 429:
            retry_after = float(response.headers.get("retry-after", "2"))
            raise ProviderError("rate limited", retryable=True, retry_after=retry_after)
        if response.status_code >= 500:
            raise ProviderError(f"server error {response.status_code}", retryable=True)
        if response.status_code >= 400:
            raise ProviderError(f"request rejected: {response.text[:500]}", retryable=False)
        payload = response.json()
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise ProviderError(f"malformed provider payload: {payload}", retryable=False) from exc
