from __future__ import annotations

import json

import pytest

from arise.agents import default_registry
from arise.errors import ProviderError, SchemaViolation, ScriptExhausted, TemplateError
from arise.gateway import (
    AgentCall,
    Gateway,
    ModelIdentity,
    ProviderRequest,
    script_provider,
)


@pytest.fixture
def registry():
    return default_registry()


def make_gateway(script, registry, **kwargs):
    return Gateway(script_provider(script), registry, **kwargs)


def topic_call(**overrides):
    defaults = dict(
        template_id="topic_expansion",
        variables={"seed": "agentic survey generation"},
        expected_schema="topic_list",
    )
    defaults.update(overrides)
    return AgentCall(**defaults)


def test_scripted_round_trip(registry):
    gw = make_gateway([("topic_expansion", {"subtopics": ["a", "b"]})], registry)
    parsed = gw.complete(topic_call())
    assert parsed == {"subtopics": ["a", "b"]}
    assert len(gw.transcripts) == 1
    assert gw.transcripts[0].attempts == 1


def test_repair_reprompt_second_attempt_valid(registry):
    gw = make_gateway(
        [
            ("topic_expansion", "this is not json at all"),
            ("topic_expansion", {"subtopics": ["x"]}),
        ],
        registry,
    )
    parsed = gw.complete(topic_call(max_attempts=2))
    assert parsed == {"subtopics": ["x"]}
    assert gw.transcripts[0].attempts == 2


def test_schema_violation_after_exhaustion_carries_raw(registry):
    gw = make_gateway(
        [
            ("topic_expansion", "bad one"),
            ("topic_expansion", "bad two"),
        ],
        registry,
    )
    with pytest.raises(SchemaViolation) as err:
        gw.complete(topic_call(max_attempts=2))
    assert err.value.raw_text == "bad two"
    assert err.value.attempts == 2
    # The failure itself is transcribed for audit.
    assert len(gw.transcripts) == 1
    assert gw.transcripts[0].parsed is None


def test_schema_mismatch_is_violation_even_for_valid_json(registry):
    gw = make_gateway([("topic_expansion", {"wrong_key": True})], registry)
    with pytest.raises(SchemaViolation):
        gw.complete(topic_call(max_attempts=1))


def test_fenced_json_is_accepted(registry):
    fenced = "Sure!\n```json\n" + json.dumps({"subtopics": ["a"]}) + "\n```\nthanks"
    gw = make_gateway([("topic_expansion", fenced)], registry)
    assert gw.complete(topic_call()) == {"subtopics": ["a"]}


def test_script_delivers_in_order_and_exhausts(registry):
    responses = [{"subtopics": [f"t{i}"]} for i in range(3)]
    gw = make_gateway([("topic_expansion", r) for r in responses], registry)
    for i in range(3):
        assert gw.complete(topic_call()) == {"subtopics": [f"t{i}"]}
    with pytest.raises(ScriptExhausted):
        gw.complete(topic_call())


def test_scripted_runs_are_byte_deterministic(registry, tmp_path):
    def run(tag):
        out = tmp_path / tag
        gw = make_gateway(
            [("topic_expansion", {"subtopics": ["a", "b"]})] * 2,
            registry,
            transcript_dir=out,
        )
        gw.complete(topic_call())
        gw.complete(topic_call())
        return sorted((p.name, p.read_bytes()) for p in out.glob("*.json"))

    assert run("first") == run("second")


def test_unknown_template_and_unbound_variable(registry):
    gw = make_gateway([(None, "{}")], registry)
    with pytest.raises(TemplateError):
        gw.complete(topic_call(template_id="nope"))
    with pytest.raises(TemplateError):
        gw.complete(topic_call(variables={}))


def test_prompt_regex_matcher(registry):
    gw = make_gateway(
        [
            ({"template_id": "topic_expansion", "prompt_regex": "quantum"}, {"subtopics": ["q"]}),
            ("topic_expansion", {"subtopics": ["fallback"]}),
        ],
        registry,
    )
    assert gw.complete(topic_call(variables={"seed": "quantum sensing"})) == {"subtopics": ["q"]}
    assert gw.complete(topic_call()) == {"subtopics": ["fallback"]}


def test_times_matcher_repeats(registry):
    gw = make_gateway(
        [({"template_id": "topic_expansion", "times": 2}, {"subtopics": ["r"]})], registry
    )
    assert gw.complete(topic_call()) == {"subtopics": ["r"]}
    assert gw.complete(topic_call()) == {"subtopics": ["r"]}
    with pytest.raises(ScriptExhausted):
        gw.complete(topic_call())


def test_provider_retry_with_backoff(registry):
    class Flaky:
        deterministic = True

        def __init__(self):
            self.calls = 0

        def send(self, request: ProviderRequest) -> str:
            self.calls += 1
            if self.calls < 3:
                raise ProviderError("boom", retryable=True)
            return json.dumps({"subtopics": ["ok"]})

    sleeps: list[float] = []
    provider = Flaky()
    gw = Gateway(provider, registry, sleep=sleeps.append)
    assert gw.complete(topic_call()) == {"subtopics": ["ok"]}
    assert provider.calls == 3
    assert len(sleeps) == 2
    assert sleeps[1] > sleeps[0]


def test_non_retryable_provider_error_propagates(registry):
    class Dead:
        deterministic = True

        def send(self, request):
            raise ProviderError("no quota", retryable=False)

    gw = Gateway(Dead(), registry, sleep=lambda _: None)
    with pytest.raises(ProviderError):
        gw.complete(topic_call())


def test_model_identity_requires_family():
    with pytest.raises(ValueError):
        ModelIdentity(family="", model_name="m")
    ident = ModelIdentity(family="acme", model_name="m-1", role_tag="reviewer")
    assert ident.label == "acme/m-1"


def test_every_template_has_a_registered_schema(registry):
    from arise.agents import TEMPLATE_SCHEMA, TEMPLATES

    assert set(TEMPLATE_SCHEMA) == set(TEMPLATES)
    for schema_id in TEMPLATE_SCHEMA.values():
        registry.schema(schema_id)
