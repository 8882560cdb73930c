"""Shared adversarial/scripted provider machinery for outline and ELSR tests."""

from __future__ import annotations

import json
import random
import re

from arise.gateway import ProviderRequest

REF_TOKEN = re.compile(r"\bref[0-9]+\b")


def keys_in_prompt(prompt: str) -> list[str]:
    """Distinct refN tokens from the prompt body, in first-seen order."""
    body = prompt.split("Respond with a single JSON object", 1)[0]
    seen: dict[str, None] = {}
    for token in REF_TOKEN.findall(body):
        seen.setdefault(token)
    return list(seen)


class AdversarialOutlineProvider:
    """Outline writer/merger that drops and invents keys on purpose.

    Drops up to ``drop_rate`` of the keys it was given and, optionally,
    cites a key that was never in the prompt. Deterministic per seed.
    """

    deterministic = True

    def __init__(self, seed: int = 0, drop_rate: float = 0.3, invent: bool = True):
        self.rng = random.Random(seed)
        self.drop_rate = drop_rate
        self.invent = invent

    def send(self, request: ProviderRequest) -> str:
        if request.template_id == "outline_validator":
            return json.dumps({"coherent": True, "issues": []})
        keys = keys_in_prompt(request.prompt)
        kept = [k for k in keys if self.rng.random() >= self.drop_rate * self.rng.random() * 2]
        if self.invent and self.rng.random() < 0.4:
            kept.append(f"ref{9000 + self.rng.randint(0, 99)}")
        self.rng.shuffle(kept)
        cut = max(1, len(kept) // 2) if kept else 0
        sections = [
            {"title": "Methods and Mechanisms", "cite_keys": kept[:cut], "children": [
                {"title": "Representative Systems", "cite_keys": kept[cut:], "children": []},
            ]},
        ]
        return json.dumps({"sections": sections})


class ObedientOutlineProvider:
    """Outline writer/merger that keeps every key it was shown."""

    deterministic = True

    def send(self, request: ProviderRequest) -> str:
        if request.template_id == "outline_validator":
            return json.dumps({"coherent": True, "issues": []})
        keys = keys_in_prompt(request.prompt)
        half = len(keys) // 2
        sections = [{"title": "Overview of the Field", "cite_keys": keys[:half], "children": []}]
        if keys[half:]:
            sections.append({"title": "Detailed Treatments", "cite_keys": keys[half:], "children": []})
        return json.dumps({"sections": sections})
