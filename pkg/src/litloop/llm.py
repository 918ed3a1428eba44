"""Single point of contact with any LLM provider: prompt assembly,
JSON-constrained completion, response repair, keyword suggestion."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import requests

from .domain import ResearchInterest
from .errors import BudgetExceeded, MalformedResponse, ProviderUnavailable

log = logging.getLogger(__name__)

# reserved provider-contract token for "property absent from text"
SENTINEL = "NOT_FOUND"

CHARS_PER_UNIT = 4

TEMPLATE_DIR = Path(__file__).parent / "templates"


def load_template(name: str) -> str:
    return (TEMPLATE_DIR / name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class PromptBundle:
    system_instructions: str
    user_content: str
    response_shape: Tuple[str, ...]
    budget: int

    def __post_init__(self):
        if not self.user_content:
            raise ValueError("user_content must be non-empty")
        if not self.response_shape:
            raise ValueError("response_shape must list at least one key")

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.system_instructions.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(self.user_content.encode("utf-8"))
        return digest.hexdigest()


@dataclass(frozen=True)
class ProviderProfile:
    provider_id: str
    endpoint: str
    model: str
    max_input_units: int = 100_000
    supports_json_mode: bool = True

    def __post_init__(self):
        if self.max_input_units <= 0:
            raise ValueError("max_input_units must be > 0")


@dataclass(frozen=True)
class KeywordSuggestion:
    keywords: Tuple[str, ...]
    source_interest: ResearchInterest


def repair_json(raw: str) -> Any:
    """Single repair pass: strip code fences, trim to the outermost brace
    pair, parse. No other mutation."""
    if not raw:
        raise MalformedResponse("empty response")
    text = raw.strip()
    fence = re.match(r"^```[a-zA-Z]*\s*\n(.*?)\n?\s*```\s*$", text, re.DOTALL)
    if fence:
        text = fence.group(1).strip()
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end <= start:
        raise MalformedResponse("no JSON object in response")
    text = text[start : end + 1]
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"unparseable after repair: {exc}") from exc


class Provider:
    """Raw text completion backend."""

    def complete(self, prompt: PromptBundle, profile: ProviderProfile) -> str:
        raise NotImplementedError


class StubProvider(Provider):
    """Pure-function provider: fixture mapping prompt fingerprint (or
    exact content) to canned responses, for hermetic tests."""

    def __init__(self, fixtures: Optional[Dict[str, str]] = None,
                 default: Optional[str] = None):
        self.fixtures = dict(fixtures or {})
        self.default = default

    @classmethod
    def from_file(cls, path: str) -> "StubProvider":
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
        return cls(fixtures=data.get("fixtures", {}), default=data.get("default"))

    def complete(self, prompt: PromptBundle, profile: ProviderProfile) -> str:
        key = prompt.fingerprint()
        if key in self.fixtures:
            return self.fixtures[key]
        if prompt.user_content in self.fixtures:
            return self.fixtures[prompt.user_content]
        if self.default is not None:
            return self.default
        # echo the sentinel for every requested key: harmless fallback
        return json.dumps({k: SENTINEL for k in prompt.response_shape})


class HttpProvider(Provider):
    """OpenAI-compatible chat-completions client."""

    def __init__(self, timeout: float = 60.0):
        self.timeout = timeout

    def complete(self, prompt: PromptBundle, profile: ProviderProfile) -> str:
        key = os.environ.get("LITLOOP_LLM_KEY", "")
        body: Dict[str, Any] = {
            "model": profile.model,
            "messages": [
                {"role": "system", "content": prompt.system_instructions},
                {"role": "user", "content": prompt.user_content},
            ],
        }
        if profile.supports_json_mode:
            body["response_format"] = {"type": "json_object"}
        try:
            resp = requests.post(
                profile.endpoint,
                json=body,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise ProviderUnavailable(str(exc)) from exc


class Gateway:
    """Stateless gateway; a global limiter bounds in-flight provider calls."""

    def __init__(self, provider: Provider, profile: ProviderProfile,
                 max_in_flight: int = 4, chars_per_unit: int = CHARS_PER_UNIT):
        self.provider = provider
        self.profile = profile
        self.chars_per_unit = chars_per_unit
        self._limiter = threading.Semaphore(max_in_flight)

    def measure_units(self, prompt: PromptBundle) -> int:
        chars = len(prompt.system_instructions) + len(prompt.user_content)
        return -(-chars // self.chars_per_unit)  # ceil division

    def complete_structured(self, prompt: PromptBundle) -> Dict[str, Any]:
        """JSON-constrained completion. Every response_shape key is present
        in the result; keys the model omitted are injected as the sentinel."""
        units = self.measure_units(prompt)
        budget = min(prompt.budget, self.profile.max_input_units)
        if units > budget:
            raise BudgetExceeded(f"prompt is {units} units, budget {budget}")
        with self._limiter:
            raw = self.provider.complete(prompt, self.profile)
        tree = repair_json(raw)
        if not isinstance(tree, dict):
            raise MalformedResponse("response is not a JSON object")
        for key in prompt.response_shape:
            if key not in tree:
                tree[key] = SENTINEL
        return tree

    def suggest_keywords(self, interest: ResearchInterest) -> KeywordSuggestion:
        """Advisory keyword list (3-10 phrases); the human still composes
        the actual query."""
        prompt = PromptBundle(
            system_instructions=load_template("keywords_v1.txt"),
            user_content=interest.text,
            response_shape=("keywords",),
            budget=self.profile.max_input_units,
        )
        tree = self.complete_structured(prompt)
        raw_keywords = tree.get("keywords")
        if not isinstance(raw_keywords, list):
            raise MalformedResponse("keywords is not a list")
        seen = set()
        keywords: List[str] = []
        for item in raw_keywords:
            phrase = str(item).strip()
            if not phrase or len(phrase.split()) > 6:
                continue
            folded = phrase.lower()
            if folded in seen:
                continue
            seen.add(folded)
            keywords.append(phrase)
            if len(keywords) == 10:
                break
        if len(keywords) < 3:
            raise MalformedResponse(f"expected at least 3 keywords, got {len(keywords)}")
        return KeywordSuggestion(keywords=tuple(keywords), source_interest=interest)
