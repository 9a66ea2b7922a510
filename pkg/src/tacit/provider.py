"""Completion boundary: a production HTTP client and a deterministic mock.

The provider is a dumb pipe: callers render prompts, the provider returns
text. Repair of malformed structured output lives here only as the shared
``complete_parsed`` helper, driven by the callers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Protocol

import requests

from . import prompts
from .errors import (
    AuthError,
    MalformedOutput,
    MalformedProviderOutput,
    ProviderTimeout,
    RateLimited,
    TransportError,
)
from .model import THEMES

logger = logging.getLogger(__name__)

PURPOSES = (
    "generation",
    "follow_up",
    "importance",
    "faithfulness",
    "contradiction",
    "summary",
    "report",
)
TIERS = ("initial_generation", "standard")

#: Validation and rating calls run at temperature 0 for reproducibility;
#: generation keeps the provider default.
_TEMPERATURE = {"importance": 0.0, "faithfulness": 0.0, "contradiction": 0.0}


@dataclass(frozen=True)
class CompletionRequest:
    tier: str
    prompt: str
    purpose: str

    def __post_init__(self) -> None:
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown purpose {self.purpose!r}")
        if not self.prompt:
            raise ValueError("prompt must be non-empty")


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings; secrets come only from the environment."""

    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "TACIT_API_KEY"
    tier_models: dict = field(
        default_factory=lambda: {"initial_generation": "o1", "standard": "gpt-4o"}
    )
    timeout: float = 60.0
    max_retries: int = 2
    prompt_budget: int = 8000
    auth_token: Optional[str] = None  # optional shared token for the HTTP service

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        for tier in TIERS:
            if tier not in self.tier_models:
                raise ValueError(f"tier {tier!r} has no model configured")

    @classmethod
    def from_file(cls, path) -> "ProviderConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            base_url=data.get("base_url", cls.base_url),
            api_key_env=data.get("api_key_env", cls.api_key_env),
            tier_models=data.get("models", {"initial_generation": "o1", "standard": "gpt-4o"}),
            timeout=data.get("timeout_s", 60.0),
            max_retries=data.get("max_retries", 2),
            prompt_budget=data.get("prompt_budget", 8000),
            auth_token=data.get("auth_token"),
        )


class Provider(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def stable_hash(*parts) -> int:
    """Process-independent hash of the given parts (PYTHONHASHSEED-proof)."""
    joined = b"\x1f".join(str(p).encode("utf-8") for p in parts)
    return int.from_bytes(hashlib.blake2b(joined, digest_size=8).digest(), "big")


def stable_hash_hex(*parts) -> str:
    return format(stable_hash(*parts) & 0xFFFFFFFF, "08x")


class HttpProvider:
    """Chat-completion client for hosted endpoints.

    Retries transient transport failures with exponential backoff up to
    ``max_retries``. Never logs prompt contents at default verbosity; the
    audit line carries purpose, tier and a prompt digest only.
    """

    def __init__(
        self,
        config: ProviderConfig,
        transport: Optional[Callable] = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._transport = transport or requests.post
        self._sleep = sleeper

    def complete(self, request: CompletionRequest) -> str:
        api_key = os.environ.get(self.config.api_key_env)
        if not api_key:
            raise AuthError(f"environment variable {self.config.api_key_env} is not set")
        body = {
            "model": self.config.tier_models[request.tier],
            "messages": [{"role": "user", "content": request.prompt}],
        }
        temperature = _TEMPERATURE.get(request.purpose)
        if temperature is not None:
            body["temperature"] = temperature
        logger.info(
            "completion purpose=%s tier=%s prompt_sha=%s",
            request.purpose,
            request.tier,
            prompt_digest(request.prompt),
        )

        attempts = 1 + self.config.max_retries
        last_error: Exception = TransportError("no attempt made")
        for attempt in range(attempts):
            if attempt:
                self._sleep(0.5 * 2 ** (attempt - 1))
            try:
                response = self._transport(
                    f"{self.config.base_url.rstrip('/')}/chat/completions",
                    json=body,
                    headers={"Authorization": f"Bearer {api_key}"},
                    timeout=self.config.timeout,
                )
            except requests.Timeout as exc:
                last_error = ProviderTimeout(str(exc))
                continue
            except requests.RequestException as exc:
                last_error = TransportError(str(exc))
                continue
            status = getattr(response, "status_code", 0)
            if status in (401, 403):
                raise AuthError(f"provider rejected credentials (HTTP {status})")
            if status == 429:
                last_error = RateLimited("provider rate limit")
                continue
            if status >= 500:
                last_error = TransportError(f"provider failure (HTTP {status})")
                continue
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise TransportError(f"unexpected response body: {exc}") from exc
        raise last_error


class MockProvider:
    """Fully specified offline provider keyed on request purpose.

    A pure function of (seed, prompt): replaying a request transcript
    reproduces outputs and the call log byte-for-byte. The mock parses the
    labeled prompt segments that the renderers emit.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.call_log: list[tuple[str, str]] = []  # (purpose, prompt digest)
        self.tier_log: list[tuple[str, str]] = []  # (tier, purpose), for routing checks
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.call_log.append((request.purpose, prompt_digest(request.prompt)))
            self.tier_log.append((request.tier, request.purpose))
        if request.purpose in ("generation", "follow_up"):
            return self._generate(request.prompt)
        if request.purpose == "importance":
            return self._rate(request.prompt)
        if request.purpose == "faithfulness":
            return self._faithfulness(request.prompt)
        if request.purpose == "contradiction":
            return self._contradiction(request.prompt)
        if request.purpose == "summary":
            return self._summary(request.prompt)
        return self._report(request.prompt)

    # -- helpers that invert the renderers' labeled segments --

    @staticmethod
    def _extract_block(prompt: str, label: str) -> str:
        pattern = re.escape(label) + r'\n"""\n(.*?)\n"""'
        match = re.search(pattern, prompt, re.S)
        return match.group(1) if match else ""

    def _generate(self, prompt: str) -> str:
        match = prompts.REQUESTED_COUNT_RE.search(prompt)
        count = int(match.group(1)) if match else 0
        columns = prompts.COLUMN_LINE_RE.findall(prompt)
        names = [name for name, _type in columns] or ["the dataset"]
        questions = []
        for k in range(count):
            text = f"MQ-{stable_hash_hex(self.seed, prompt, k)}: about {names[k % len(names)]}"
            questions.append({"text": text, "theme": THEMES[k % len(THEMES)].value})
        body = json.dumps({"questions": questions}, indent=2)
        return f"```json\n{body}\n```"

    def _rate(self, prompt: str) -> str:
        question = self._extract_block(prompt, prompts.LABEL_IMPORTANCE_QUESTION)
        return str(1 + stable_hash(question) % 5)

    def _faithfulness(self, prompt: str) -> str:
        answer = self._extract_block(prompt, prompts.LABEL_SUBMITTED_ANSWER)
        if len(answer) < 20:
            verdict = {"verdict": "fail", "feedback": "answer too brief to address the question"}
        else:
            verdict = {"verdict": "pass", "feedback": ""}
        return f"```json\n{json.dumps(verdict)}\n```"

    def _contradiction(self, prompt: str) -> str:
        candidate = self._extract_block(prompt, prompts.LABEL_CANDIDATE)
        if "CONTRA" in candidate:
            verdict = {"verdict": "fail", "feedback": "conflicts with an existing annotation"}
        else:
            verdict = {"verdict": "pass", "feedback": ""}
        return f"```json\n{json.dumps(verdict)}\n```"

    def _summary(self, prompt: str) -> str:
        match = re.search(rf"^{prompts.LABEL_THEME} (\w+)$", prompt, re.M)
        theme = match.group(1) if match else "unknown"
        count = len(prompts.QA_LINE_RE.findall(prompt))
        return f"SUMMARY({theme}): {count} answers"

    def _report(self, prompt: str) -> str:
        match = prompts.ANNOTATIONS_HEADER_RE.search(prompt)
        count = int(match.group(1)) if match else 0
        return f"SUMMARY(overview): {count} answers"


def complete_parsed(provider: Provider, request: CompletionRequest, parser: Callable):
    """Complete, parse, and retry once with a repair prompt on parse failure.

    Raises :class:`MalformedProviderOutput` when the repaired attempt is
    still unparseable; the provider itself stays a dumb pipe.
    """
    output = provider.complete(request)
    try:
        return parser(output)
    except MalformedOutput as first_error:
        repaired = replace(request, prompt=prompts.repair_prompt(request.prompt, str(first_error)))
        output = provider.complete(repaired)
        try:
            return parser(output)
        except MalformedOutput as second_error:
            raise MalformedProviderOutput(str(second_error)) from second_error
