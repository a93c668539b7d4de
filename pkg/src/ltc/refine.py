"""Constrained sentence rewriting through a pluggable chat endpoint.

The endpoint is configured entirely through the environment (base URL,
credential, model name); a file-backed stub makes batch refinement
reproducible offline. Rewrites violating the checkable constraints are
retried; on exhaustion the original sentence is kept so the regular and
refined datasets stay index-aligned.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .dataset import Triple

log = logging.getLogger(__name__)

PROMPT_STYLES = ("requirement-list", "role-playing")
_STYLE_FILES = {"requirement-list": "requirement_list.txt", "role-playing": "role_playing.txt"}

ENV_BASE_URL = "LTC_LLM_BASE_URL"
ENV_KEY = "LTC_LLM_KEY"
ENV_MODEL = "LTC_LLM_MODEL"
ENV_STUB_FILE = "LTC_LLM_STUB_FILE"
ENV_TEMPERATURE = "LTC_LLM_TEMPERATURE"

DEFAULT_MAX_RETRIES = 3
DEFAULT_TEMPERATURE = 0.7


@dataclass(frozen=True)
class RefineRequest:
    sentence: str
    triple: Triple
    prompt_style: str = "requirement-list"
    max_retries: int = DEFAULT_MAX_RETRIES


@dataclass
class ConstraintReport:
    entities_present: dict[str, bool]
    differs_from_original: bool
    non_empty: bool
    # requirement "do not change the original meaning" has no automated
    # check; surfaced here so reports stay honest about it
    meaning_preserved: Optional[bool] = None

    def all_pass(self) -> bool:
        return (all(self.entities_present.values())
                and self.differs_from_original and self.non_empty)

    def to_dict(self) -> dict:
        return {
            "entities_present": dict(self.entities_present),
            "differs_from_original": self.differs_from_original,
            "non_empty": self.non_empty,
            "meaning_preserved": "unchecked",
        }


@dataclass
class RefineResult:
    refined: str
    attempts: int
    constraint_report: ConstraintReport
    fell_back: bool


def load_template(style: str) -> str:
    if style not in _STYLE_FILES:
        raise ValueError(f"unknown prompt style {style!r}; choose from {PROMPT_STYLES}")
    return resources.files("ltc").joinpath(f"assets/prompts/{_STYLE_FILES[style]}").read_text("utf-8")


def render_prompt(req: RefineRequest) -> str:
    """Fill the shipped template; only the placeholders change."""
    for kind, span in req.triple.spans().items():
        if not span.text:
            raise ValueError(f"cannot render prompt: empty {kind} text")
    return load_template(req.prompt_style).format(
        sentence=req.sentence,
        person=req.triple.person.text,
        time=req.triple.time.text,
        location=req.triple.location.text,
    )


def check_constraints(original: str, refined: str, triple: Triple) -> ConstraintReport:
    """Machine-checkable rewrite constraints.

    Entity containment is case-sensitive (the rewrite must keep the exact
    words); identity is judged after whitespace normalization.
    """
    norm = lambda s: " ".join(s.split())
    return ConstraintReport(
        entities_present={k: s.text in refined for k, s in triple.spans().items()},
        differs_from_original=norm(refined) != norm(original),
        non_empty=bool(refined.strip()),
    )


class EndpointError(RuntimeError):
    pass


class StubEndpoint:
    """Canned responses keyed by the original sentence.

    The stub file maps a sentence to either one string or a list consumed
    across attempts (the last entry repeats). Unknown sentences echo the
    input, which trips the identity constraint and forces a fallback.
    """

    def __init__(self, path):
        with open(path, encoding="utf-8") as fp:
            self._canned = json.load(fp)
        self._cursor: dict[str, int] = {}

    def complete(self, prompt: str, sentence: str) -> str:
        entry = self._canned.get(sentence)
        if entry is None:
            return sentence
        if isinstance(entry, str):
            return entry
        i = min(self._cursor.get(sentence, 0), len(entry) - 1)
        self._cursor[sentence] = i + 1
        return entry[i]


class ChatEndpoint:
    """Minimal JSON chat-completion client (single user message)."""

    def __init__(self, base_url: str, api_key: str = "", model: str = "",
                 temperature: float = DEFAULT_TEMPERATURE, timeout: float = 60.0,
                 max_attempts: int = 3, backoff: float = 1.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.temperature = temperature
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff

    def complete(self, prompt: str, sentence: str) -> str:
        import requests

        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_err: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = requests.post(f"{self.base_url}/chat/completions",
                                     json=payload, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                data = resp.json()
                return data["choices"][0]["message"]["content"].strip()
            except Exception as err:  # noqa: BLE001 - endpoint failures are retriable
                last_err = err
                time.sleep(self.backoff * (2 ** attempt))
        raise EndpointError(f"chat endpoint failed after {self.max_attempts} attempts: {last_err}")


def endpoint_from_env(stub: bool = False):
    """Build an endpoint from LTC_LLM_* variables; stub file wins if set."""
    stub_file = os.environ.get(ENV_STUB_FILE)
    if stub or stub_file:
        if not stub_file:
            raise EndpointError(f"stub mode requested but {ENV_STUB_FILE} is unset")
        return StubEndpoint(stub_file)
    base = os.environ.get(ENV_BASE_URL)
    if not base:
        raise EndpointError(f"{ENV_BASE_URL} is unset and no stub file given")
    return ChatEndpoint(base, api_key=os.environ.get(ENV_KEY, ""),
                        model=os.environ.get(ENV_MODEL, ""),
                        temperature=float(os.environ.get(ENV_TEMPERATURE,
                                                         DEFAULT_TEMPERATURE)))


def refine(req: RefineRequest, endpoint) -> RefineResult:
    """render -> call -> check loop, falling back to the original sentence.

    Endpoint failures never abort a batch: they count as failed attempts
    and the sample falls back.
    """
    attempts = 0
    report = check_constraints(req.sentence, req.sentence, req.triple)
    while attempts < req.max_retries:
        attempts += 1
        try:
            candidate = endpoint.complete(render_prompt(req), req.sentence)
        except EndpointError as err:
            log.warning("refine attempt %d failed: %s", attempts, err)
            continue
        report = check_constraints(req.sentence, candidate, req.triple)
        if report.all_pass():
            return RefineResult(refined=candidate, attempts=attempts,
                                constraint_report=report, fell_back=False)
    return RefineResult(refined=req.sentence, attempts=attempts,
                        constraint_report=report, fell_back=True)


def refine_batch(samples, endpoint, style: str = "requirement-list",
                 max_retries: int = DEFAULT_MAX_RETRIES):
    """Refine a sample list; yields (sample, RefineResult) pairs in order.

    Per-sample results depend only on that sample and the endpoint, so
    order never changes outcomes.
    """
    for sample in samples:
        req = RefineRequest(sentence=sample.sentence, triple=sample.triple,
                            prompt_style=style, max_retries=max_retries)
        yield sample, refine(req, endpoint)
