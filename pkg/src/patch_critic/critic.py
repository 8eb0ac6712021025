"""Critic execution: prompt assembly, provider calls, verdict parsing.

A critic run is a pure function of its inputs once the response cache is
populated: requests are keyed by a digest of their canonical form, raw
responses are stored verbatim, and verdicts are parsed from the tagged
response format (``<analysis>``, ``<prediction>``, ``<confidence>``).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from typing import Protocol

from . import prompts
from .cache import cache_key, canonical_request
from .dataset import FAIL, PASS, TaskInstance, TestCase
from .errors import PatchCriticError

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 4096


class VerdictParseError(PatchCriticError):
    """Response text does not contain a usable tagged verdict."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class MissingPredictionError(VerdictParseError):
    pass


class InvalidPredictionError(VerdictParseError):
    pass


class MissingConfidenceError(VerdictParseError):
    pass


class ProviderError(PatchCriticError):
    """Transport failure talking to the generation provider."""


class NoTestsError(PatchCriticError):
    """An isolated test-aware critic was given an instance with no tests."""


@dataclass(frozen=True)
class CriticRequest:
    """One generation request; this is the cache key material."""

    model_id: str
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CriticVerdict:
    """One parsed critic output."""

    prediction: str  # PASS | FAIL
    confidence: int  # 0..100
    analysis: str
    variant: str = ""
    request_digest: str = ""
    test_id: str | None = None
    forced: bool = False  # set by the calibration policy
    confidence_defaulted: bool = False  # lenient parse had to substitute 50

    def __post_init__(self):
        if not 0 <= self.confidence <= 100:
            raise ValueError("confidence must be within [0, 100]")
        if self.forced and self.prediction != FAIL:
            raise ValueError("forced verdicts must predict fail")


@dataclass(frozen=True)
class CriticSubject:
    """Prepared inputs for one (instance, workflow, variant) evaluation."""

    tests: tuple[TestCase, ...] = ()
    source_text: str = ""  # concatenated post-change functions
    patch_text: str = ""  # candidate patch (default or function-level context)
    reference_patch_text: str = ""  # gold change patch, change-aware only
    issue_description: str = ""
    hints: str | None = None


class GenerationProvider(Protocol):
    def generate(self, request: CriticRequest) -> str: ...


class ResponseCache(Protocol):
    def lookup(self, digest: str) -> str | None: ...

    def store(self, digest: str, response: str, request: str | None = None) -> None: ...


_TAG_RES = {
    name: re.compile(rf"<{name}>(.*?)</{name}>", re.DOTALL)
    for name in ("prediction", "confidence", "analysis")
}
_INT_RE = re.compile(r"-?\d+")


def _last_tag(response: str, name: str) -> str | None:
    matches = _TAG_RES[name].findall(response)
    return matches[-1] if matches else None


def parse_verdict(response: str, strict: bool = False) -> CriticVerdict:
    """Extract the last well-formed verdict tags from ``response``.

    ``yes`` maps to a pass prediction, ``no`` to fail; the confidence is
    parsed as an integer and clamped to [0, 100]. A missing confidence tag
    is an error in strict mode; otherwise 50 is substituted and the verdict
    flagged. Never raises anything other than :class:`VerdictParseError`.
    """
    if not isinstance(response, str):
        raise VerdictParseError("response is not text", raw=repr(response))
    prediction_text = _last_tag(response, "prediction")
    if prediction_text is None:
        raise MissingPredictionError("no <prediction> tag in response", raw=response)
    word = prediction_text.strip().lower()
    if word == "yes":
        prediction = PASS
    elif word == "no":
        prediction = FAIL
    else:
        raise InvalidPredictionError(
            f"prediction must be yes or no, got {prediction_text!r}", raw=response
        )

    confidence_text = _last_tag(response, "confidence")
    confidence_defaulted = False
    if confidence_text is None:
        if strict:
            raise MissingConfidenceError("no <confidence> tag in response", raw=response)
        confidence, confidence_defaulted = 50, True
    else:
        m = _INT_RE.search(confidence_text)
        if m is None:
            if strict:
                raise MissingConfidenceError(
                    f"confidence is not an integer: {confidence_text!r}", raw=response
                )
            confidence, confidence_defaulted = 50, True
        else:
            confidence = max(0, min(100, int(m.group())))

    analysis = _last_tag(response, "analysis") or ""
    return CriticVerdict(
        prediction=prediction,
        confidence=confidence,
        analysis=analysis.strip(),
        confidence_defaulted=confidence_defaulted,
    )


def build_prompt(variant: str, inputs: dict[str, str]) -> str:
    return prompts.build_prompt(variant, inputs)


def _joined_tests(subject: CriticSubject) -> str:
    return "\n\n".join(t.body for t in subject.tests)


def prompt_inputs(
    variant: str, subject: CriticSubject, test: TestCase | None = None
) -> dict[str, str]:
    """Placeholder map for one prompt of ``variant`` over ``subject``."""
    if variant == prompts.ISOLATED_TEST_SOURCE:
        assert test is not None
        return {"source": subject.source_text, "test": test.body}
    if variant == prompts.ISOLATED_TEST_PATCH:
        assert test is not None
        return {"patch": subject.patch_text, "test": test.body}
    if variant == prompts.HOLISTIC_TEST_SOURCE:
        return {"source": subject.source_text, "tests": _joined_tests(subject)}
    if variant == prompts.HOLISTIC_TEST_PATCH:
        return {"patch": subject.patch_text, "tests": _joined_tests(subject)}
    if variant in (prompts.CHANGE_AWARE_DEFAULT, prompts.CHANGE_AWARE_FUNCTION):
        return {
            "patch": subject.patch_text,
            "reference_patch": subject.reference_patch_text,
        }
    if variant == prompts.REFERENCE_FREE:
        return {
            "issue_description": subject.issue_description,
            "patch": subject.patch_text,
        }
    if variant == prompts.REFERENCE_FREE_HINTS:
        if subject.hints is None:
            raise prompts.PromptError(
                f"{variant}: instance has no hints to fill the template with"
            )
        return {
            "issue_description": subject.issue_description,
            "hints": subject.hints,
            "patch": subject.patch_text,
        }
    raise prompts.PromptError(f"unknown critic variant {variant!r}")


def run_critic(
    variant: str,
    instance: TaskInstance,
    subject: CriticSubject,
    client: GenerationProvider,
    cache: ResponseCache,
    *,
    model_id: str,
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    strict: bool = False,
) -> list[CriticVerdict]:
    """Run one critic over a prepared subject.

    Isolated variants yield one verdict per test, ordered by test_id; the
    other variants yield a single verdict. Requests hit the cache first;
    fresh responses are stored under their request digest before parsing,
    so even a response that fails to parse is kept for audit.
    """
    if variant in prompts.ISOLATED_VARIANTS:
        units: list[TestCase | None] = sorted(subject.tests, key=lambda t: t.test_id)
        if not units:
            raise NoTestsError(f"{instance.instance_id}: no tests for {variant}")
    else:
        units = [None]

    verdicts = []
    for test in units:
        prompt = build_prompt(variant, prompt_inputs(variant, subject, test))
        request = CriticRequest(model_id, prompt, temperature, max_tokens)
        digest = cache_key(request)
        response = cache.lookup(digest)
        if response is None:
            response = client.generate(request)
            cache.store(digest, response, canonical_request(request))
        verdict = parse_verdict(response, strict=strict)
        verdicts.append(
            replace(
                verdict,
                variant=variant,
                request_digest=digest,
                test_id=test.test_id if test is not None else None,
            )
        )
    return verdicts
