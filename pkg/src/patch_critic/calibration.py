"""Confidence/complexity forcing policy and verdict aggregation.

Low-confidence pass predictions on complex tests are assumed failures;
per-test verdicts then aggregate into a build prediction under the
all-pass rule.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

from .critic import CriticVerdict
from .dataset import COMPLEXITY_CHARS, FAIL, FAILURE, PASS, SUCCESS, TestCase
from .errors import PatchCriticError

DEFAULT_CONFIDENCE_MAX = 65
DEFAULT_COMPLEXITY_MIN = 50


class EmptyTestSetError(PatchCriticError):
    """Aggregation over zero verdicts is undefined."""


@dataclass(frozen=True)
class ThresholdPolicy:
    """Assume failure when confidence <= 65 and complexity > 50.

    Boundaries are exactly as stated: the confidence bound is inclusive,
    the complexity bound exclusive. The complexity unit is part of the
    policy because the bound's magnitude only makes sense together with it.
    """

    confidence_max: float = DEFAULT_CONFIDENCE_MAX
    complexity_min: float = DEFAULT_COMPLEXITY_MIN
    complexity_unit: str = COMPLEXITY_CHARS

    def __post_init__(self):
        if not 0 <= self.confidence_max <= 100:
            raise ValueError("confidence_max must be within [0, 100]")
        if self.complexity_min < 0:
            raise ValueError("complexity_min must be >= 0")


@dataclass(frozen=True)
class BuildPrediction:
    """Predicted build outcome for one (instance, workflow) pair."""

    instance_id: str
    workflow: str
    status: str  # SUCCESS | FAILURE
    per_test: Mapping[str, str] = field(default_factory=dict)  # test_id -> verdict
    pass_rate: float = 0.0


def apply_threshold(
    verdict: CriticVerdict, test: TestCase, policy: ThresholdPolicy
) -> CriticVerdict:
    """Force a pass verdict to fail when the policy says to distrust it.

    Only pass predictions can flip; fail verdicts are never touched.
    Forced verdicts carry the ``forced`` flag. Expects verdicts from an
    isolated test-aware critic.
    """
    if (
        verdict.prediction == PASS
        and verdict.confidence <= policy.confidence_max
        and test.complexity > policy.complexity_min
    ):
        return replace(verdict, prediction=FAIL, forced=True)
    return verdict


def aggregate_build(predictions: Sequence[str]) -> tuple[str, float]:
    """All-pass rule over final per-test predictions: (status, pass_rate)."""
    if not predictions:
        raise EmptyTestSetError("cannot aggregate an empty verdict list")
    for value in predictions:
        if value not in (PASS, FAIL):
            raise ValueError(f"bad prediction value {value!r}")
    passed = sum(1 for value in predictions if value == PASS)
    status = SUCCESS if passed == len(predictions) else FAILURE
    return status, passed / len(predictions)


def make_build_prediction(
    instance_id: str, workflow: str, verdicts: Sequence[CriticVerdict]
) -> BuildPrediction:
    """Assemble a :class:`BuildPrediction` from final per-test verdicts."""
    per_test = {v.test_id or "": v.prediction for v in verdicts}
    status, pass_rate = aggregate_build([v.prediction for v in verdicts])
    return BuildPrediction(
        instance_id=instance_id,
        workflow=workflow,
        status=status,
        per_test=per_test,
        pass_rate=pass_rate,
    )


def predicted_pass_rates(
    verdicts_by_workflow: Mapping[str, Sequence[str]],
) -> dict[str, float]:
    """Per-workflow pass rate over final per-test predictions."""
    rates = {}
    for workflow, predictions in verdicts_by_workflow.items():
        if not predictions:
            raise EmptyTestSetError(f"workflow {workflow!r} has zero verdicts")
        _, rate = aggregate_build(predictions)
        rates[workflow] = rate
    return rates
