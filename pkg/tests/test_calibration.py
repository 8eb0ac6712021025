"""Threshold forcing policy and build aggregation."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from patch_critic.calibration import (
    BuildPrediction,
    EmptyTestSetError,
    ThresholdPolicy,
    aggregate_build,
    apply_threshold,
    make_build_prediction,
    predicted_pass_rates,
)
from patch_critic.critic import CriticVerdict
from patch_critic.dataset import FAIL, FAILURE, PASS, SUCCESS, TestCase


def verdict(prediction: str, confidence: int, test_id: str = "t") -> CriticVerdict:
    return CriticVerdict(
        prediction=prediction, confidence=confidence, analysis="", test_id=test_id
    )


def case_with_complexity(complexity: float) -> TestCase:
    body = "x" * max(int(complexity), 1)
    return TestCase("f.py::test_x", "f.py", body, complexity)


class TestApplyThreshold:
    def test_low_confidence_complex_pass_is_forced(self):
        policy = ThresholdPolicy()
        out = apply_threshold(verdict(PASS, 60), case_with_complexity(80), policy)
        assert out.prediction == FAIL
        assert out.forced

    def test_high_confidence_pass_unchanged(self):
        policy = ThresholdPolicy()
        v = verdict(PASS, 90)
        assert apply_threshold(v, case_with_complexity(80), policy) == v

    def test_fail_verdicts_never_touched(self):
        policy = ThresholdPolicy()
        v = verdict(FAIL, 50)
        assert apply_threshold(v, case_with_complexity(10), policy) == v
        assert apply_threshold(v, case_with_complexity(500), policy) == v

    def test_boundaries_exact(self):
        policy = ThresholdPolicy()
        # confidence bound is inclusive
        assert apply_threshold(verdict(PASS, 65), case_with_complexity(51), policy).forced
        assert not apply_threshold(
            verdict(PASS, 66), case_with_complexity(51), policy
        ).forced
        # complexity bound is exclusive
        assert not apply_threshold(
            verdict(PASS, 65), case_with_complexity(50), policy
        ).forced

    def test_short_test_low_confidence_unchanged(self):
        policy = ThresholdPolicy()
        v = verdict(PASS, 60)
        assert apply_threshold(v, case_with_complexity(40), policy) == v

    @given(
        prediction=st.sampled_from([PASS, FAIL]),
        confidence=st.integers(0, 100),
        complexity=st.floats(0, 1000),
    )
    def test_forcing_soundness(self, prediction, confidence, complexity):
        policy = ThresholdPolicy()
        before = verdict(prediction, confidence)
        after = apply_threshold(before, case_with_complexity(complexity), policy)
        if before.prediction == FAIL:
            assert after == before
        if after != before:
            assert after.forced and after.prediction == FAIL

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            ThresholdPolicy(confidence_max=150)
        with pytest.raises(ValueError):
            ThresholdPolicy(complexity_min=-1)

    @given(
        st.lists(
            st.tuples(
                st.sampled_from([PASS, FAIL]),  # prediction
                st.integers(0, 100),  # confidence
                st.floats(1, 200),  # complexity
                st.sampled_from([PASS, FAIL]),  # true outcome
            ),
            min_size=1,
            max_size=40,
        )
    )
    def test_specificity_never_decreases(self, rows):
        from patch_critic.evaluation import confusion, metrics

        policy = ThresholdPolicy()
        before, after, truth = [], [], []
        for prediction, confidence, complexity, outcome in rows:
            v = verdict(prediction, confidence)
            final = apply_threshold(v, case_with_complexity(complexity), policy)
            before.append(v.prediction)
            after.append(final.prediction)
            truth.append(outcome)
        spec_before = metrics(confusion(before, truth)).specificity
        spec_after = metrics(confusion(after, truth)).specificity
        if spec_before is not None and spec_after is not None:
            assert spec_after >= spec_before


class TestAggregateBuild:
    def test_all_pass_is_success(self):
        assert aggregate_build([PASS, PASS, PASS]) == (SUCCESS, 1.0)

    def test_single_fail_is_failure(self):
        assert aggregate_build([PASS, FAIL]) == (FAILURE, 0.5)

    def test_empty_is_error(self):
        with pytest.raises(EmptyTestSetError):
            aggregate_build([])

    def test_bad_value_rejected(self):
        with pytest.raises(ValueError):
            aggregate_build([PASS, "maybe"])

    def test_exhaustive_small_vectors(self):
        for n in range(1, 8):
            for mask in range(2 ** n):
                vector = [PASS if mask & (1 << k) else FAIL for k in range(n)]
                status, rate = aggregate_build(vector)
                assert status == (SUCCESS if all(v == PASS for v in vector) else FAILURE)
                assert rate == sum(1 for v in vector if v == PASS) / n

    @given(st.lists(st.sampled_from([PASS, FAIL]), min_size=1, max_size=30))
    def test_monotonicity(self, vector):
        status, rate = aggregate_build(vector)
        for k, value in enumerate(vector):
            if value == PASS:
                flipped = list(vector)
                flipped[k] = FAIL
                new_status, new_rate = aggregate_build(flipped)
                assert new_rate < rate
                assert not (status == FAILURE and new_status == SUCCESS)


class TestPredictedPassRates:
    def test_rates_by_workflow(self):
        rates = predicted_pass_rates({"A": [PASS, PASS], "B": [PASS, FAIL]})
        assert rates == {"A": 1.0, "B": 0.5}

    def test_all_fail_is_zero(self):
        assert predicted_pass_rates({"A": [FAIL, FAIL]}) == {"A": 0.0}

    def test_flip_decreases_by_one_over_n(self):
        base = predicted_pass_rates({"A": [PASS] * 4})["A"]
        flipped = predicted_pass_rates({"A": [PASS] * 3 + [FAIL]})["A"]
        assert base - flipped == pytest.approx(1 / 4)

    def test_zero_verdict_workflow_is_error(self):
        with pytest.raises(EmptyTestSetError):
            predicted_pass_rates({"A": []})


class TestMakeBuildPrediction:
    def test_assembles_fields(self):
        verdicts = [verdict(PASS, 90, "f.py::t1"), verdict(FAIL, 80, "f.py::t2")]
        prediction = make_build_prediction("inst-1", "alpha", verdicts)
        assert prediction == BuildPrediction(
            instance_id="inst-1",
            workflow="alpha",
            status=FAILURE,
            per_test={"f.py::t1": PASS, "f.py::t2": FAIL},
            pass_rate=0.5,
        )
