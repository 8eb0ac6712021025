"""Classification metrics, workflow ranking and report assembly.

Metrics with zero denominators return ``None`` (rendered ``n/a``) instead
of a silent zero. Spearman uses average ranks for ties and is undefined
when either side is constant.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .calibration import BuildPrediction
from .dataset import PASS, SUCCESS
from .errors import PatchCriticError


class EvaluationError(PatchCriticError):
    pass


class CoverageError(EvaluationError):
    """Predictions and labels do not cover the same instances."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricSet:
    """Accuracy/precision/recall/F1/specificity; None marks undefined."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    specificity: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "specificity": self.specificity,
        }


@dataclass(frozen=True)
class RankingResult:
    instance_id: str
    predicted_ranks: Mapping[str, float]
    true_ranks: Mapping[str, float]
    rho: float | None


def confusion(
    preds: Sequence[str], labels: Sequence[str], positive: str = PASS
) -> ConfusionCounts:
    """Count a binary confusion matrix with ``positive`` as the positive class."""
    if len(preds) != len(labels):
        raise EvaluationError(
            f"length mismatch: {len(preds)} predictions vs {len(labels)} labels"
        )
    if not preds:
        raise EvaluationError("cannot build a confusion matrix from zero items")
    tp = fp = tn = fn = 0
    for pred, label in zip(preds, labels):
        if pred == positive:
            if label == positive:
                tp += 1
            else:
                fp += 1
        else:
            if label == positive:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(numerator: int, denominator: int) -> float | None:
    return numerator / denominator if denominator else None


def metrics(counts: ConfusionCounts) -> MetricSet:
    """Standard metric set from confusion counts; no division faults."""
    if counts.total < 1:
        raise EvaluationError("metrics need at least one counted item")
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricSet(
        accuracy=(counts.tp + counts.tn) / counts.total,
        precision=precision,
        recall=recall,
        f1=f1,
        specificity=_ratio(counts.tn, counts.tn + counts.fp),
    )


def f1_from(precision: float, recall: float) -> float:
    """F1 directly from precision and recall (harmonic mean)."""
    if precision + recall == 0:
        raise EvaluationError("F1 undefined when precision + recall is zero")
    return 2 * precision * recall / (precision + recall)


def relative_change(before: float, after: float) -> float:
    """Percent change from ``before`` to ``after``."""
    if before == 0:
        raise EvaluationError("relative change undefined for a zero baseline")
    return (after - before) / before * 100.0


def average_ranks(values: Sequence[float], descending: bool = False) -> list[float]:
    """1-based ranks; tied values share the mean of their rank positions."""
    order = sorted(range(len(values)), key=lambda k: values[k], reverse=descending)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Spearman rank-order correlation with average-rank tie handling.

    Returns None when either side is constant (correlation undefined).
    """
    if len(xs) != len(ys):
        raise EvaluationError("spearman needs equal-length sequences")
    if len(xs) < 2:
        raise EvaluationError("spearman needs at least two observations")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        return None
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    rho = statistics.correlation(rx, ry)
    return max(-1.0, min(1.0, rho))


def rank_workflows(
    rates: Mapping[str, float],
    truth: Mapping[str, float],
    instance_id: str = "",
) -> RankingResult:
    """Rank workflows by decreasing rate on both sides and correlate.

    ``truth`` maps workflows to true pass rates (or a binary resolution
    indicator). Only workflows present on both sides take part; fewer than
    two is an error.
    """
    common = sorted(set(rates) & set(truth))
    if len(common) < 2:
        raise EvaluationError(
            f"need at least 2 workflows on both sides, got {len(common)}"
        )
    predicted = [rates[w] for w in common]
    actual = [truth[w] for w in common]
    predicted_ranks = average_ranks(predicted, descending=True)
    true_ranks = average_ranks(actual, descending=True)
    if len(set(predicted_ranks)) == 1 or len(set(true_ranks)) == 1:
        rho = None
    else:
        rho = statistics.correlation(predicted_ranks, true_ranks)
        rho = max(-1.0, min(1.0, rho))
    return RankingResult(
        instance_id=instance_id,
        predicted_ranks=dict(zip(common, predicted_ranks)),
        true_ranks=dict(zip(common, true_ranks)),
        rho=rho,
    )


PASS_RATE_BINS = tuple(round(k * 0.1, 1) for k in range(10))


def pass_rate_histogram(rates: Sequence[float]) -> list[tuple[float, int]]:
    """(bin lower edge, count) rows over [0, 1] with width 0.1; 1.0 in the top bin."""
    counts = [0] * len(PASS_RATE_BINS)
    for rate in rates:
        index = min(int(rate * 10), len(PASS_RATE_BINS) - 1)
        counts[index] += 1
    return [(edge, counts[k]) for k, edge in enumerate(PASS_RATE_BINS)]


def rho_distribution(rhos: Sequence[float | None]) -> dict[str, int]:
    """Counts per rho value; undefined correlations land in "n/a"."""
    out: dict[str, int] = {}
    for rho in rhos:
        key = "n/a" if rho is None else f"{rho:+.2f}"
        out[key] = out.get(key, 0) + 1
    return dict(sorted(out.items()))


def perfect_alignment_fraction(rhos: Sequence[float | None]) -> float | None:
    """Share of defined correlations that equal exactly 1."""
    defined = [rho for rho in rhos if rho is not None]
    if not defined:
        return None
    return sum(1 for rho in defined if rho == 1.0) / len(defined)


@dataclass(frozen=True)
class EvaluationReport:
    """Deterministic summary of one evaluation run."""

    variant: str
    micro: Mapping[str, MetricSet]  # workflow -> metrics over per-test oracles
    macro: Mapping[str, MetricSet]  # workflow -> metrics over build statuses
    predictions: tuple[BuildPrediction, ...]
    pass_rate_hists: Mapping[str, list[tuple[float, int]]]
    rho_values: tuple[float | None, ...] = ()
    baseline_rho_values: tuple[float | None, ...] = ()

    def to_json(self) -> str:
        payload = {
            "variant": self.variant,
            "micro": {w: m.as_dict() for w, m in sorted(self.micro.items())},
            "macro": {w: m.as_dict() for w, m in sorted(self.macro.items())},
            "predictions": [
                {
                    "instance_id": p.instance_id,
                    "workflow": p.workflow,
                    "status": p.status,
                    "pass_rate": p.pass_rate,
                    "per_test": dict(sorted(p.per_test.items())),
                }
                for p in self.predictions
            ],
            "pass_rate_histograms": {
                w: [[edge, count] for edge, count in rows]
                for w, rows in sorted(self.pass_rate_hists.items())
            },
            "rho_distribution": rho_distribution(self.rho_values),
            "perfect_alignment_fraction": perfect_alignment_fraction(self.rho_values),
            "baseline_rho_distribution": rho_distribution(self.baseline_rho_values),
            "baseline_perfect_alignment_fraction": perfect_alignment_fraction(
                self.baseline_rho_values
            ),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_metric_records(self) -> str:
        """One metric record per line: {scope, workflow, accuracy, ...}."""
        lines = []
        for scope, table in (("micro", self.micro), ("macro", self.macro)):
            for workflow, mset in sorted(table.items()):
                record = {"scope": scope, "workflow": workflow, "variant": self.variant}
                record.update(mset.as_dict())
                lines.append(json.dumps(record, sort_keys=True))
        return "".join(line + "\n" for line in lines)

    def to_text(self) -> str:
        """Plain-text table of metric rows (in %), one block per scope."""
        out = [f"variant: {self.variant}", ""]
        header = f"{'scope':<10} {'workflow':<20} {'acc':>7} {'prec':>7} {'rec':>7} {'f1':>7} {'spec':>7}"
        out.append(header)
        out.append("-" * len(header))
        for scope, table in (("micro", self.micro), ("macro", self.macro)):
            for workflow, mset in sorted(table.items()):
                cells = [
                    _pct(mset.accuracy),
                    _pct(mset.precision),
                    _pct(mset.recall),
                    _pct(mset.f1),
                    _pct(mset.specificity),
                ]
                out.append(
                    f"{scope:<10} {workflow:<20} "
                    + " ".join(f"{c:>7}" for c in cells)
                )
        fraction = perfect_alignment_fraction(self.rho_values)
        if fraction is not None:
            out.append("")
            out.append(f"perfect rank alignment: {fraction * 100:.1f}%")
        return "\n".join(out) + "\n"

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["workflow", "bin", "count"])
        for workflow, rows in sorted(self.pass_rate_hists.items()):
            for edge, count in rows:
                writer.writerow([workflow, f"{edge:.1f}", count])
        return buf.getvalue()

    def rho_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["series", "rho", "count"])
        for series, values in (
            ("predicted", self.rho_values),
            ("edit_distance", self.baseline_rho_values),
        ):
            for key, count in rho_distribution(values).items():
                writer.writerow([series, key, count])
        return buf.getvalue()


def _pct(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100:.1f}"


def build_report(
    variant: str,
    per_test_preds: Mapping[str, Mapping[tuple[str, str], str]],
    per_test_labels: Mapping[str, Mapping[tuple[str, str], str]],
    predictions: Sequence[BuildPrediction],
    build_labels: Mapping[tuple[str, str], str],
    rho_values: Sequence[float | None] = (),
    baseline_rho_values: Sequence[float | None] = (),
) -> EvaluationReport:
    """Assemble the report; identical inputs produce identical bytes.

    ``per_test_preds``/``per_test_labels`` map workflow -> {(instance_id,
    test_id) -> pass/fail}. ``build_labels`` maps (instance_id, workflow)
    -> success/failure and must cover every build prediction.
    """
    micro: dict[str, MetricSet] = {}
    for workflow in sorted(per_test_preds):
        preds_map = per_test_preds[workflow]
        labels_map = per_test_labels.get(workflow, {})
        missing = sorted(set(preds_map) - set(labels_map))
        if missing:
            raise CoverageError(
                f"no per-test label for {missing[0][0]}::{missing[0][1]} "
                f"(workflow {workflow})"
            )
        keys = sorted(preds_map)
        micro[workflow] = metrics(
            confusion([preds_map[k] for k in keys], [labels_map[k] for k in keys])
        )

    macro: dict[str, MetricSet] = {}
    by_workflow: dict[str, list[BuildPrediction]] = {}
    for prediction in predictions:
        by_workflow.setdefault(prediction.workflow, []).append(prediction)
    for workflow in sorted(by_workflow):
        rows = sorted(by_workflow[workflow], key=lambda p: p.instance_id)
        missing_ids = [
            p.instance_id for p in rows if (p.instance_id, workflow) not in build_labels
        ]
        if missing_ids:
            raise CoverageError(
                f"no build label for instance {missing_ids[0]!r} (workflow {workflow})"
            )
        macro[workflow] = metrics(
            confusion(
                [p.status for p in rows],
                [build_labels[(p.instance_id, workflow)] for p in rows],
                positive=SUCCESS,
            )
        )

    hists = {
        workflow: pass_rate_histogram(
            [p.pass_rate for p in sorted(rows, key=lambda p: p.instance_id)]
        )
        for workflow, rows in by_workflow.items()
    }
    ordered = tuple(sorted(predictions, key=lambda p: (p.instance_id, p.workflow)))
    return EvaluationReport(
        variant=variant,
        micro=micro,
        macro=macro,
        predictions=ordered,
        pass_rate_hists=hists,
        rho_values=tuple(rho_values),
        baseline_rho_values=tuple(baseline_rho_values),
    )
