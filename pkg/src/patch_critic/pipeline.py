"""Command pipelines: the work behind each CLI subcommand.

Every pipeline is deterministic given a warm cache and a fixed RunConfig:
provider calls may run in parallel, but results are joined and re-ordered
by (instance_id, workflow, test_id) before anything is written, and all
output records are sorted-key JSON lines.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import baselines, calibration, context, critic, dataset, evaluation, prompts
from .cache import OfflineProvider, ReplayCache
from .config import PATCH_CONTEXT_FUNCTION, RunConfig
from .dataset import FAILURE, PASS, SUCCESS, TaskInstance, TestCase
from .diff import Patch, SourceTree
from .errors import PatchCriticError

logger = logging.getLogger(__name__)


class PipelineError(PatchCriticError):
    pass


def _write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8") as handle:
        handle.write(content)
    os.replace(tmp_name, path)


def _write_records(path: Path, records: list[dict]) -> None:
    _write_text(
        path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    )


def _read_records(path: Path) -> list[dict]:
    if not path.exists():
        raise PipelineError(f"missing input file: {path} (run the earlier stage first)")
    return [
        json.loads(line)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


class Bundle:
    """Loaded dataset plus sidecars, with per-instance derived artifacts."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        instances = dataset.load_instances(cfg.dataset)
        candidates = dataset.load_candidates(cfg.candidates) if cfg.candidates else {}
        labels = dataset.load_labels(cfg.labels) if cfg.labels else {}
        self.instances = dataset.attach_sidecars(instances, candidates, labels)
        self.trees = dataset.load_trees(cfg.trees) if cfg.trees else {}
        self._tests: dict[str, list[TestCase]] = {}

    def tree(self, instance: TaskInstance) -> SourceTree:
        if instance.instance_id not in self.trees:
            raise PipelineError(
                f"no pre-commit tree for instance {instance.instance_id!r} "
                "(provide --trees)"
            )
        return self.trees[instance.instance_id]

    def tests(self, instance: TaskInstance) -> list[TestCase]:
        if instance.instance_id not in self._tests:
            self._tests[instance.instance_id] = dataset.extract_unseen_tests(
                instance.gold_test_patch,
                self.tree(instance),
                complexity_unit=self.cfg.complexity_unit,
            )
        return self._tests[instance.instance_id]

    def pairs(self) -> list[tuple[TaskInstance, str]]:
        out = []
        for instance in self.instances:
            for workflow in sorted(instance.candidates):
                out.append((instance, workflow))
        return out


def prepare_subject(
    bundle: Bundle, variant: str, instance: TaskInstance, workflow: str
) -> critic.CriticSubject:
    """Assemble exactly the inputs the given critic variant consumes."""
    candidate = instance.candidates[workflow]
    cfg = bundle.cfg
    needs_tests = variant in (
        prompts.ISOLATED_TEST_SOURCE,
        prompts.ISOLATED_TEST_PATCH,
        prompts.HOLISTIC_TEST_SOURCE,
        prompts.HOLISTIC_TEST_PATCH,
    )
    tests = tuple(bundle.tests(instance)) if needs_tests else ()

    source_text = ""
    if variant in (prompts.ISOLATED_TEST_SOURCE, prompts.HOLISTIC_TEST_SOURCE):
        fragments = context.extract_post_commit_functions(
            candidate, bundle.tree(instance)
        )
        source_text = "\n\n".join(f.text for f in fragments)

    patch_text = ""
    if variant != prompts.ISOLATED_TEST_SOURCE and variant != prompts.HOLISTIC_TEST_SOURCE:
        patch_text = _patch_text(bundle, instance, candidate, _wants_function(cfg, variant))

    reference_text = ""
    if variant in (prompts.CHANGE_AWARE_DEFAULT, prompts.CHANGE_AWARE_FUNCTION):
        reference_text = _patch_text(
            bundle, instance, instance.gold_change_patch, _wants_function(cfg, variant)
        )

    return critic.CriticSubject(
        tests=tests,
        source_text=source_text,
        patch_text=patch_text,
        reference_patch_text=reference_text,
        issue_description=instance.problem_statement,
        hints=instance.hints,
    )


def _wants_function(cfg: RunConfig, variant: str) -> bool:
    if variant == prompts.CHANGE_AWARE_DEFAULT:
        return False
    if variant == prompts.CHANGE_AWARE_FUNCTION:
        return True
    return cfg.patch_context == PATCH_CONTEXT_FUNCTION


def _patch_text(
    bundle: Bundle, instance: TaskInstance, patch: Patch, function_level: bool
) -> str:
    if function_level:
        return context.enhance_context(patch, bundle.tree(instance)).to_text()
    return patch.to_text()


def _make_provider(cfg: RunConfig):
    if cfg.offline:
        return OfflineProvider()
    from .providers import GenerationClient

    return GenerationClient()


def run_ingest(cfg: RunConfig) -> Path:
    """Validate the dataset and sidecars; write a summary."""
    bundle = Bundle(cfg)
    workflows = sorted({w for inst in bundle.instances for w in inst.candidates})
    labeled = sum(1 for inst in bundle.instances if inst.labels)
    summary = {
        "instances": len(bundle.instances),
        "instance_ids": [i.instance_id for i in bundle.instances],
        "workflows": workflows,
        "labeled_instances": labeled,
        "trees": sorted(bundle.trees),
    }
    out = Path(cfg.output_dir) / "ingest.json"
    _write_text(out, json.dumps(summary, sort_keys=True, indent=2) + "\n")
    logger.info("ingested %d instances, %d workflows", len(bundle.instances), len(workflows))
    return out


def run_extract_tests(cfg: RunConfig) -> Path:
    """Extract unseen tests for every instance; write tests.jsonl."""
    bundle = Bundle(cfg)
    records = []
    for instance in bundle.instances:
        for test in bundle.tests(instance):
            records.append(
                {
                    "instance_id": instance.instance_id,
                    "test_id": test.test_id,
                    "file_path": test.file_path,
                    "complexity": test.complexity,
                    "body": test.body,
                }
            )
    out = Path(cfg.output_dir) / "tests.jsonl"
    _write_records(out, records)
    return out


def run_enhance(cfg: RunConfig) -> Path:
    """Widen every candidate patch to function-level context."""
    bundle = Bundle(cfg)
    records = []
    for instance, workflow in bundle.pairs():
        enhanced = context.enhance_context(
            instance.candidates[workflow], bundle.tree(instance)
        )
        records.append(
            {
                "instance_id": instance.instance_id,
                "workflow": workflow,
                "patch": enhanced.to_text(),
            }
        )
    out = Path(cfg.output_dir) / "enhanced.jsonl"
    _write_records(out, records)
    return out


def run_evaluate(cfg: RunConfig, variant: str, provider=None) -> Path:
    """Run one critic variant over every (instance, workflow) pair.

    ``provider`` overrides the configured generation client (tests inject
    fakes here); by default it is an HTTP client, or a hard-failing stub in
    offline mode.
    """
    if variant not in prompts.ALL_VARIANTS:
        raise PipelineError(
            f"unknown variant {variant!r}; choose from {', '.join(prompts.ALL_VARIANTS)}"
        )
    bundle = Bundle(cfg)
    cache = ReplayCache(cfg.cache_dir)
    if provider is None:
        provider = _make_provider(cfg)

    def one(pair: tuple[TaskInstance, str]) -> list[dict]:
        instance, workflow = pair
        subject = prepare_subject(bundle, variant, instance, workflow)
        verdicts = critic.run_critic(
            variant,
            instance,
            subject,
            provider,
            cache,
            model_id=cfg.model_id,
        )
        return [
            {
                "instance_id": instance.instance_id,
                "workflow": workflow,
                "variant": variant,
                "test_id": v.test_id,
                "prediction": v.prediction,
                "confidence": v.confidence,
                "analysis": v.analysis,
                "request_digest": v.request_digest,
                "forced": v.forced,
                "confidence_defaulted": v.confidence_defaulted,
                "model_id": cfg.model_id,
            }
            for v in verdicts
        ]

    pairs = bundle.pairs()
    if not pairs:
        raise PipelineError("no candidate patches to evaluate (provide --candidates)")
    # Tests are extracted lazily and memoized; warm them serially so worker
    # threads only do provider I/O.
    for instance, _ in pairs:
        if variant in prompts.ISOLATED_VARIANTS or variant in (
            prompts.HOLISTIC_TEST_SOURCE,
            prompts.HOLISTIC_TEST_PATCH,
        ):
            bundle.tests(instance)
    records: list[dict] = []
    with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
        for result in pool.map(one, pairs):
            records.extend(result)
    records.sort(key=lambda r: (r["instance_id"], r["workflow"], r["test_id"] or ""))
    out = Path(cfg.output_dir) / "verdicts" / f"{variant}.jsonl"
    _write_records(out, records)
    return out


def run_aggregate(cfg: RunConfig, variant: str) -> Path:
    """Apply the threshold policy and the all-pass rule to verdict records."""
    verdict_path = Path(cfg.output_dir) / "verdicts" / f"{variant}.jsonl"
    verdict_records = _read_records(verdict_path)
    bundle = Bundle(cfg)
    tests_by_id: dict[tuple[str, str], TestCase] = {}
    if variant in prompts.ISOLATED_VARIANTS:
        for instance in bundle.instances:
            for test in bundle.tests(instance):
                tests_by_id[(instance.instance_id, test.test_id)] = test

    grouped: dict[tuple[str, str], list[dict]] = {}
    for record in verdict_records:
        grouped.setdefault((record["instance_id"], record["workflow"]), []).append(
            record
        )

    policy = cfg.policy
    records = []
    for (instance_id, workflow), group in sorted(grouped.items()):
        if variant in prompts.ISOLATED_VARIANTS:
            finals: dict[str, str] = {}
            forced: list[str] = []
            for row in sorted(group, key=lambda r: r["test_id"]):
                test = tests_by_id.get((instance_id, row["test_id"]))
                if test is None:
                    raise PipelineError(
                        f"verdict for unknown test {row['test_id']!r} "
                        f"(instance {instance_id})"
                    )
                verdict = critic.CriticVerdict(
                    prediction=row["prediction"],
                    confidence=row["confidence"],
                    analysis="",
                    variant=variant,
                    test_id=row["test_id"],
                    forced=row.get("forced", False),
                )
                final = calibration.apply_threshold(verdict, test, policy)
                finals[row["test_id"]] = final.prediction
                if final.forced:
                    forced.append(row["test_id"])
            status, pass_rate = calibration.aggregate_build(list(finals.values()))
            records.append(
                {
                    "instance_id": instance_id,
                    "workflow": workflow,
                    "status": status,
                    "pass_rate": pass_rate,
                    "per_test": dict(sorted(finals.items())),
                    "forced_tests": sorted(forced),
                }
            )
        else:
            (row,) = group
            status = SUCCESS if row["prediction"] == PASS else FAILURE
            records.append(
                {
                    "instance_id": instance_id,
                    "workflow": workflow,
                    "status": status,
                    "pass_rate": 1.0 if status == SUCCESS else 0.0,
                    "per_test": {},
                    "forced_tests": [],
                }
            )
    out = Path(cfg.output_dir) / "predictions" / f"{variant}.jsonl"
    _write_records(out, records)
    return out


def _true_rates(instance: TaskInstance) -> dict[str, float]:
    """True per-workflow pass rate; binary build status when outcomes absent."""
    out = {}
    for workflow, truth in instance.labels.items():
        if truth.test_outcomes:
            outcomes = list(truth.test_outcomes.values())
            out[workflow] = sum(1 for o in outcomes if o == PASS) / len(outcomes)
        else:
            out[workflow] = 1.0 if truth.build_status == SUCCESS else 0.0
    return out


def _make_embedder(cfg: RunConfig) -> baselines.CachingEmbedder:
    if cfg.embeddings:
        provider = baselines.RecordedEmbeddings(cfg.embeddings)
    elif cfg.offline:
        provider = OfflineProvider()
    else:
        from .providers import EmbeddingClient

        provider = EmbeddingClient()
    return baselines.CachingEmbedder(provider, cfg.embed_model_id)


def run_rank(
    cfg: RunConfig, variant: str, edit_distance_baseline: bool = False
) -> Path:
    """Rank workflows per instance by predicted pass rate vs. the truth."""
    predictions = _read_records(Path(cfg.output_dir) / "predictions" / f"{variant}.jsonl")
    rates: dict[str, dict[str, float]] = {}
    for row in predictions:
        rates.setdefault(row["instance_id"], {})[row["workflow"]] = row["pass_rate"]

    workflows = sorted({w for by_wf in rates.values() for w in by_wf})
    if len(workflows) < 2:
        raise evaluation.EvaluationError(
            f"ranking needs at least 2 workflows, found {len(workflows)}"
        )

    bundle = Bundle(cfg)
    embedder = _make_embedder(cfg) if edit_distance_baseline else None
    records = []
    for instance in bundle.instances:
        predicted = rates.get(instance.instance_id, {})
        truth = _true_rates(instance)
        common = sorted(set(predicted) & set(truth))
        if len(common) < 2:
            logger.info(
                "skipping %s: fewer than 2 workflows with predictions and labels",
                instance.instance_id,
            )
            continue
        result = evaluation.rank_workflows(
            predicted, truth, instance_id=instance.instance_id
        )
        record = {
            "instance_id": instance.instance_id,
            "predicted_ranks": dict(sorted(result.predicted_ranks.items())),
            "true_ranks": dict(sorted(result.true_ranks.items())),
            "rho": result.rho,
        }
        if embedder is not None:
            similarities = {
                workflow: baselines.patch_similarity(
                    instance.candidates[workflow], instance.gold_change_patch, embedder
                )
                for workflow in common
                if workflow in instance.candidates
            }
            baseline_result = evaluation.rank_workflows(
                similarities, truth, instance_id=instance.instance_id
            )
            record["edit_distance_ranks"] = dict(
                sorted(baseline_result.predicted_ranks.items())
            )
            record["edit_distance_rho"] = baseline_result.rho
        records.append(record)
    out = Path(cfg.output_dir) / "rankings" / f"{variant}.jsonl"
    _write_records(out, records)
    return out


def run_report(cfg: RunConfig, variant: str) -> Path:
    """Assemble the evaluation report for one variant."""
    out_dir = Path(cfg.output_dir)
    predictions_rows = _read_records(out_dir / "predictions" / f"{variant}.jsonl")
    bundle = Bundle(cfg)

    build_labels: dict[tuple[str, str], str] = {}
    per_test_labels: dict[str, dict[tuple[str, str], str]] = {}
    for instance in bundle.instances:
        for workflow, truth in instance.labels.items():
            build_labels[(instance.instance_id, workflow)] = truth.build_status
            for test_id, outcome in truth.test_outcomes.items():
                per_test_labels.setdefault(workflow, {})[
                    (instance.instance_id, test_id)
                ] = outcome

    predictions = [
        calibration.BuildPrediction(
            instance_id=row["instance_id"],
            workflow=row["workflow"],
            status=row["status"],
            per_test=row["per_test"],
            pass_rate=row["pass_rate"],
        )
        for row in predictions_rows
    ]
    per_test_preds: dict[str, dict[tuple[str, str], str]] = {}
    for row in predictions_rows:
        for test_id, prediction in row["per_test"].items():
            per_test_preds.setdefault(row["workflow"], {})[
                (row["instance_id"], test_id)
            ] = prediction

    rankings_path = out_dir / "rankings" / f"{variant}.jsonl"
    rho_values: list[float | None] = []
    baseline_rho_values: list[float | None] = []
    if rankings_path.exists():
        for row in _read_records(rankings_path):
            rho_values.append(row["rho"])
            if "edit_distance_rho" in row:
                baseline_rho_values.append(row["edit_distance_rho"])

    report = evaluation.build_report(
        variant,
        per_test_preds,
        per_test_labels,
        predictions,
        build_labels,
        rho_values=rho_values,
        baseline_rho_values=baseline_rho_values,
    )
    report_dir = out_dir / "report"
    _write_text(report_dir / f"report_{variant}.json", report.to_json())
    _write_text(report_dir / f"metrics_{variant}.jsonl", report.to_metric_records())
    _write_text(report_dir / f"report_{variant}.txt", report.to_text())
    _write_text(report_dir / f"pass_rate_hist_{variant}.csv", report.histogram_csv())
    _write_text(report_dir / f"rho_{variant}.csv", report.rho_csv())
    return report_dir / f"report_{variant}.json"
