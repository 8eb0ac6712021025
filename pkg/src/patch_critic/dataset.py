"""Task instance ingestion and unseen-test extraction.

Instances follow the public benchmark export schema (``instance_id``,
``problem_statement``, ``hints_text``, ``patch``, ``test_patch``), one JSON
record per line. Candidate patches, ground-truth labels and pre-commit
source trees arrive in sidecar files keyed by instance_id.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import context as contextmod
from . import diff as diffmod
from .diff import Patch, SourceTree
from .errors import PatchCriticError

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
SUCCESS = "success"
FAILURE = "failure"

COMPLEXITY_CHARS = "chars"
COMPLEXITY_LINES = "lines"


class DatasetError(PatchCriticError):
    """Dataset file cannot be read or violates the schema."""


class MalformedRecordError(DatasetError):
    def __init__(self, index: int, detail: str):
        super().__init__(f"record {index}: {detail}")
        self.index = index


class DuplicateInstanceError(DatasetError):
    def __init__(self, instance_id: str, first_index: int, second_index: int):
        super().__init__(
            f"duplicate instance_id {instance_id!r} at records "
            f"{first_index} and {second_index}"
        )
        self.instance_id = instance_id
        self.indices = (first_index, second_index)


@dataclass(frozen=True)
class GroundTruth:
    """Actual per-test outcomes and build status for one candidate patch."""

    test_outcomes: Mapping[str, str]  # test_id -> PASS | FAIL
    build_status: str  # SUCCESS | FAILURE

    def validate(self) -> None:
        for test_id, outcome in self.test_outcomes.items():
            if outcome not in (PASS, FAIL):
                raise DatasetError(f"bad outcome {outcome!r} for test {test_id!r}")
        if self.build_status not in (SUCCESS, FAILURE):
            raise DatasetError(f"bad build_status {self.build_status!r}")
        if self.test_outcomes:
            expected = (
                SUCCESS
                if all(v == PASS for v in self.test_outcomes.values())
                else FAILURE
            )
            if self.build_status != expected:
                raise DatasetError(
                    "build_status does not equal the conjunction of test outcomes"
                )


@dataclass(frozen=True)
class TestCase:
    """One unseen test taken from the gold test patch."""

    __test__ = False  # not a pytest class

    test_id: str  # "<file path>::<qualified name>"
    file_path: str
    body: str
    complexity: float

    def __post_init__(self):
        if not self.body:
            raise DatasetError(f"test {self.test_id!r} has an empty body")


@dataclass(frozen=True)
class TaskInstance:
    """One benchmark problem with its gold patches and candidate patches."""

    instance_id: str
    repo_id: str
    base_commit: str
    problem_statement: str
    hints: str | None
    gold_change_patch: Patch
    gold_test_patch: Patch
    candidates: Mapping[str, Patch] = field(default_factory=dict)
    labels: Mapping[str, GroundTruth] = field(default_factory=dict)


_REQUIRED_FIELDS = (
    "instance_id",
    "repo",
    "base_commit",
    "problem_statement",
    "patch",
    "test_patch",
)


def _load_jsonl_records(path: Path) -> list[dict]:
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    records = []
    for index, line in enumerate(raw.splitlines()):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(index, f"invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise MalformedRecordError(index, "record is not an object")
        records.append(record)
    return records


def _instances_from_jsonl(path: Path) -> list[TaskInstance]:
    instances: list[TaskInstance] = []
    seen: dict[str, int] = {}
    for index, record in enumerate(_load_jsonl_records(path)):
        for name in _REQUIRED_FIELDS:
            if name not in record:
                raise MalformedRecordError(index, f"missing field {name!r}")
        instance_id = record["instance_id"]
        if not instance_id:
            raise MalformedRecordError(index, "empty instance_id")
        if instance_id in seen:
            raise DuplicateInstanceError(instance_id, seen[instance_id], index)
        seen[instance_id] = index
        try:
            change_patch = diffmod.parse_patch(record["patch"])
            test_patch = diffmod.parse_patch(record["test_patch"])
        except diffmod.PatchError as exc:
            raise MalformedRecordError(index, f"bad patch: {exc}") from exc
        hints = record.get("hints_text") or None
        instances.append(
            TaskInstance(
                instance_id=instance_id,
                repo_id=record["repo"],
                base_commit=record["base_commit"],
                problem_statement=record["problem_statement"],
                hints=hints,
                gold_change_patch=change_patch,
                gold_test_patch=test_patch,
            )
        )
    return instances


_FORMATS: dict[str, Callable[[Path], list[TaskInstance]]] = {
    "jsonl": _instances_from_jsonl,
}


def register_format(name: str, loader: Callable[[Path], list[TaskInstance]]) -> None:
    _FORMATS[name] = loader


def load_instances(path: str | Path, format: str = "jsonl") -> list[TaskInstance]:
    """Load task instances from ``path`` in file order, validating invariants."""
    if format not in _FORMATS:
        raise DatasetError(
            f"unknown dataset format {format!r}; registered: {sorted(_FORMATS)}"
        )
    return _FORMATS[format](Path(path))


def load_candidates(path: str | Path) -> dict[str, dict[str, Patch]]:
    """Sidecar of candidate patches: records {instance_id, workflow, patch}."""
    out: dict[str, dict[str, Patch]] = {}
    for index, record in enumerate(_load_jsonl_records(Path(path))):
        for name in ("instance_id", "workflow", "patch"):
            if name not in record:
                raise MalformedRecordError(index, f"missing field {name!r}")
        try:
            patch = diffmod.parse_patch(record["patch"])
        except diffmod.PatchError as exc:
            raise MalformedRecordError(index, f"bad candidate patch: {exc}") from exc
        out.setdefault(record["instance_id"], {})[record["workflow"]] = patch
    return out


def load_labels(path: str | Path) -> dict[str, dict[str, GroundTruth]]:
    """Sidecar of ground truth: records {instance_id, workflow, tests, build_status}."""
    out: dict[str, dict[str, GroundTruth]] = {}
    for index, record in enumerate(_load_jsonl_records(Path(path))):
        for name in ("instance_id", "workflow", "tests", "build_status"):
            if name not in record:
                raise MalformedRecordError(index, f"missing field {name!r}")
        truth = GroundTruth(
            test_outcomes=dict(record["tests"]), build_status=record["build_status"]
        )
        try:
            truth.validate()
        except DatasetError as exc:
            raise MalformedRecordError(index, str(exc)) from exc
        out.setdefault(record["instance_id"], {})[record["workflow"]] = truth
    return out


def load_trees(path: str | Path) -> dict[str, SourceTree]:
    """Sidecar of pre-commit file contents: records {instance_id, files}."""
    out: dict[str, SourceTree] = {}
    for index, record in enumerate(_load_jsonl_records(Path(path))):
        for name in ("instance_id", "files"):
            if name not in record:
                raise MalformedRecordError(index, f"missing field {name!r}")
        out[record["instance_id"]] = SourceTree.from_files(record["files"])
    return out


def attach_sidecars(
    instances: list[TaskInstance],
    candidates: Mapping[str, Mapping[str, Patch]] | None = None,
    labels: Mapping[str, Mapping[str, GroundTruth]] | None = None,
) -> list[TaskInstance]:
    out = []
    for inst in instances:
        out.append(
            replace(
                inst,
                candidates=dict((candidates or {}).get(inst.instance_id, {})),
                labels=dict((labels or {}).get(inst.instance_id, {})),
            )
        )
    return out


def is_test_name(qualified_name: str) -> bool:
    """The benchmark's collection convention, applied to a dotted name."""
    parts = qualified_name.split(".")
    if len(parts) == 1:
        return parts[0].startswith("test")
    return parts[0].startswith("Test") or parts[-1].startswith("test")


def extract_unseen_tests(
    gold_test_patch: Patch,
    pre_commit_tree: SourceTree,
    complexity_unit: str = COMPLEXITY_CHARS,
) -> list[TestCase]:
    """Every test function/method the gold test patch adds or modifies.

    Bodies are the full post-change function text; order is deterministic
    (file path, then source position).
    """
    post_tree = diffmod.apply_patch(pre_commit_tree, gold_test_patch)
    tests: list[TestCase] = []
    for fd in sorted(gold_test_patch.file_diffs, key=lambda f: f.path):
        if fd.is_deletion:
            continue
        post_text = post_tree[fd.path]
        post_lines = post_text.split("\n")
        post_spans = contextmod.find_function_spans(post_text, fd.path)
        pre_text = "" if fd.is_creation else pre_commit_tree[fd.old_path]
        pre_spans = (
            contextmod.find_function_spans(pre_text, fd.old_path) if pre_text else []
        )
        post_by_name: dict[str, contextmod.FunctionSpan] = {}
        for span in post_spans:
            post_by_name.setdefault(span.qualified_name, span)

        adds, dels = contextmod._changed_positions(fd)
        touched: set[contextmod.FunctionSpan] = set()
        for new_ln in adds:
            for span in post_spans:
                if span.contains(new_ln):
                    touched.add(span)
        for old_ln, _seam in dels:
            for pre_span in pre_spans:
                if pre_span.contains(old_ln):
                    post_span = post_by_name.get(pre_span.qualified_name)
                    if post_span is not None:
                        touched.add(post_span)

        for span in sorted(touched, key=lambda s: s.start_line):
            if not is_test_name(span.qualified_name):
                continue
            body = "\n".join(post_lines[span.start_line - 1 : span.end_line])
            tests.append(
                TestCase(
                    test_id=f"{fd.path}::{span.qualified_name}",
                    file_path=fd.path,
                    body=body,
                    complexity=_measure(body, complexity_unit),
                )
            )
    return tests


def _measure(body: str, unit: str) -> float:
    if unit == COMPLEXITY_CHARS:
        return float(len(body))
    if unit == COMPLEXITY_LINES:
        return float(len(body.splitlines()))
    raise DatasetError(f"unknown complexity unit {unit!r}")


def measure_complexity(test: TestCase, unit: str = COMPLEXITY_CHARS) -> float:
    """Size of a test body, in characters (default) or lines."""
    return _measure(test.body, unit)
