"""Build the bundled end-to-end replay fixture.

Ten synthetic instances (two workflows, two unseen tests each) with
pre-commit trees, candidate patches, ground-truth labels, recorded critic
responses for the isolated_test_patch variant, and recorded embeddings for
the edit-distance ranking baseline. Responses are keyed by the real
request digests, so `evaluate --offline` replays without any provider.

Run from the repository root:  python3 tests/fixtures/gen_e2e.py
The fixture files under tests/fixtures/e2e/ are committed; regenerate them
whenever prompt texts, subject preparation, or the digest scheme change.
"""

from __future__ import annotations

import difflib
import json
import math
import shutil
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent.parent
sys.path.insert(0, str(ROOT / "src"))

from patch_critic import critic, dataset, pipeline, prompts  # noqa: E402
from patch_critic.baselines import text_digest  # noqa: E402
from patch_critic.cache import ReplayCache, cache_key, canonical_request  # noqa: E402
from patch_critic.config import RunConfig  # noqa: E402
from patch_critic.diff import parse_patch  # noqa: E402

OUT = HERE / "e2e"
MODEL_ID = "critic-model-1"
VARIANT = prompts.ISOLATED_TEST_PATCH

WORKFLOWS = ("alpha", "beta")

# Per (workflow, instance, test-kind) planned verdicts: (yes/no, confidence).
# Test kinds: "total" = the long test, "edge" = the short-ish one.
PLAN = {
    "alpha": {
        1: {"total": ("yes", 90), "edge": ("yes", 90)},
        2: {"total": ("yes", 90), "edge": ("yes", 90)},
        3: {"total": ("yes", 90), "edge": ("yes", 90)},
        4: {"total": ("yes", 90), "edge": ("yes", 60)},  # short test: not forced
        5: {"total": ("yes", 90), "edge": ("no", 70)},
        6: {"total": ("yes", 90), "edge": ("yes", 90)},
        7: {"total": ("yes", 80), "edge": ("yes", 90)},
        8: {"total": ("yes", 80), "edge": ("no", 90)},
        9: {"total": ("yes", 90), "edge": ("no", 90)},
        10: {"total": ("yes", 60), "edge": ("no", 90)},  # long test: forced to fail
    },
    "beta": {
        1: {"total": ("yes", 90), "edge": ("yes", 90)},
        2: {"total": ("no", 75), "edge": ("yes", 90)},
        3: {"total": ("yes", 90), "edge": ("yes", 90)},
        4: {"total": ("no", 90), "edge": ("yes", 90)},
        5: {"total": ("no", 90), "edge": ("no", 90)},
        6: {"total": ("yes", 90), "edge": ("no", 90)},
        7: {"total": ("no", 90), "edge": ("no", 90)},
        8: {"total": ("no", 90), "edge": ("no", 70)},
        9: {"total": ("yes", 85), "edge": ("no", 90)},
        10: {"total": ("yes", 90), "edge": ("no", 90)},
    },
}

# True per-test outcomes: (total, edge); build status is their conjunction.
TRUTH = {
    "alpha": {
        1: ("pass", "pass"),
        2: ("pass", "pass"),
        3: ("pass", "pass"),
        4: ("pass", "pass"),
        5: ("pass", "pass"),
        6: ("pass", "pass"),
        7: ("fail", "pass"),
        8: ("fail", "fail"),
        9: ("pass", "fail"),
        10: ("fail", "pass"),
    },
    "beta": {
        1: ("pass", "pass"),
        2: ("pass", "pass"),
        3: ("pass", "pass"),
        4: ("fail", "pass"),
        5: ("fail", "fail"),
        6: ("pass", "fail"),
        7: ("fail", "fail"),
        8: ("fail", "pass"),
        9: ("fail", "fail"),
        10: ("pass", "fail"),
    },
}

# Candidate-vs-gold cosine similarities for the recorded embeddings.
SIMILARITY = {
    "alpha": {1: 0.9, 2: 0.9, 3: 0.9, 4: 0.9, 5: 0.4, 6: 0.9, 7: 0.35, 8: 0.2, 9: 0.9, 10: 0.3},
    "beta": {1: 0.5, 2: 0.5, 3: 0.5, 4: 0.5, 5: 0.7, 6: 0.5, 7: 0.65, 8: 0.8, 9: 0.5, 10: 0.6},
}


def source_module(i: int) -> str:
    return (
        f"BASE = {i}\n"
        "\n"
        "\n"
        "def scale(value):\n"
        "    return value * BASE\n"
        "\n"
        "\n"
        "def total(items):\n"
        "    result = 0\n"
        "    for item in items:\n"
        "        result += scale(item)\n"
        "    return result\n"
    )


def test_module(i: int) -> str:
    return (
        f"from src.widget_{i} import scale, total\n"
        "\n"
        "\n"
        "def test_scale():\n"
        f"    assert scale(2) == 2 * {i}\n"
    )


def edge_test(i: int) -> str:
    if i == 4:  # kept under 50 characters on purpose
        return "def test_edge():\n    assert total([]) == 0\n"
    return (
        "def test_edge_empty():\n"
        "    assert total([]) == 0\n"
        "    assert scale(0) == 0\n"
    )


def total_test() -> str:
    return (
        "def test_total_scaled():\n"
        "    items = [1, 2, 3]\n"
        "    assert total(items) == scale(1) + scale(2) + scale(3)\n"
    )


def unified(path: str, old: str, new: str) -> str:
    return "".join(
        difflib.unified_diff(
            old.splitlines(keepends=True),
            new.splitlines(keepends=True),
            fromfile=f"a/{path}",
            tofile=f"b/{path}",
        )
    )


def build_instance(i: int) -> dict:
    iid = f"fix-widget-{i:03d}"
    src_path = f"src/widget_{i}.py"
    test_path = f"tests/test_widget_{i}.py"
    src = source_module(i)
    tests = test_module(i)

    gold_src = src.replace(
        "    return value * BASE", "    return value * BASE + 1"
    )
    gold_tests = tests + "\n\n" + total_test() + "\n\n" + edge_test(i)

    candidates = {
        "alpha": unified(
            src_path,
            src,
            src.replace(
                "    return value * BASE",
                "    return value * BASE + 1  # alpha offset",
            ),
        ),
        "beta": unified(
            src_path,
            src,
            src.replace(
                "    return value * BASE",
                "    return (value * BASE) + 1  # beta offset",
            ),
        ),
    }
    return {
        "instance_id": iid,
        "index": i,
        "record": {
            "instance_id": iid,
            "repo": "example/widgets",
            "base_commit": f"c0ffee{i:02d}",
            "problem_statement": (
                f"scale() in widget {i} must add the fixed offset after scaling; "
                "totals come out one short per item."
            ),
            "hints_text": f"look at the return value of scale() in widget {i}",
            "patch": unified(src_path, src, gold_src),
            "test_patch": unified(test_path, tests, gold_tests),
        },
        "files": {src_path: src, test_path: tests},
        "candidates": candidates,
    }


def response_text(kind: str, word: str, confidence: int, iid: str) -> str:
    verdict = "passes" if word == "yes" else "fails"
    return (
        f"<analysis>\nThe patch shifts every scaled value by the offset, so the "
        f"{kind} test for {iid} {verdict} under the changed arithmetic.\n</analysis>\n"
        f"<prediction>{word}</prediction>\n"
        f"<confidence>{confidence}</confidence>"
    )


def main() -> None:
    if OUT.exists():
        shutil.rmtree(OUT)
    OUT.mkdir(parents=True)

    built = [build_instance(i) for i in range(1, 11)]

    with (OUT / "dataset.jsonl").open("w") as fh:
        for item in built:
            fh.write(json.dumps(item["record"], sort_keys=True) + "\n")
    with (OUT / "trees.jsonl").open("w") as fh:
        for item in built:
            fh.write(
                json.dumps(
                    {"instance_id": item["instance_id"], "files": item["files"]},
                    sort_keys=True,
                )
                + "\n"
            )
    with (OUT / "candidates.jsonl").open("w") as fh:
        for item in built:
            for workflow in WORKFLOWS:
                fh.write(
                    json.dumps(
                        {
                            "instance_id": item["instance_id"],
                            "workflow": workflow,
                            "patch": item["candidates"][workflow],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    with (OUT / "labels.jsonl").open("w") as fh:
        for item in built:
            i = item["index"]
            test_path = f"tests/test_widget_{i}.py"
            edge_name = "test_edge" if i == 4 else "test_edge_empty"
            for workflow in WORKFLOWS:
                total_outcome, edge_outcome = TRUTH[workflow][i]
                tests_map = {
                    f"{test_path}::test_total_scaled": total_outcome,
                    f"{test_path}::{edge_name}": edge_outcome,
                }
                status = (
                    "success"
                    if all(v == "pass" for v in tests_map.values())
                    else "failure"
                )
                fh.write(
                    json.dumps(
                        {
                            "instance_id": item["instance_id"],
                            "workflow": workflow,
                            "tests": tests_map,
                            "build_status": status,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    # Record critic responses under the genuine request digests.
    cfg = RunConfig(
        dataset=str(OUT / "dataset.jsonl"),
        candidates=str(OUT / "candidates.jsonl"),
        labels=str(OUT / "labels.jsonl"),
        trees=str(OUT / "trees.jsonl"),
        cache_dir=str(OUT / "cache"),
        model_id=MODEL_ID,
    )
    bundle = pipeline.Bundle(cfg)
    cache = ReplayCache(OUT / "cache")
    recorded = 0
    for item in built:
        i = item["index"]
        instance = next(
            inst for inst in bundle.instances if inst.instance_id == item["instance_id"]
        )
        for workflow in WORKFLOWS:
            subject = pipeline.prepare_subject(bundle, VARIANT, instance, workflow)
            for test in subject.tests:
                kind = "total" if "total_scaled" in test.test_id else "edge"
                word, confidence = PLAN[workflow][i][kind]
                prompt = critic.build_prompt(
                    VARIANT, critic.prompt_inputs(VARIANT, subject, test)
                )
                request = critic.CriticRequest(MODEL_ID, prompt)
                digest = cache_key(request)
                cache.store(
                    digest,
                    response_text(kind, word, confidence, instance.instance_id),
                    canonical_request(request),
                )
                recorded += 1

    # Recorded embeddings: gold patch at (1, 0); candidates at angle acos(s).
    with (OUT / "embeddings.jsonl").open("w") as fh:
        seen = set()
        for item in built:
            i = item["index"]
            instance = next(
                inst
                for inst in bundle.instances
                if inst.instance_id == item["instance_id"]
            )
            gold_text = instance.gold_change_patch.to_text()
            gold_digest = text_digest(gold_text)
            if gold_digest not in seen:
                seen.add(gold_digest)
                fh.write(
                    json.dumps({"digest": gold_digest, "vector": [1.0, 0.0]}) + "\n"
                )
            for workflow in WORKFLOWS:
                s = SIMILARITY[workflow][i]
                vector = [s, round(math.sqrt(1 - s * s), 12)]
                cand_digest = text_digest(instance.candidates[workflow].to_text())
                if cand_digest in seen:
                    raise SystemExit(f"duplicate candidate text for {workflow}/{i}")
                seen.add(cand_digest)
                fh.write(
                    json.dumps({"digest": cand_digest, "vector": vector}) + "\n"
                )

    print(f"wrote fixture for {len(built)} instances, {recorded} recorded responses")
    # Sanity: complexity boundaries used by the plan.
    for item in built:
        i = item["index"]
        tree = dataset.load_trees(OUT / "trees.jsonl")[item["instance_id"]]
        tests = dataset.extract_unseen_tests(
            parse_patch(item["record"]["test_patch"]), tree
        )
        by_kind = {
            ("total" if "total_scaled" in t.test_id else "edge"): t.complexity
            for t in tests
        }
        assert by_kind["total"] > 50, (i, by_kind)
        if i == 4:
            assert by_kind["edge"] <= 50, (i, by_kind)
        else:
            assert by_kind["edge"] > 50, (i, by_kind)
    print("complexity boundaries verified")


if __name__ == "__main__":
    main()
