"""Shared fixtures: paths into the bundled end-to-end replay bundle."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS_DIR))  # for span_corpus

E2E = TESTS_DIR / "fixtures" / "e2e"
E2E_MODEL_ID = "critic-model-1"


@pytest.fixture(scope="session")
def e2e_paths() -> dict[str, str]:
    return {
        "dataset": str(E2E / "dataset.jsonl"),
        "candidates": str(E2E / "candidates.jsonl"),
        "labels": str(E2E / "labels.jsonl"),
        "trees": str(E2E / "trees.jsonl"),
        "embeddings": str(E2E / "embeddings.jsonl"),
        "cache": str(E2E / "cache"),
    }


def cli_args(e2e_paths: dict[str, str], output_dir: str, *extra: str) -> list[str]:
    return [
        "--dataset", e2e_paths["dataset"],
        "--candidates", e2e_paths["candidates"],
        "--labels", e2e_paths["labels"],
        "--trees", e2e_paths["trees"],
        "--cache-dir", e2e_paths["cache"],
        "--output", output_dir,
        "--model", E2E_MODEL_ID,
        "--offline",
        *extra,
    ]
