"""Non-critic baselines: class-weighted random oracles and the
embedding-cosine patch-similarity build predictor.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .dataset import FAIL, FAILURE, PASS, SUCCESS
from .diff import Patch
from .errors import PatchCriticError

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(-1.0 + k * 0.01, 2) for k in range(201))


class BaselineError(PatchCriticError):
    pass


class EmbeddingError(BaselineError):
    pass


@dataclass(frozen=True)
class ClassWeights:
    """Probability mass of the pass class for the weighted random oracle."""

    p_pass: float

    def __post_init__(self):
        if not 0.0 <= self.p_pass <= 1.0:
            raise ValueError("p_pass must be within [0, 1]")


@dataclass(frozen=True)
class SimilarityThreshold:
    """A fitted decision threshold: similarity >= value predicts success."""

    value: float
    objective: str
    grid: tuple[float, ...]
    score: float

    def __post_init__(self):
        if self.value not in self.grid:
            raise ValueError("threshold value must be a grid element")


class EmbeddingProvider(Protocol):
    def embed(self, model_id: str, text: str) -> list[float]: ...


def random_oracle(weights: ClassWeights, seed: int, n: int) -> list[str]:
    """``n`` independent pass/fail draws, pass with probability ``p_pass``.

    Deterministic for a fixed (weights, seed, n).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = random.Random(seed)
    return [PASS if rng.random() < weights.p_pass else FAIL for _ in range(n)]


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class RecordedEmbeddings:
    """Embedding source backed by the recorded-embedding fixture format:
    one record per line, ``{"digest": <sha256 of text>, "vector": [...]}``.
    """

    def __init__(self, path):
        self.vectors: dict[str, list[float]] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            self.vectors[record["digest"]] = [float(v) for v in record["vector"]]

    def embed(self, model_id: str, text: str) -> list[float]:
        digest = text_digest(text)
        if digest not in self.vectors:
            raise EmbeddingError(f"no recorded embedding for text digest {digest}")
        return self.vectors[digest]


class CachingEmbedder:
    """Memoizes provider calls by text digest; checks dimensions."""

    def __init__(
        self,
        provider: EmbeddingProvider,
        model_id: str,
        expected_dim: int | None = None,
        max_chars: int | None = None,
    ):
        self.provider = provider
        self.model_id = model_id
        self.expected_dim = expected_dim
        self.max_chars = max_chars
        self._memo: dict[str, list[float]] = {}

    def embed(self, text: str) -> list[float]:
        if not text:
            raise EmbeddingError("cannot embed empty text")
        if self.max_chars is not None and len(text) > self.max_chars:
            logger.warning(
                "text of %d chars truncated to embedding window of %d",
                len(text),
                self.max_chars,
            )
            text = text[: self.max_chars]
        digest = text_digest(text)
        if digest not in self._memo:
            vector = self.provider.embed(self.model_id, text)
            if self.expected_dim is not None and len(vector) != self.expected_dim:
                raise EmbeddingError(
                    f"provider returned dimension {len(vector)}, "
                    f"expected {self.expected_dim}"
                )
            self._memo[digest] = vector
        return self._memo[digest]


def embed(text: str, embedder: CachingEmbedder) -> list[float]:
    """Embed ``text`` through a caching embedder (one provider call per text)."""
    return embedder.embed(text)


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise BaselineError(f"dimension mismatch: {len(a)} vs {len(b)}")
    sq_a = sum(x * x for x in a)
    sq_b = sum(x * x for x in b)
    if sq_a == 0.0 or sq_b == 0.0:
        raise BaselineError("cosine similarity undefined for zero-norm input")
    dot = sum(x * y for x, y in zip(a, b))
    # sqrt(sq_a * sq_b) keeps cos(v, v) exactly 1.0.
    return max(-1.0, min(1.0, dot / math.sqrt(sq_a * sq_b)))


_OBJECTIVES = ("f1", "accuracy", "precision", "recall")


def _objective_value(
    threshold: float,
    similarities: Sequence[float],
    labels: Sequence[str],
    objective: str,
) -> float:
    tp = fp = tn = fn = 0
    for sim, label in zip(similarities, labels):
        predicted_success = sim >= threshold
        actually_success = label == SUCCESS
        if predicted_success and actually_success:
            tp += 1
        elif predicted_success:
            fp += 1
        elif actually_success:
            fn += 1
        else:
            tn += 1
    if objective == "accuracy":
        return (tp + tn) / len(labels)
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if objective == "precision":
        return precision if precision is not None else -1.0
    if objective == "recall":
        return recall if recall is not None else -1.0
    if precision is None or recall is None or precision + recall == 0:
        return -1.0
    return 2 * precision * recall / (precision + recall)


def fit_threshold(
    similarities: Sequence[float],
    labels: Sequence[str],
    grid: Sequence[float] = DEFAULT_GRID,
    objective: str = "f1",
) -> SimilarityThreshold:
    """Grid search for the threshold maximizing ``objective``.

    The decision rule is ``similarity >= threshold -> predict success``.
    Ties resolve to the smallest threshold.
    """
    if objective not in _OBJECTIVES:
        raise BaselineError(f"unknown objective {objective!r}")
    if not similarities or len(similarities) != len(labels):
        raise BaselineError("similarities and labels must be equal-length, non-empty")
    for label in labels:
        if label not in (SUCCESS, FAILURE):
            raise BaselineError(f"bad label {label!r}")
    best_value = None
    best_score = -math.inf
    for candidate in grid:
        score = _objective_value(candidate, similarities, labels, objective)
        if score > best_score:
            best_value, best_score = candidate, score
    return SimilarityThreshold(
        value=best_value, objective=objective, grid=tuple(grid), score=best_score
    )


def validation_split(
    instance_ids: Sequence[str], fraction: float = 0.2
) -> tuple[list[str], list[str]]:
    """Deterministic (validation, rest) split: first N by instance_id order.

    The validation slice is where the similarity threshold gets fitted; the
    fitted value then applies to every instance.
    """
    if not 0 < fraction < 1:
        raise BaselineError("fraction must be in (0, 1)")
    ordered = sorted(instance_ids)
    if not ordered:
        return [], []
    cut = max(1, round(len(ordered) * fraction))
    return ordered[:cut], ordered[cut:]


def edit_distance_predict(
    candidate: Patch,
    gold: Patch,
    embedder: CachingEmbedder,
    threshold: SimilarityThreshold,
) -> str:
    """Embedding-cosine build prediction against the gold change patch."""
    similarity = patch_similarity(candidate, gold, embedder)
    return SUCCESS if similarity >= threshold.value else FAILURE


def patch_similarity(
    candidate: Patch, gold: Patch, embedder: CachingEmbedder
) -> float:
    """Cosine similarity between the rendered unified diffs of two patches."""
    return cosine_similarity(
        embedder.embed(candidate.to_text()), embedder.embed(gold.to_text())
    )
