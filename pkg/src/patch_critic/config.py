"""Run configuration: CLI flags plus an optional key=value config file."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .calibration import ThresholdPolicy
from .dataset import COMPLEXITY_CHARS, COMPLEXITY_LINES
from .errors import PatchCriticError

PATCH_CONTEXT_DEFAULT = "default"  # 3 lines of context, as parsed
PATCH_CONTEXT_FUNCTION = "function"  # widened to enclosing functions


class ConfigError(PatchCriticError):
    pass


@dataclass
class RunConfig:
    dataset: str = ""
    candidates: str = ""
    labels: str = ""
    trees: str = ""
    embeddings: str = ""  # recorded-embedding fixture, optional
    output_dir: str = "out"
    cache_dir: str = "cache"
    model_id: str = "claude-3-opus"
    embed_model_id: str = "codebert-base"
    variants: tuple[str, ...] = ()
    patch_context: str = PATCH_CONTEXT_FUNCTION
    confidence_max: float = 65.0
    complexity_min: float = 50.0
    complexity_unit: str = COMPLEXITY_CHARS
    concurrency: int = 4
    seed: int = 0
    offline: bool = False

    def __post_init__(self):
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.patch_context not in (PATCH_CONTEXT_DEFAULT, PATCH_CONTEXT_FUNCTION):
            raise ConfigError(f"bad patch_context {self.patch_context!r}")
        if self.complexity_unit not in (COMPLEXITY_CHARS, COMPLEXITY_LINES):
            raise ConfigError(f"bad complexity_unit {self.complexity_unit!r}")

    @property
    def policy(self) -> ThresholdPolicy:
        return ThresholdPolicy(
            confidence_max=self.confidence_max,
            complexity_min=self.complexity_min,
            complexity_unit=self.complexity_unit,
        )

    def derive_seed(self, purpose: str) -> int:
        """Stable per-purpose seed from the root seed."""
        digest = hashlib.sha256(f"{self.seed}:{purpose}".encode()).digest()
        return int.from_bytes(digest[:8], "big")


_BOOL_FIELDS = {"offline"}
_INT_FIELDS = {"concurrency", "seed"}
_FLOAT_FIELDS = {"confidence_max", "complexity_min"}


def load_config_file(path: str | Path) -> dict[str, object]:
    """Parse a ``key = value`` config file into RunConfig field values."""
    known = {f.name for f in fields(RunConfig)}
    out: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _BOOL_FIELDS:
            out[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in _INT_FIELDS:
            out[key] = int(value)
        elif key in _FLOAT_FIELDS:
            out[key] = float(value)
        elif key == "variants":
            out[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        else:
            out[key] = value
    return out
