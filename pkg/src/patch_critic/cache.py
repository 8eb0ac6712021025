"""Content-addressed record/replay cache for provider calls.

Entries are keyed by a digest of the canonicalized request (sorted fields,
normalized line endings) and are write-once: a digest can never map to two
different responses. Layout: ``<root>/<first-2-hex>/<digest>.resp`` with a
sibling ``.req`` holding the canonical request for audit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import tempfile
from collections.abc import Mapping
from pathlib import Path

from .errors import PatchCriticError


class CacheError(PatchCriticError):
    pass


class CacheIntegrityError(CacheError):
    """An existing entry conflicts with the bytes being stored."""


class CacheMissError(CacheError):
    """Offline mode: the response was not in the cache."""


def _normalize(value):
    if isinstance(value, str):
        return value.replace("\r\n", "\n").replace("\r", "\n")
    if isinstance(value, Mapping):
        return {k: _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    return value


def canonical_request(request) -> str:
    """Canonical serialization: sorted fields, normalized line endings."""
    if dataclasses.is_dataclass(request) and not isinstance(request, type):
        payload = dataclasses.asdict(request)
    elif isinstance(request, Mapping):
        payload = dict(request)
    else:
        raise TypeError(f"cannot canonicalize request of type {type(request)!r}")
    return json.dumps(
        _normalize(payload), sort_keys=True, ensure_ascii=True, separators=(",", ":")
    )


def cache_key(request) -> str:
    """Hex digest of the canonicalized request."""
    return hashlib.sha256(canonical_request(request).encode("utf-8")).hexdigest()


class ReplayCache:
    """Write-once disk cache; safe under concurrent writers."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _paths(self, digest: str) -> tuple[Path, Path]:
        shard = self.root / digest[:2]
        return shard / f"{digest}.resp", shard / f"{digest}.req"

    def lookup(self, digest: str) -> str | None:
        resp_path, _ = self._paths(digest)
        try:
            return resp_path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None

    def store(self, digest: str, response: str, request: str | None = None) -> None:
        resp_path, req_path = self._paths(digest)
        resp_path.parent.mkdir(parents=True, exist_ok=True)
        self._write_once(resp_path, response)
        if request is not None:
            self._write_once(req_path, request)

    @staticmethod
    def _write_once(path: Path, content: str) -> None:
        data = content.encode("utf-8")
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            try:
                os.link(tmp_name, path)  # create-only: fails if path exists
            except FileExistsError:
                if path.read_bytes() != data:
                    raise CacheIntegrityError(
                        f"conflicting bytes for existing cache entry {path.name}"
                    )
        finally:
            os.unlink(tmp_name)

    def verify(self) -> int:
        """Recompute each stored canonical request's digest; return entry count.

        Raises :class:`CacheIntegrityError` on the first mismatch.
        """
        count = 0
        for req_path in self.root.glob("*/*.req"):
            digest = req_path.stem
            canonical = req_path.read_text(encoding="utf-8")
            recomputed = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
            if recomputed != digest:
                raise CacheIntegrityError(
                    f"entry {digest} does not re-derive from its stored request"
                )
            count += 1
        return count


class OfflineProvider:
    """Provider stand-in that turns any cache miss into a hard error."""

    def generate(self, request) -> str:
        raise CacheMissError(
            "offline mode: response not found in cache for this request"
        )

    def embed(self, model_id: str, text: str) -> list[float]:
        raise CacheMissError(
            "offline mode: embedding not found in cache for this request"
        )
