"""HTTP clients for the generation and embedding provider wire contracts.

Generation: POST {model_id, prompt, temperature, max_tokens} -> {"text": ...}
Embedding:  POST {model_id, text} -> {"vector": [...]}

Endpoints and credentials come from the environment
(``PATCH_CRITIC_LLM_ENDPOINT``/``PATCH_CRITIC_LLM_KEY`` and
``PATCH_CRITIC_EMBED_ENDPOINT``/``PATCH_CRITIC_EMBED_KEY``) unless passed
explicitly. Calls retry a bounded number of times with backoff.
"""

from __future__ import annotations

import logging
import os
import time

import requests

from .critic import CriticRequest, ProviderError

logger = logging.getLogger(__name__)

LLM_ENDPOINT_VAR = "PATCH_CRITIC_LLM_ENDPOINT"
LLM_KEY_VAR = "PATCH_CRITIC_LLM_KEY"
EMBED_ENDPOINT_VAR = "PATCH_CRITIC_EMBED_ENDPOINT"
EMBED_KEY_VAR = "PATCH_CRITIC_EMBED_KEY"

DEFAULT_TIMEOUT = 120.0
DEFAULT_RETRIES = 3


class _HttpClient:
    def __init__(
        self,
        endpoint: str | None,
        api_key: str | None,
        endpoint_var: str,
        key_var: str,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint or os.environ.get(endpoint_var)
        if not self.endpoint:
            raise ProviderError(
                f"no provider endpoint configured (set {endpoint_var})"
            )
        self.api_key = api_key or os.environ.get(key_var)
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()

    def _post(self, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = self.session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                return response.json()
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                wait = 0.5 * (2**attempt)
                logger.warning(
                    "provider call failed (attempt %d/%d): %s",
                    attempt + 1,
                    self.retries,
                    exc,
                )
                if attempt + 1 < self.retries:
                    time.sleep(wait)
        raise ProviderError(
            f"provider unreachable after {self.retries} attempts: {last_error}"
        ) from last_error


class GenerationClient(_HttpClient):
    """Text-generation provider speaking the request/response wire contract."""

    def __init__(self, endpoint: str | None = None, api_key: str | None = None, **kw):
        super().__init__(endpoint, api_key, LLM_ENDPOINT_VAR, LLM_KEY_VAR, **kw)

    def generate(self, request: CriticRequest) -> str:
        payload = {
            "model_id": request.model_id,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        body = self._post(payload)
        if "text" not in body:
            raise ProviderError(f"malformed provider response: {sorted(body)}")
        return body["text"]


class EmbeddingClient(_HttpClient):
    """Embedding provider speaking the request/response wire contract."""

    def __init__(self, endpoint: str | None = None, api_key: str | None = None, **kw):
        super().__init__(endpoint, api_key, EMBED_ENDPOINT_VAR, EMBED_KEY_VAR, **kw)

    def embed(self, model_id: str, text: str) -> list[float]:
        body = self._post({"model_id": model_id, "text": text})
        if "vector" not in body or not isinstance(body["vector"], list):
            raise ProviderError(f"malformed embedding response: {sorted(body)}")
        return [float(v) for v in body["vector"]]
