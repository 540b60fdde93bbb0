"""Chat and embedding backends: remote HTTP client plus deterministic mocks.

Every call is metered; the mocks make the whole engine runnable (and its
tests reproducible) with zero network access.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import httpx
import numpy as np

API_KEY_ENV = "GRAG_API_KEY"


class ProviderError(Exception):
    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class ScriptGapError(ProviderError):
    """Strict mock received a prompt it has no scripted response for."""

    def __init__(self, prompt_hash: str):
        super().__init__(f"no scripted response for prompt md5:{prompt_hash}", retryable=False)
        self.prompt_hash = prompt_hash


def prompt_hash(prompt: str) -> str:
    return hashlib.md5(prompt.encode("utf-8")).hexdigest()


@dataclass
class ProviderUsage:
    """Monotone call counters, shared across the providers of one run."""

    chat_calls: int = 0
    embedding_calls: int = 0
    embedded_texts: int = 0
    latencies: List[float] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record_chat(self, latency: float) -> None:
        with self._lock:
            self.chat_calls += 1
            self.latencies.append(latency)

    def record_embed(self, n_texts: int, latency: float) -> None:
        with self._lock:
            self.embedding_calls += 1
            self.embedded_texts += n_texts
            self.latencies.append(latency)

    def snapshot(self) -> Tuple[int, int, int]:
        with self._lock:
            return (self.chat_calls, self.embedding_calls, self.embedded_texts)


class MockChatProvider:
    """Scripted chat backend.

    Rules map a prompt substring or an "md5:<hex>" prompt hash to a response.
    In strict mode an unscripted prompt raises ScriptGapError naming the
    hash, so test scripting gaps surface immediately.
    """

    kind = "mock"

    def __init__(self, rules: Optional[Sequence[Tuple[str, str]]] = None,
                 default_response: Optional[str] = None,
                 usage: Optional[ProviderUsage] = None):
        self.rules = list(rules or [])
        self.default_response = default_response
        self.usage = usage or ProviderUsage()

    def chat(self, prompt: str, model: str = "mock-chat") -> str:
        if not prompt:
            raise ValueError("prompt must be nonempty")
        start = time.perf_counter()
        try:
            digest = prompt_hash(prompt)
            for matcher, response in self.rules:
                if matcher.startswith("md5:"):
                    if matcher[4:] == digest:
                        return response
                elif matcher in prompt:
                    return response
            if self.default_response is not None:
                return self.default_response
            raise ScriptGapError(digest)
        finally:
            self.usage.record_chat(time.perf_counter() - start)


class MockEmbeddingProvider:
    """Hash-expanded pseudo-random unit vectors.

    Equal texts embed equally across processes; distinct texts land in
    near-orthogonal directions, which gives similarity tests real structure.
    Explicit `overrides` pin chosen texts to chosen vectors.
    """

    kind = "mock"

    def __init__(self, dim: int = 16,
                 overrides: Optional[Dict[str, Sequence[float]]] = None,
                 usage: Optional[ProviderUsage] = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.overrides = dict(overrides or {})
        self.usage = usage or ProviderUsage()

    def _vector(self, text: str) -> List[float]:
        if text in self.overrides:
            v = np.asarray(self.overrides[text], dtype=np.float64)
        else:
            seed = int.from_bytes(hashlib.md5(text.encode("utf-8")).digest()[:8], "big")
            rng = np.random.default_rng(seed)
            v = rng.standard_normal(self.dim)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ProviderError(f"zero-norm embedding for text {text!r}")
        return [float(x) for x in v / norm]

    def embed(self, texts: Sequence[str], model: str = "mock-embed") -> List[List[float]]:
        if not texts:
            raise ValueError("texts must be nonempty")
        if any(not t for t in texts):
            raise ValueError("texts may not contain empty members")
        start = time.perf_counter()
        try:
            return [self._vector(t) for t in texts]
        finally:
            self.usage.record_embed(len(texts), time.perf_counter() - start)


def _retrying_post(client: httpx.Client, url: str, payload: dict,
                   max_retries: int, backoff: float) -> httpx.Response:
    attempt = 0
    while True:
        try:
            resp = client.post(url, json=payload)
        except httpx.HTTPError as exc:
            if attempt >= max_retries - 1:
                raise ProviderError(f"transport failure: {exc}", retryable=True) from exc
            time.sleep(backoff * (2 ** attempt))
            attempt += 1
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            if attempt >= max_retries - 1:
                raise ProviderError(
                    f"backend error {resp.status_code} after {max_retries} attempts",
                    retryable=True,
                )
            time.sleep(backoff * (2 ** attempt))
            attempt += 1
            continue
        if resp.status_code in (401, 403):
            raise ProviderError("authentication failed", retryable=False)
        if resp.status_code >= 400:
            raise ProviderError(f"backend error {resp.status_code}: {resp.text}", retryable=False)
        return resp


class RemoteChatProvider:
    """OpenAI-compatible chat-completions client."""

    kind = "remote"

    def __init__(self, base_url: str, model: str, timeout: float = 60.0,
                 max_retries: int = 3, backoff: float = 0.5,
                 usage: Optional[ProviderUsage] = None,
                 transport: Optional[httpx.BaseTransport] = None):
        api_key = os.environ.get(API_KEY_ENV, "")
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self.usage = usage or ProviderUsage()
        self._client = httpx.Client(
            base_url=base_url, timeout=timeout, transport=transport,
            headers={"Authorization": f"Bearer {api_key}"} if api_key else {},
        )

    def chat(self, prompt: str, model: Optional[str] = None) -> str:
        if not prompt:
            raise ValueError("prompt must be nonempty")
        start = time.perf_counter()
        try:
            resp = _retrying_post(
                self._client, "/chat/completions",
                {"model": model or self.model,
                 "messages": [{"role": "user", "content": prompt}]},
                self.max_retries, self.backoff,
            )
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise ProviderError(f"malformed chat response: {exc}", retryable=False) from exc
        finally:
            self.usage.record_chat(time.perf_counter() - start)


class RemoteEmbeddingProvider:
    """OpenAI-compatible embeddings client; one batch per call."""

    kind = "remote"

    def __init__(self, base_url: str, model: str, timeout: float = 60.0,
                 max_retries: int = 3, backoff: float = 0.5,
                 usage: Optional[ProviderUsage] = None,
                 transport: Optional[httpx.BaseTransport] = None):
        api_key = os.environ.get(API_KEY_ENV, "")
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self.usage = usage or ProviderUsage()
        self._client = httpx.Client(
            base_url=base_url, timeout=timeout, transport=transport,
            headers={"Authorization": f"Bearer {api_key}"} if api_key else {},
        )

    def embed(self, texts: Sequence[str], model: Optional[str] = None) -> List[List[float]]:
        if not texts:
            raise ValueError("texts must be nonempty")
        if any(not t for t in texts):
            raise ValueError("texts may not contain empty members")
        start = time.perf_counter()
        try:
            resp = _retrying_post(
                self._client, "/embeddings",
                {"model": model or self.model, "input": list(texts)},
                self.max_retries, self.backoff,
            )
            try:
                data = sorted(resp.json()["data"], key=lambda d: d["index"])
                return [d["embedding"] for d in data]
            except (KeyError, TypeError, ValueError) as exc:
                raise ProviderError(f"malformed embedding response: {exc}", retryable=False) from exc
        finally:
            self.usage.record_embed(len(texts), time.perf_counter() - start)
