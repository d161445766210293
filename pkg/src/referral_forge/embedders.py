"""Dense embedding providers behind a pluggable contract.

A provider declares its name, dimension, and whether it can return
per-token embeddings (required for gradient-based attribution; providers
without it fall back to occlusion). The hashing embedder is the
deterministic local reference: it hashes stemmed tokens into signed
buckets, mean-pools, and L2-normalizes, so all retrieval and attribution
tests run with stable geometry and no network.
"""

import hashlib
import threading
import time
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import httpx
import numpy as np

from .encoders import stem
from .text import tokenize


class ProviderUnavailable(Exception):
    """Transport-level failure; safe to retry."""

    retryable = True


class DimensionMismatch(Exception):
    """Provider returned vectors of a different dimension; fatal."""

    retryable = False


@dataclass(frozen=True)
class DenseEmbedding:
    values: np.ndarray
    unit_norm: bool

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding contains non-finite values")


@runtime_checkable
class EmbeddingProvider(Protocol):
    name: str
    dimension: int

    def embed(self, text: str) -> DenseEmbedding: ...

    def has_token_embeddings(self) -> bool: ...

    def token_embeddings(self, text: str) -> np.ndarray:
        """(T, D) matrix whose row t corresponds to tokenize(text)[t] and
        whose mean equals embed(text).values."""
        ...


class HashingEmbedder:
    """Deterministic test embedder.

    Each stemmed token hashes to one signed bucket; token vectors are
    mean-pooled and the pooled vector is L2-normalized. Token embeddings
    are scaled so their mean equals the sentence embedding exactly.
    """

    def __init__(self, dimension: int = 256, version: str = "v1"):
        self.dimension = dimension
        self.name = f"hash-{version}-d{dimension}"

    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(
            stem(token.lower()).encode("utf-8"), digest_size=8
        ).digest()
        value = int.from_bytes(digest, "little")
        bucket = value % self.dimension
        sign = 1.0 if (value >> 63) & 1 else -1.0
        vec = np.zeros(self.dimension)
        vec[bucket] = sign
        return vec

    def _pooled(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        tokens = tokenize(text)
        if not tokens:
            return np.zeros((0, self.dimension)), np.zeros(self.dimension)
        raw = np.stack([self._token_vector(t) for t in tokens])
        return raw, raw.mean(axis=0)

    def embed(self, text: str) -> DenseEmbedding:
        _, pooled = self._pooled(text)
        norm = np.linalg.norm(pooled)
        if norm == 0.0:
            return DenseEmbedding(values=pooled, unit_norm=False)
        return DenseEmbedding(values=pooled / norm, unit_norm=True)

    def has_token_embeddings(self) -> bool:
        return True

    def token_embeddings(self, text: str) -> np.ndarray:
        raw, pooled = self._pooled(text)
        norm = np.linalg.norm(pooled)
        if raw.shape[0] == 0 or norm == 0.0:
            return raw
        return raw / norm


class HttpEmbeddingClient:
    """Remote provider speaking the embedding HTTP contract:

    POST {base}/embed        {"texts": [...]} -> {"dim": D, "vectors": [[...], ...]}
    POST {base}/embed_tokens {"texts": [...]} -> {"dim": D, "token_vectors": [[[...], ...], ...]}

    In-flight requests are bounded by a semaphore; transport errors are
    retried with exponential backoff before raising ProviderUnavailable.
    """

    def __init__(
        self,
        base_url: str,
        dimension: int,
        name: str = "http-embedder",
        token_capability: bool = False,
        max_in_flight: int = 4,
        retries: int = 3,
        backoff: float = 0.25,
        transport: httpx.BaseTransport | None = None,
        sleeper=time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.dimension = dimension
        self.name = name
        self._token_capability = token_capability
        self._semaphore = threading.Semaphore(max_in_flight)
        self._retries = retries
        self._backoff = backoff
        self._sleep = sleeper
        self._client = httpx.Client(transport=transport, timeout=30.0)

    def _post(self, path: str, payload: dict) -> dict:
        last_error = None
        for attempt in range(self._retries):
            try:
                with self._semaphore:
                    resp = self._client.post(self.base_url + path, json=payload)
                resp.raise_for_status()
                return resp.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
                if attempt < self._retries - 1:
                    self._sleep(self._backoff * (2**attempt))
        raise ProviderUnavailable(f"{path} failed after {self._retries} attempts: {last_error}")

    def embed(self, text: str) -> DenseEmbedding:
        data = self._post("/embed", {"texts": [text]})
        if int(data["dim"]) != self.dimension:
            raise DimensionMismatch(
                f"provider returned dim {data['dim']}, configured {self.dimension}"
            )
        values = np.asarray(data["vectors"][0], dtype=float)
        if values.shape != (self.dimension,):
            raise DimensionMismatch(f"vector length {values.shape} != {self.dimension}")
        norm = np.linalg.norm(values)
        return DenseEmbedding(values=values, unit_norm=bool(abs(norm - 1.0) < 1e-6))

    def has_token_embeddings(self) -> bool:
        return self._token_capability

    def token_embeddings(self, text: str) -> np.ndarray:
        if not self._token_capability:
            raise NotImplementedError(f"{self.name} has no token capability")
        data = self._post("/embed_tokens", {"texts": [text]})
        if int(data["dim"]) != self.dimension:
            raise DimensionMismatch(
                f"provider returned dim {data['dim']}, configured {self.dimension}"
            )
        return np.asarray(data["token_vectors"][0], dtype=float)
