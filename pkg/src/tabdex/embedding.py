"""Deterministic text embedders used for clustering and routing.

The reference embedder hashes a bag of lowercased tokens into a fixed
number of buckets and L2-normalizes the counts. It is cheap, seedable, and
stable across processes, which is what the index needs; anything smarter
can be swapped in as long as it maps text to a fixed-dimension vector.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .tables import Table, serialize_view1, serialize_view2

TOKEN_RE = re.compile(r"\w+")


@dataclass(frozen=True)
class EmbedderConfig:
    dim: int = 64
    max_tokens: int = 512
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class TwoViewEmbedding:
    """Header-view and body-view vectors for one table."""

    h1: np.ndarray
    h2: np.ndarray


@runtime_checkable
class Embedder(Protocol):
    config: EmbedderConfig

    def embed(self, text: str) -> np.ndarray: ...


def tokenize(text: str, max_tokens: int) -> list[str]:
    return TOKEN_RE.findall(text.lower())[:max_tokens]


class HashedBagEmbedder:
    """Bag of hashed tokens, L2-normalized. Empty text maps to the zero vector."""

    def __init__(self, config: EmbedderConfig = EmbedderConfig()):
        self.config = config
        self._key = (config.seed % 2**64).to_bytes(8, "little")

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "little") % self.config.dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.config.dim, dtype=np.float64)
        for token in tokenize(text, self.config.max_tokens):
            vec[self._bucket(token)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


class RandomProjectionEmbedder:
    """Hashed token counts pushed through a fixed seeded Gaussian projection.

    Exists mainly to prove the rest of the pipeline does not depend on any
    particular embedder: same interface, same norm contract, different
    geometry.
    """

    def __init__(self, config: EmbedderConfig = EmbedderConfig(), intermediate_dim: int = 2048):
        self.config = config
        self._inner = HashedBagEmbedder(
            EmbedderConfig(dim=intermediate_dim, max_tokens=config.max_tokens, seed=config.seed)
        )
        rng = np.random.default_rng(config.seed)
        self._projection = rng.standard_normal((intermediate_dim, config.dim)) / np.sqrt(config.dim)

    def embed(self, text: str) -> np.ndarray:
        counts = self._inner.embed(text)
        vec = counts @ self._projection
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


def dist(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance; mismatched dimensions are an error."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def embed_table(table: Table, embedder: Embedder) -> TwoViewEmbedding:
    """Embed both serialized views of a table."""
    return TwoViewEmbedding(
        h1=embedder.embed(serialize_view1(table)),
        h2=embedder.embed(serialize_view2(table)),
    )


def embed_repository(tables, embedder: Embedder) -> dict[str, TwoViewEmbedding]:
    return {t.id: embed_table(t, embedder) for t in tables}
