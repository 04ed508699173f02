"""Sentence-embedding providers and their concatenation.

The production setup concatenates a 384-dim and a 768-dim sentence encoder
into one 1152-dim vector. Any object with ``name``, ``dim`` and
``embed(text) -> np.ndarray`` plugs in; the hash provider is a deterministic
stand-in used by the tests and by offline runs.
"""

from __future__ import annotations

import json
import struct
import urllib.request
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .preprocess import normalize

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

PAPER_DIMS = (384, 768)


class EmbeddingError(ValueError):
    """Raised on empty input or a provider failure."""


class EmbeddingProvider(Protocol):
    name: str
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def _seed_bytes(seed: int) -> bytes:
    return struct.pack("<q", seed)


def hash_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Signed feature hashing of normalized tokens, L2-normalized.

    Each token is hashed with 64-bit FNV-1a over ``seed`` (8 bytes, signed
    little-endian) followed by the UTF-8 token. The bucket is ``hash % dim``;
    bit 63 chooses the sign.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not text.strip():
        raise EmbeddingError("cannot embed empty text")
    vec = np.zeros(dim, dtype=np.float64)
    prefix = _seed_bytes(seed)
    for token in normalize(text).split():
        h = fnv1a_64(prefix + token.encode("utf-8"))
        vec[h % dim] += -1.0 if h >> 63 else 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class HashProvider:
    dim: int
    seed: int = 0
    name: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            object.__setattr__(self, "name", f"hash-{self.dim}-s{self.seed}")

    def embed(self, text: str) -> np.ndarray:
        return hash_embed(text, self.dim, self.seed)


class ServiceProvider:
    """Client for an HTTP embedding service.

    POST ``{"texts": [...]}`` returns ``{"vectors": [[...], ...], "dim": D}``.
    """

    def __init__(self, url: str, dim: int | None = None, timeout: float = 60.0, name: str = "") -> None:
        self.url = url
        self.timeout = timeout
        self.name = name or f"service:{url}"
        self._dim = dim

    @property
    def dim(self) -> int:
        if self._dim is None:
            self._dim = int(self.embed_many(["dimension probe"]).shape[1])
        return self._dim

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        body = json.dumps({"texts": list(texts)}).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}, method="POST"
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            payload = json.loads(response.read().decode("utf-8"))
        vectors = np.asarray(payload["vectors"], dtype=np.float64)
        dim = int(payload["dim"])
        if vectors.shape != (len(texts), dim):
            raise EmbeddingError(f"{self.name}: expected {len(texts)}x{dim}, got {vectors.shape}")
        if self._dim is not None and dim != self._dim:
            raise EmbeddingError(f"{self.name}: service dim {dim} != configured {self._dim}")
        self._dim = dim
        return vectors

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


class SentenceTransformerProvider:
    """Local sentence-transformers model, loaded lazily on first use."""

    def __init__(self, model_path: str, name: str = "") -> None:
        self.model_path = model_path
        self.name = name or f"local:{model_path}"
        self._model = None

    def _load(self):
        if self._model is None:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(self.model_path, device="cpu")
        return self._model

    @property
    def dim(self) -> int:
        return int(self._load().get_sentence_embedding_dimension())

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        out = self._load().encode(list(texts), convert_to_numpy=True, show_progress_bar=False)
        return np.asarray(out, dtype=np.float64)

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


@dataclass(frozen=True)
class ConcatEmbedder:
    providers: tuple = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "providers", tuple(self.providers))
        if not self.providers:
            raise ValueError("ConcatEmbedder needs at least one provider")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(p.dim for p in self.providers)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    def _run(self, provider, texts: Sequence[str]) -> np.ndarray:
        try:
            if hasattr(provider, "embed_many"):
                block = provider.embed_many(texts)
            else:
                block = np.stack([provider.embed(t) for t in texts])
        except EmbeddingError:
            raise
        except Exception as exc:
            raise EmbeddingError(f"provider {provider.name} failed: {exc}") from exc
        block = np.asarray(block, dtype=np.float64)
        if block.shape != (len(texts), provider.dim):
            raise EmbeddingError(
                f"provider {provider.name} returned shape {block.shape}, expected {(len(texts), provider.dim)}"
            )
        if not np.all(np.isfinite(block)):
            raise EmbeddingError(f"provider {provider.name} returned non-finite values")
        return block


def hash_embedder(dims: Sequence[int] = PAPER_DIMS, seed: int = 0) -> ConcatEmbedder:
    """Hash providers with the given dims; provider i uses ``seed + i``."""
    return ConcatEmbedder(tuple(HashProvider(d, seed + i) for i, d in enumerate(dims)))


def concat_embed(embedder: ConcatEmbedder, text: str) -> np.ndarray:
    if not text.strip():
        raise EmbeddingError("cannot embed empty text")
    return np.concatenate([embedder._run(p, [text])[0] for p in embedder.providers])


def embed_batch(embedder: ConcatEmbedder, texts: Sequence[str]) -> np.ndarray:
    """Embed many texts; row i depends only on ``texts[i]``."""
    for index, text in enumerate(texts):
        if not text.strip():
            raise EmbeddingError(f"text at index {index} is empty")
    if not texts:
        return np.zeros((0, embedder.total_dim))
    return np.hstack([embedder._run(p, list(texts)) for p in embedder.providers])


def parse_embedder_spec(spec: str) -> ConcatEmbedder:
    """Build an embedder from ``hash``, ``hash:<dim>[:<seed>]``, ``service:<url>``
    or ``local:<model-path>`` entries, comma separated, in concatenation order."""
    spec = spec.strip()
    if spec == "hash":
        return hash_embedder()
    providers = []
    for index, part in enumerate(p.strip() for p in spec.split(",")):
        kind, _, arg = part.partition(":")
        if kind == "hash":
            dim_s, _, seed_s = arg.partition(":")
            if not dim_s:
                raise ValueError(f"hash provider needs a dimension: {part!r}")
            providers.append(HashProvider(int(dim_s), int(seed_s) if seed_s else index))
        elif kind == "service" and arg:
            providers.append(ServiceProvider(arg))
        elif kind == "local" and arg:
            providers.append(SentenceTransformerProvider(arg))
        else:
            raise ValueError(f"unknown embedder entry {part!r}")
    return ConcatEmbedder(tuple(providers))


def save_embeddings(path: str | Path, ids: Sequence[str], matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError("ids and matrix rows disagree")
    lines = [f"dim={matrix.shape[1]}"]
    for rid, row in zip(ids, matrix):
        if "\t" in rid or "\n" in rid:
            raise ValueError(f"review id {rid!r} contains a tab or newline")
        lines.append(rid + "\t" + " ".join(format(float(v), ".17g") for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embeddings(path: str | Path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("dim="):
        raise EmbeddingError(f"{path}: missing 'dim=<D>' header")
    dim = int(lines[0][4:])
    ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        rid, sep, values = line.partition("\t")
        row = [float(v) for v in values.split()] if sep else []
        if len(row) != dim:
            raise EmbeddingError(f"{path}:{lineno}: expected {dim} values, got {len(row)}")
        ids.append(rid)
        rows.append(row)
    return ids, np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
