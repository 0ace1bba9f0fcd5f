"""Embedding-similarity scoring and filtering of sentence or phrase pairs.

The embedding model is a pluggable provider: a deterministic mock for
tests, a file of precomputed vectors, or an HTTP service speaking the
batch protocol (POST /embed, GET /healthz). Vectors are re-normalized
client-side, the empty text embeds to the zero vector, and the zero
vector scores 0 against everything.
"""

from __future__ import annotations

import hashlib
import math
import time
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, SentencePair
from .errors import (
    InputOutputError,
    MissingEmbeddingError,
    ParseError,
    ProviderError,
    StructuralError,
    ValidationError,
)


def text_hash(text: str) -> str:
    """Stable 64-bit hash of the exact text, as 16 hex characters.

    blake2b(UTF-8 bytes, digest_size=8); keys the embedding file format.
    """
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


def unit_normalize(vector: np.ndarray) -> np.ndarray:
    """Scale to unit Euclidean norm; the zero vector stays zero."""
    vector = np.asarray(vector, dtype=np.float64)
    if not np.all(np.isfinite(vector)):
        raise ValidationError("embedding vector contains NaN or infinite components")
    norm = float(np.linalg.norm(vector))
    return vector if norm == 0.0 else vector / norm


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity clamped to [-1, 1]; zero vectors score 0."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise StructuralError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return max(-1.0, min(1.0, float(np.dot(u, v)) / (nu * nv)))


@dataclass(frozen=True)
class ScoredPair:
    pair: SentencePair
    similarity: float


class EmbeddingProvider:
    """Deterministic text -> unit vector mapping (zero vector for '')."""

    kind = "abstract"
    dim: int

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        raise NotImplementedError

    def cache_token(self) -> str:
        """Identity string for content-addressed caching of scores."""
        raise NotImplementedError


class MockEmbedder(EmbeddingProvider):
    """Structural test double for a multilingual embedding model.

    Each text maps to a seeded-hash unit vector: component i is
    blake2b(key=seed as 8-byte LE, data=i as 4-byte LE ++ NFC(text) UTF-8,
    digest_size=8) read as little-endian uint64 and scaled to [-1, 1),
    then the vector is unit-normalized. In paired mode, registered
    (src, tgt) pairs share the src vector, simulating clean pairs.
    """

    kind = "mock"

    def __init__(self, dim: int = 8, seed: int = 0):
        if dim < 2:
            raise ValidationError(f"mock embedding dim must be >= 2, got {dim}")
        self.dim = dim
        self.seed = seed
        self._key = (seed % (1 << 64)).to_bytes(8, "little")
        self._registry: dict[str, str] = {}

    def register_pair(self, src: str, tgt: str) -> None:
        canonical = unicodedata.normalize("NFC", src)
        self._registry[canonical] = canonical
        self._registry[unicodedata.normalize("NFC", tgt)] = canonical

    def register_corpus(self, corpus: Corpus) -> None:
        for pair in corpus.pairs:
            self.register_pair(pair.src, pair.tgt)

    def _vector(self, text: str) -> np.ndarray:
        text = unicodedata.normalize("NFC", text)
        if not text:
            return np.zeros(self.dim)
        text = self._registry.get(text, text)
        payload = text.encode("utf-8")
        raw = np.empty(self.dim)
        for i in range(self.dim):
            h = hashlib.blake2b(key=self._key, digest_size=8)
            h.update(i.to_bytes(4, "little"))
            h.update(payload)
            u = int.from_bytes(h.digest(), "little")
            raw[i] = u / float(1 << 64) * 2.0 - 1.0
        return unit_normalize(raw)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self._vector(t) for t in texts]

    def cache_token(self) -> str:
        reg = hashlib.blake2b(
            "\x00".join(sorted(self._registry)).encode("utf-8"), digest_size=8
        ).hexdigest()
        return f"mock:dim={self.dim}:seed={self.seed}:reg={reg}"


class FileEmbedder(EmbeddingProvider):
    """Serves precomputed vectors keyed by the text hash of the exact text."""

    kind = "file"

    def __init__(self, path):
        self.path = Path(path)
        self.dim, self._vectors = read_embedding_file(self.path)
        self._vectors = {h: unit_normalize(v) for h, v in self._vectors.items()}

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            if text == "":
                out.append(np.zeros(self.dim))
                continue
            h = text_hash(text)
            if h not in self._vectors:
                raise MissingEmbeddingError(h)
            out.append(self._vectors[h])
        return out

    def cache_token(self) -> str:
        digest = hashlib.blake2b(self.path.read_bytes(), digest_size=8).hexdigest()
        return f"file:dim={self.dim}:content={digest}"


class ServiceEmbedder(EmbeddingProvider):
    """Client for the HTTP batch embedding protocol.

    POST {endpoint}/embed with {"texts": [...]} returns
    {"dim": N, "embeddings": [[...], ...]} in request order;
    GET {endpoint}/healthz is the handshake that reports the dimension.
    """

    kind = "service"

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        import requests

        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._session = requests.Session()
        health = self._request("GET", f"{self.endpoint}/healthz")
        if health.get("status") != "ok" or "dim" not in health:
            raise ProviderError(f"bad handshake from {self.endpoint}/healthz: {health}")
        self.dim = int(health["dim"])
        self.model = str(health.get("model", ""))

    def _request(self, method: str, url: str, json_body=None) -> dict:
        """Issue one request with retries on transport errors and 5xx;
        4xx responses fail immediately (the request itself is wrong)."""
        import requests

        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.request(method, url, json=json_body, timeout=self.timeout)
                payload = resp.json()
            except (requests.RequestException, ValueError) as e:
                last_error = e
            else:
                if resp.status_code == 200:
                    return payload
                message = f"{url} returned {resp.status_code}: {payload.get('error', payload)}"
                if resp.status_code < 500:
                    raise ProviderError(message)
                last_error = ProviderError(message)
            if attempt < self.retries:
                time.sleep(min(0.2 * 2**attempt, 2.0))
        raise ProviderError(
            f"{url} failed after {self.retries + 1} attempts: {last_error}"
        ) from last_error

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        payload = self._request("POST", f"{self.endpoint}/embed", {"texts": list(texts)})
        embeddings = payload.get("embeddings")
        if embeddings is None or len(embeddings) != len(texts):
            raise ProviderError(
                f"expected {len(texts)} embeddings, got "
                f"{'none' if embeddings is None else len(embeddings)}"
            )
        out = []
        for text, vec in zip(texts, embeddings):
            if len(vec) != self.dim:
                raise ProviderError(f"vector of dim {len(vec)}, expected {self.dim}")
            out.append(np.zeros(self.dim) if text == "" else unit_normalize(vec))
        return out

    def cache_token(self) -> str:
        return f"service:dim={self.dim}:model={self.model}:endpoint={self.endpoint}"


def score_pairs(
    corpus: Corpus, provider: EmbeddingProvider, batch_size: int = 32
) -> list[ScoredPair]:
    """Cosine-score every pair, in id order; batching never changes scores.

    A provider failure is re-raised naming the id range of the failed
    batch, so no pair is ever silently dropped.
    """
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    scored: list[ScoredPair] = []
    pairs = corpus.pairs
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start : start + batch_size]
        try:
            src_vecs = provider.embed_batch([p.src for p in batch])
            tgt_vecs = provider.embed_batch([p.tgt for p in batch])
        except ProviderError as e:
            raise ProviderError(
                f"embedding failed for pairs {batch[0].id}..{batch[-1].id}: {e}"
            ) from e
        for pair, u, v in zip(batch, src_vecs, tgt_vecs):
            scored.append(ScoredPair(pair, cosine(u, v)))
    return scored


def filter_by_threshold(scored: Iterable[ScoredPair], threshold: float, name: str = "filtered") -> Corpus:
    """Keep pairs scoring at or above the threshold, preserving order."""
    kept = [sp.pair for sp in scored if sp.similarity >= threshold]
    return Corpus(name, kept, 1)


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    mean: float
    std: float
    min: float
    max: float
    count: int
    margin: float


def calibrate_from_scores(scored: list[ScoredPair], margin: float = 0.0) -> CalibrationResult:
    if not scored:
        raise ValidationError("calibration requires a non-empty reference corpus")
    sims = [sp.similarity for sp in scored]
    mean = sum(sims) / len(sims)
    variance = sum((s - mean) ** 2 for s in sims) / len(sims)
    tau = max(-1.0, min(1.0, mean - margin))
    return CalibrationResult(
        threshold=tau,
        mean=mean,
        std=math.sqrt(variance),
        min=min(sims),
        max=max(sims),
        count=len(sims),
        margin=margin,
    )


def calibrate_threshold(
    reference: Corpus,
    provider: EmbeddingProvider,
    margin: float = 0.0,
    batch_size: int = 32,
) -> CalibrationResult:
    """Derive a similarity threshold from a trusted reference corpus.

    The threshold is the mean reference similarity minus the margin,
    clamped to [-1, 1]; distribution statistics ride along for the report.
    """
    if not reference.pairs:
        raise ValidationError("calibration requires a non-empty reference corpus")
    return calibrate_from_scores(score_pairs(reference, provider, batch_size), margin)


def write_embedding_file(vectors: dict[str, Sequence[float]], dim: int, path) -> None:
    """Write the embedding file format: 'dim N' header, then hash<TAB>floats."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"dim {dim}\n")
            for h, vec in vectors.items():
                if len(vec) != dim:
                    raise ValidationError(f"vector for {h} has dim {len(vec)}, expected {dim}")
                f.write(h + "\t" + " ".join(repr(float(x)) for x in vec) + "\n")
    except OSError as e:
        raise InputOutputError(f"cannot write {path}: {e.strerror}") from e


def read_embedding_file(path) -> tuple[int, dict[str, np.ndarray]]:
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n")
            parts = header.split()
            if len(parts) != 2 or parts[0] != "dim" or not parts[1].isdigit():
                raise ParseError(f"expected header 'dim N', got {header!r}", path, 1)
            dim = int(parts[1])
            for lineno, line in enumerate(f, start=2):
                line = line.rstrip("\n")
                if not line:
                    continue
                key, sep, rest = line.partition("\t")
                if not sep:
                    raise ParseError("expected 'hash<TAB>floats'", path, lineno)
                try:
                    vec = np.array([float(x) for x in rest.split()], dtype=np.float64)
                except ValueError as e:
                    raise ParseError(f"bad float: {e}", path, lineno) from e
                if len(vec) != dim:
                    raise ParseError(f"vector of dim {len(vec)}, expected {dim}", path, lineno)
                vectors[key] = vec
    except OSError as e:
        raise InputOutputError(f"cannot read {path}: {e.strerror}") from e
    return dim, vectors


def write_scored_tsv(scored: Iterable[ScoredPair], path, decimals: int = 6) -> None:
    """Dump scored pairs as TSV: id, similarity, src, tgt.

    decimals < 0 writes full-precision similarities (cache use).
    """
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for sp in scored:
                sim = repr(sp.similarity) if decimals < 0 else f"{sp.similarity:.{decimals}f}"
                f.write(f"{sp.pair.id}\t{sim}\t{sp.pair.src}\t{sp.pair.tgt}\n")
    except OSError as e:
        raise InputOutputError(f"cannot write {path}: {e.strerror}") from e


def read_scored_tsv(path) -> list[ScoredPair]:
    path = Path(path)
    scored = []
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 4:
                    raise ParseError("expected 4 tab-separated fields", path, lineno)
                try:
                    pair = SentencePair(int(fields[0]), fields[2], fields[3])
                    scored.append(ScoredPair(pair, float(fields[1])))
                except ValueError as e:
                    raise ParseError(f"bad numeric field: {e}", path, lineno) from e
    except OSError as e:
        raise InputOutputError(f"cannot read {path}: {e.strerror}") from e
    return scored
