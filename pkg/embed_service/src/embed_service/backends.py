"""Embedding backends: the deterministic mock and the real-model wrapper.

The mock mirrors the client toolkit's documented algorithm exactly, so
mock-mode vectors are interchangeable with the client's own test double:
component i of a vector is blake2b(key = seed as 8-byte little-endian,
data = i as 4-byte little-endian ++ NFC(text) as UTF-8, digest_size=8)
read as a little-endian uint64 and scaled to [-1, 1), and the vector is
then unit-normalized. The empty text maps to the zero vector.
"""

from __future__ import annotations

import hashlib
import unicodedata

import numpy as np


def stable_text_hash(text: str) -> str:
    """64-bit hash of the exact text as 16 hex chars (embedding file key)."""
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


class MockBackend:
    """Deterministic seeded-hash embeddings; no model required."""

    def __init__(self, dim: int = 8, seed: int = 0):
        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")
        self.dim = dim
        self.seed = seed
        self.model_name = f"mock-{dim}d-seed{seed}"
        self._key = (seed % (1 << 64)).to_bytes(8, "little")

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [self._vector(t) for t in texts]

    def _vector(self, text: str) -> list[float]:
        text = unicodedata.normalize("NFC", text)
        if not text:
            return [0.0] * self.dim
        payload = text.encode("utf-8")
        raw = np.empty(self.dim)
        for i in range(self.dim):
            h = hashlib.blake2b(key=self._key, digest_size=8)
            h.update(i.to_bytes(4, "little"))
            h.update(payload)
            raw[i] = int.from_bytes(h.digest(), "little") / float(1 << 64) * 2.0 - 1.0
        return [float(x) for x in raw / np.linalg.norm(raw)]


class ModelBackend:
    """Wraps a sentence-transformers model behind the same interface."""

    def __init__(self, model_ref: str):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_ref)
        self.model_name = model_ref
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def embed(self, texts: list[str]) -> list[list[float]]:
        out: list[list[float]] = [None] * len(texts)  # type: ignore[list-item]
        nonempty = [(k, t) for k, t in enumerate(texts) if t]
        for k, _ in enumerate(texts):
            out[k] = [0.0] * self.dim
        if nonempty:
            vectors = self._model.encode(
                [t for _, t in nonempty], normalize_embeddings=True, show_progress_bar=False
            )
            for (k, _), vec in zip(nonempty, vectors):
                out[k] = [float(x) for x in vec]
        return out


def normalize_rows(vectors: list[list[float]]) -> list[list[float]]:
    """Server-side unit normalization; zero rows stay zero."""
    out = []
    for vec in vectors:
        arr = np.asarray(vec, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        out.append([float(x) for x in (arr if norm == 0.0 else arr / norm)])
    return out


def write_embedding_file(texts: list[str], backend, out_path) -> int:
    """Precompute mode: one unique text per record in the client's
    embedding file format ('dim N' header, then hash<TAB>floats)."""
    seen: set[str] = set()
    unique = []
    for text in texts:
        if text and text not in seen:
            seen.add(text)
            unique.append(text)
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"dim {backend.dim}\n")
        for text in unique:
            vec = normalize_rows(backend.embed([text]))[0]
            f.write(stable_text_hash(text) + "\t" + " ".join(repr(x) for x in vec) + "\n")
    return len(unique)
