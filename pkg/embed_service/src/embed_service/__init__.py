"""Embedding sidecar service: POST /embed and GET /healthz over HTTP,
backed by a multilingual sentence-embedding model or a deterministic mock."""

__version__ = "0.1.0"
