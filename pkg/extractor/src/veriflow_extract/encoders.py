"""Claim text -> 768-d embedding views.

Two backends:

* "transformer": the sentence-summary ([CLS]) token of a frozen pretrained
  encoder, no fine-tuning.  Needs the optional transformer extra and model
  weights; raises ExtractError("encoder unavailable ...") otherwise.
* "hashed": a fully offline stand-in with the same output contract.  Each
  token maps to a fixed pseudo-random 768-d vector (generator seeded from
  the token's SHA-256), and a claim embeds as the L2-normalized mean of its
  token vectors.  Deterministic across runs; carries lexical signal only.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

from .viewio import ExtractError, read_claims, write_view

EMBED_DIM = 768
_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)


def _tokens(text: str) -> list[str]:
    return _PUNCT.sub("", text.lower()).split()


class HashedEncoder:
    """Deterministic hashed random-projection sentence encoder."""

    name = "hashed"

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big")
            vec = np.random.default_rng(seed).standard_normal(self.dim)
            self._cache[token] = vec
        return vec

    def encode(self, text: str) -> np.ndarray:
        toks = _tokens(text)
        if not toks:
            raise ExtractError("cannot embed empty text")
        vec = np.mean([self._token_vector(t) for t in toks], axis=0)
        return vec / np.linalg.norm(vec)

    def encode_batch(self, texts: list[str]) -> list[np.ndarray]:
        return [self.encode(t) for t in texts]


class TransformerEncoder:
    """Frozen pretrained encoder; embeds a claim as its [CLS] token."""

    name = "transformer"

    def __init__(self, model_name: str = "bert-base-uncased"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise ExtractError(f"encoder unavailable: install the 'transformer' extra ({e})") from None
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_name)
            self._model = AutoModel.from_pretrained(model_name)
        except Exception as e:
            raise ExtractError(f"encoder unavailable: cannot load {model_name!r} ({e})") from None
        self._model.eval()
        self._torch = torch
        self.dim = int(self._model.config.hidden_size)

    def encode_batch(self, texts: list[str]) -> list[np.ndarray]:
        for t in texts:
            if not t.strip():
                raise ExtractError("cannot embed empty text")
        out = []
        with self._torch.no_grad():
            for start in range(0, len(texts), 16):
                chunk = texts[start : start + 16]
                enc = self._tokenizer(chunk, return_tensors="pt", padding=True, truncation=True)
                hidden = self._model(**enc).last_hidden_state
                out.extend(hidden[:, 0, :].cpu().numpy().astype(float))
        return out


def make_encoder(backend: str, model: str = "bert-base-uncased"):
    if backend == "hashed":
        return HashedEncoder()
    if backend == "transformer":
        return TransformerEncoder(model)
    raise ExtractError(f"unknown embedding backend {backend!r}")


def embed_claims(
    claims_path: str | Path,
    out_dir: str | Path,
    backend: str = "transformer",
    model: str = "bert-base-uncased",
    view_name: str = "bert",
) -> Path:
    """Embed every claim and write a 768-d feature view."""
    claims = read_claims(claims_path)
    encoder = make_encoder(backend, model)
    if getattr(encoder, "dim", EMBED_DIM) != EMBED_DIM:
        raise ExtractError(f"encoder dim {encoder.dim} != {EMBED_DIM}")
    vectors = encoder.encode_batch([c["text"] for c in claims])
    rows = {c["claim_id"]: v for c, v in zip(claims, vectors)}
    return write_view(out_dir, view_name, EMBED_DIM, rows, extra_manifest={"encoder": encoder.name})
