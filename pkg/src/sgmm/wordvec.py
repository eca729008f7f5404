"""Pre-trained-style word vectors and scene-graph node features.

The table format is plain text, one entry per line: the token followed by
its vector components, space-separated. A node's feature vector is the mean
of its label's per-word vectors; out-of-vocabulary words map to a unit
vector that is a pure function of (word, seed), so features are stable
across runs without the table ever changing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .rng import stream
from .scenegraph import Node

RESOURCE_DIR = Path(__file__).parent / "resources"
BUNDLED_WORD_VECTORS = RESOURCE_DIR / "word_vectors_50d.txt"
# Line count of the bundled table; tests hold this against the file.
BUNDLED_VOCAB_SIZE = 96
BUNDLED_DIM = 50


@dataclass(frozen=True)
class WordVectorTable:
    dim: int
    vectors: dict  # token -> np.ndarray, read-only by convention

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


def load_word_vectors(data: bytes | str) -> WordVectorTable:
    """Parse a table; dimension is fixed by the first entry.

    Errors carry 1-based line numbers. Tokens must be unique and lowercase.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"word vectors: invalid UTF-8 at byte {e.start}") from e
    else:
        text = data
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) < 2:
            raise FormatError(f"word vectors line {lineno}: need a token and values")
        token = parts[0]
        if token != token.lower():
            raise FormatError(f"word vectors line {lineno}: token {token!r} is not lowercase")
        if token in vectors:
            raise FormatError(f"word vectors line {lineno}: duplicate token {token!r}")
        try:
            values = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError as e:
            raise FormatError(f"word vectors line {lineno}: non-numeric value") from e
        if dim is None:
            dim = values.size
        elif values.size != dim:
            raise FormatError(
                f"word vectors line {lineno}: expected {dim} values, got {values.size}")
        vectors[token] = values
    if dim is None:
        raise FormatError("word vectors: empty table")
    return WordVectorTable(dim=dim, vectors=vectors)


@lru_cache(maxsize=1)
def bundled_word_vectors() -> WordVectorTable:
    return load_word_vectors(BUNDLED_WORD_VECTORS.read_bytes())


def oov_vector(word: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-random unit vector for an unknown word."""
    v = stream(seed, "oov", word).standard_normal(dim)
    norm = np.linalg.norm(v)
    if norm == 0.0:  # astronomically unlikely; regenerate from a shifted key
        v = stream(seed, "oov2", word).standard_normal(dim)
        norm = np.linalg.norm(v)
    return v / norm


def word_feature(word: str, table: WordVectorTable, seed: int) -> np.ndarray:
    known = table.get(word)
    return known.copy() if known is not None else oov_vector(word, table.dim, seed)


def featurize_node(node: Node, table: WordVectorTable, seed: int = 0) -> np.ndarray:
    """Mean of the label's per-word vectors (labels may be multi-word)."""
    words = node.label.split()
    if not words:
        # validated graphs never hit this; fall back to the OOV path
        return oov_vector("", table.dim, seed)
    return np.mean([word_feature(w, table, seed) for w in words], axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroDivisionError("cosine of a zero-norm vector")
    return float(np.dot(a, b) / (na * nb))


def combine_features(word_vec: np.ndarray | None, n2v_vec: np.ndarray | None,
                     mode: str) -> np.ndarray:
    """Per-node GCN input under a feature mode: word vectors, structural
    node2vec vectors, or their concatenation."""
    if mode == "glove":
        if word_vec is None:
            raise ConfigError("feature mode 'glove' needs word vectors")
        return word_vec
    if mode == "n2v":
        if n2v_vec is None:
            raise ConfigError("feature mode 'n2v' needs node2vec vectors")
        return n2v_vec
    if mode == "concat":
        if word_vec is None or n2v_vec is None:
            raise ConfigError("feature mode 'concat' needs both vector families")
        return np.concatenate([word_vec, n2v_vec])
    raise ConfigError(f"unknown feature mode {mode!r}")
