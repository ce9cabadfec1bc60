"""Pre-trained word vectors and mean-pooled phrase embeddings.

The vector table is immutable after load, so concurrent reads are safe.
Phrase pooling is an unweighted mean over in-vocabulary tokens; tokens are
lowercased, split on whitespace, and stripped of surrounding punctuation.
An all-out-of-vocabulary phrase embeds to the zero vector.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np


class VectorFormatError(ValueError):
    """Raised when a word-vector file does not parse."""


@dataclass(frozen=True)
class VectorTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_word_vectors(path, expected_dim: int | None = None) -> VectorTable:
    """Load a GloVe-style text file: ``token v1 … vd`` per line."""
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) < 2:
                raise VectorFormatError(f"{path}:{lineno}: no vector values")
            token = parts[0]
            try:
                values = np.asarray([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise VectorFormatError(f"{path}:{lineno}: {exc}") from exc
            if dim is None:
                dim = values.size
                if expected_dim is not None and dim != expected_dim:
                    raise VectorFormatError(
                        f"{path}:{lineno}: dimension {dim} != expected {expected_dim}"
                    )
            elif values.size != dim:
                raise VectorFormatError(
                    f"{path}:{lineno}: dimension {values.size} != {dim} of first line"
                )
            vectors[token] = values
    if dim is None:
        raise VectorFormatError(f"{path}: empty vector file")
    return VectorTable(dim=dim, vectors=vectors)


def tokenize(phrase: str) -> list[str]:
    """Lowercase whitespace tokens with surrounding punctuation stripped."""
    tokens = []
    for raw in phrase.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def embed_phrase(table: VectorTable, phrase: str) -> np.ndarray:
    """Mean of the in-vocabulary token vectors; zero vector if none match."""
    rows = [table.vectors[tok] for tok in tokenize(phrase) if tok in table.vectors]
    if not rows:
        return np.zeros(table.dim, dtype=np.float64)
    return np.mean(rows, axis=0)
