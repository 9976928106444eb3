"""Frozen pre-trained word embeddings and the trainable position table.

Word vectors come from a GloVe-style text file and are never updated during
training. Lookups are case sensitive; out-of-vocabulary words resolve to the
zero vector so inference stays deterministic without trainable OOV rows.

Position vectors encode each token's relative distance to the mention span.
Distances inside [-c, c] index their own row; anything further lands in a
single shared out-of-range bucket, giving a table of 2c + 2 rows.
"""

from __future__ import annotations

import numpy as np


class EmbeddingError(ValueError):
    pass


class WordEmbeddings:
    """Vocabulary plus a |V| x d_w float64 matrix, frozen."""

    def __init__(self, words: list[str], matrix: np.ndarray):
        if len(words) != len(set(words)):
            raise EmbeddingError("duplicate word in vocabulary")
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise EmbeddingError(f"matrix shape {matrix.shape} does not match "
                                 f"{len(words)} words")
        self.words = list(words)
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self._index = {w: i for i, w in enumerate(self.words)}
        self.dim = self.matrix.shape[1]
        self._oov = np.zeros(self.dim, dtype=np.float64)

    @classmethod
    def from_file(cls, path) -> "WordEmbeddings":
        """Load ``word v1 .. v_dw`` lines; d_w is fixed by the first line."""
        words: list[str] = []
        rows: list[list[float]] = []
        seen = set()
        dim = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                word, values = parts[0], parts[1:]
                if dim is None:
                    dim = len(values)
                    if dim == 0:
                        raise EmbeddingError(f"{path}:{lineno}: no vector values")
                elif len(values) != dim:
                    raise EmbeddingError(f"{path}:{lineno}: expected {dim} values, "
                                         f"got {len(values)}")
                if word in seen:
                    raise EmbeddingError(f"{path}:{lineno}: duplicate word {word!r}")
                seen.add(word)
                try:
                    rows.append([float(v) for v in values])
                except ValueError:
                    raise EmbeddingError(f"{path}:{lineno}: non-numeric value") from None
                words.append(word)
        if not words:
            raise EmbeddingError(f"{path}: empty embedding file")
        return cls(words, np.array(rows, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def lookup(self, word: str) -> np.ndarray:
        """Stored vector for in-vocabulary words, the zero vector otherwise."""
        idx = self._index.get(word)
        return self.matrix[idx] if idx is not None else self._oov

    def lookup_many(self, tokens) -> np.ndarray:
        return np.stack([self.lookup(t) for t in tokens])


class PositionTable:
    """Trainable distance-indexed vectors in R^{d_p}.

    Row layout: index d + c for clipped distance d in [-c, c], plus row
    2c + 1 for out-of-range distances. Rows start uniform in [-0.25, 0.25].
    """

    def __init__(self, c: int, dim: int, rng: np.random.Generator):
        if c < 1:
            raise EmbeddingError(f"window size must be >= 1, got {c}")
        self.c = c
        self.dim = dim
        self.size = 2 * c + 2
        self.initial = rng.uniform(-0.25, 0.25, size=(self.size, dim))

    def index_for(self, i: int, start: int, end: int) -> int:
        """Table row for token ``i`` against mention span [start, end)."""
        if not 0 <= start < end:
            raise EmbeddingError(f"invalid mention span [{start}, {end})")
        if start <= i < end:
            d = 0
        elif i >= end:
            d = i - (end - 1)
        else:
            d = i - start
        if -self.c <= d <= self.c:
            return d + self.c
        return 2 * self.c + 1

    def indices_for(self, positions, start: int, end: int) -> np.ndarray:
        return np.array([self.index_for(i, start, end) for i in positions],
                        dtype=np.intp)
