"""Per-feature min-max scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch


@dataclass(eq=False)
class Scaler:
    mins: np.ndarray
    maxes: np.ndarray

    @classmethod
    def fit(cls, X) -> "Scaler":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or len(X) == 0:
            raise DimensionMismatch("scaler needs a non-empty 2-d array")
        return cls(X.min(axis=0), X.max(axis=0))

    @property
    def dim(self) -> int:
        return len(self.mins)

    @property
    def span(self) -> np.ndarray:
        return self.maxes - self.mins

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} features, got {X.shape[-1]}")
        return X

    def transform(self, X) -> np.ndarray:
        X = self._check(X)
        span = self.span
        safe = np.where(span > 0, span, 1.0)
        # constant features map to 0
        return np.where(span > 0, (X - self.mins) / safe, 0.0)

    def inverse_transform(self, Z) -> np.ndarray:
        Z = self._check(Z)
        return self.mins + Z * self.span

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxes": self.maxes.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.asarray(d["mins"], dtype=float), np.asarray(d["maxes"], dtype=float))
