"""Planar similarity transforms (uniform scale, rotation, translation)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class SimilarityTransform:
    """Maps a point ``p`` to ``scale * R(rotation) @ p + (tx, ty)``.

    Coordinates are ``(x, y)`` with x along image columns and y along rows,
    so a positive rotation turns +x toward +y.
    """

    scale: float = 1.0
    rotation: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidArgumentError(f"similarity scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls) -> SimilarityTransform:
        return cls()

    @property
    def translation(self) -> tuple[float, float]:
        return (self.tx, self.ty)

    def linear(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return self.scale * np.array([[c, -s], [s, c]])

    def matrix(self) -> np.ndarray:
        """3x3 homogeneous matrix."""
        m = np.eye(3)
        m[:2, :2] = self.linear()
        m[:2, 2] = (self.tx, self.ty)
        return m

    def apply(self, points) -> np.ndarray:
        """Transform an ``(..., 2)`` array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.linear().T + np.array([self.tx, self.ty])

    def apply_vectors(self, vectors) -> np.ndarray:
        """Transform displacement vectors (translation does not apply)."""
        return np.asarray(vectors, dtype=float) @ self.linear().T

    def inverse(self) -> SimilarityTransform:
        inv_scale = 1.0 / self.scale
        c, s = math.cos(-self.rotation), math.sin(-self.rotation)
        tx = -inv_scale * (c * self.tx - s * self.ty)
        ty = -inv_scale * (s * self.tx + c * self.ty)
        return SimilarityTransform(inv_scale, -self.rotation, tx, ty)

    def compose(self, first: SimilarityTransform) -> SimilarityTransform:
        """Return ``self ∘ first``: apply ``first`` then ``self``."""
        scale = self.scale * first.scale
        rotation = _wrap_angle(self.rotation + first.rotation)
        tx, ty = self.apply([first.tx, first.ty])
        return SimilarityTransform(scale, rotation, float(tx), float(ty))

    def is_close(self, other: SimilarityTransform, tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.matrix(), other.matrix(), atol=tol, rtol=0))


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))
