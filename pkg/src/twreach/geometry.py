"""Axis-aligned boxes and the small amount of interval/matrix arithmetic
the enclosure computations need.

All set operations here are exact in max-norm: bloating, hulls and
containment act coordinatewise, so boxes compose without slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box given by lower/upper corner vectors."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError(f"box corners must be 1-D and congruent, got {lo.shape} / {hi.shape}")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise DomainError("box corners must be finite")
        if np.any(lo > hi):
            raise DomainError("box has lo > hi")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x) -> "Box":
        x = np.asarray(x, dtype=float)
        return cls(x.copy(), x.copy())

    @classmethod
    def from_center_radius(cls, center, radius) -> "Box":
        center = np.asarray(center, dtype=float)
        r = np.broadcast_to(np.asarray(radius, dtype=float), center.shape)
        if np.any(r < 0):
            raise DomainError("negative box radius")
        return cls(center - r, center + r)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diameter(self) -> float:
        """Max-norm diameter: the largest side length."""
        return float(np.max(self.hi - self.lo)) if self.dim else 0.0

    def hull(self, other: "Box") -> "Box":
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def bloat(self, amount) -> "Box":
        """Grow every face outward; `amount` is a scalar or per-dimension vector."""
        a = np.broadcast_to(np.asarray(amount, dtype=float), self.lo.shape)
        if np.any(a < 0):
            raise DomainError("negative bloat amount")
        return Box(self.lo - a, self.hi + a)

    def contains(self, x, slack: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def contains_box(self, other: "Box", slack: float = 0.0) -> bool:
        return bool(np.all(other.lo >= self.lo - slack) and np.all(other.hi <= self.hi + slack))

    def intersect(self, other: "Box"):
        """Intersection box, or None when disjoint."""
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return Box(lo, hi)

    def project(self, index: int) -> tuple[float, float]:
        return float(self.lo[index]), float(self.hi[index])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform samples, shape (n, dim)."""
        u = rng.random((n, self.dim))
        return self.lo + u * (self.hi - self.lo)


def hull_of(boxes) -> Box:
    boxes = list(boxes)
    lo = np.min([b.lo for b in boxes], axis=0)
    hi = np.max([b.hi for b in boxes], axis=0)
    return Box(lo, hi)


# -- interval scalars/matrices represented as (lo, hi) ndarray pairs --------

def interval_mul(alo, ahi, blo, bhi):
    """Entrywise product of two interval arrays."""
    p1, p2, p3, p4 = alo * blo, alo * bhi, ahi * blo, ahi * bhi
    return (np.minimum(np.minimum(p1, p2), np.minimum(p3, p4)),
            np.maximum(np.maximum(p1, p2), np.maximum(p3, p4)))


def interval_mag(lo, hi):
    """Entrywise magnitude bound max(|lo|, |hi|)."""
    return np.maximum(np.abs(lo), np.abs(hi))


def rowsum_norm(m) -> float:
    """Induced infinity norm (max absolute row sum)."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return float(np.max(np.sum(np.abs(m), axis=1))) if m.size else 0.0


def lognorm_inf(m) -> float:
    """Logarithmic norm for the infinity norm: max_i (m_ii + sum_{j!=i} |m_ij|).

    Unlike the operator norm this can be negative, so it tracks genuine
    contraction of dissipative dynamics.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    a = np.abs(m).sum(axis=1) - np.abs(np.diag(m)) + np.diag(m)
    return float(np.max(a))
