"""Truncated, uniformly meshed star geometry and discrete function spaces.

The real line is stored as a two-edge star: edge 0 is the negative half-line
reflected onto ``s = -x >= 0`` and edge 1 is the positive half-line.  Every
edge carries nodes ``s_k = k*h`` for ``k = 0..n_interior``; the outer node
``s = X`` holds a homogeneous Dirichlet value and is not stored.

Quadrature is the trapezoid rule on each edge, which coincides with the
lumped mass used by the finite-volume operators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainMismatch, ValidationError

LINE = "line"
STAR = "star"


def auto_truncation(omega: float, p: float) -> float:
    """Default truncation length ``max(30/sqrt(omega), 30/kappa)``.

    ``kappa = (p-1) sqrt(omega) / 2`` is the decay rate of the sech branch
    inside the profile; both bounds keep the profile tail far below 1e-12.
    """
    if omega <= 0:
        raise ValidationError(f"automatic truncation needs omega > 0, got {omega}")
    kappa = 0.5 * (p - 1.0) * math.sqrt(omega)
    return max(30.0 / math.sqrt(omega), 30.0 / kappa)


@dataclass(frozen=True)
class DiscreteDomain:
    kind: str
    n_edges: int
    X: float
    h: float
    n_interior: int

    def __post_init__(self):
        if self.kind not in (LINE, STAR):
            raise ValidationError(f"unknown domain kind {self.kind!r}")
        if self.kind == LINE and self.n_edges != 2:
            raise ValidationError("a line domain has exactly two half-lines")
        if self.n_edges < 1 or self.h <= 0 or self.X <= 0 or self.n_interior < 1:
            raise ValidationError("invalid domain sizes")
        if abs(self.h * (self.n_interior + 1) - self.X) > 1e-12 * self.X:
            raise ValidationError("mesh width and truncation length are inconsistent")

    @classmethod
    def build(cls, kind: str, n_edges: int, X: float, h: float) -> "DiscreteDomain":
        """Mesh of width exactly ``h``; ``X`` is rounded up to a whole number of cells."""
        if h <= 0 or X <= 0:
            raise ValidationError("X and h must be positive")
        n = math.ceil(X / h - 1e-9)
        return cls(kind, n_edges, n * h, h, n - 1)

    @classmethod
    def line(cls, X: float, h: float) -> "DiscreteDomain":
        return cls.build(LINE, 2, X, h)

    @classmethod
    def star(cls, n_edges: int, X: float, h: float) -> "DiscreteDomain":
        return cls.build(STAR, n_edges, X, h)

    @property
    def n_nodes(self) -> int:
        """Stored nodes per edge (vertex node included)."""
        return self.n_interior + 1

    @property
    def s(self) -> np.ndarray:
        """Distance from the vertex of every stored node."""
        return self.h * np.arange(self.n_nodes)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.h)
        w[0] = 0.5 * self.h
        return w

    def x_line(self, edge: int) -> np.ndarray:
        """Signed line coordinate of the nodes of ``edge`` (line domains)."""
        return -self.s if edge == 0 else self.s

    def check_frequency(self, omega: float) -> None:
        """Truncation must cover at least 20 decay lengths of ``exp(-sqrt(omega) s)``."""
        if omega > 0 and self.X < 20.0 / math.sqrt(omega) * (1 - 1e-12):
            raise ValidationError(
                f"truncation X={self.X:g} is shorter than 20/sqrt(omega)={20 / math.sqrt(omega):g}"
            )


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on every edge, ordered from the vertex outward."""

    values: np.ndarray
    domain: DiscreteDomain = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.domain.n_edges, self.domain.n_nodes):
            raise ValidationError(
                f"field shape {v.shape} does not match domain "
                f"({self.domain.n_edges}, {self.domain.n_nodes})"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("field contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, domain: DiscreteDomain) -> "Field":
        return cls(np.zeros((domain.n_edges, domain.n_nodes)), domain)

    @classmethod
    def from_function(cls, domain: DiscreteDomain, fn) -> "Field":
        """Sample ``fn(edge, s)`` on every edge."""
        s = domain.s
        return cls(np.array([fn(j, s) for j in range(domain.n_edges)]), domain)

    def __mul__(self, c):
        return Field(self.values * c, self.domain)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        _same(self, other)
        return Field(self.values + other.values, self.domain)

    def __sub__(self, other: "Field") -> "Field":
        _same(self, other)
        return Field(self.values - other.values, self.domain)

    def line_values(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, u) on the full line, left to right; both vertex samples kept."""
        d = self.domain
        x = np.concatenate([-d.s[::-1], d.s])
        u = np.concatenate([self.values[0, ::-1], self.values[1]])
        return x, u


def _same(a: Field, b: Field) -> None:
    if a.domain != b.domain:
        raise DomainMismatch("fields live on different domains")


def _forward_differences(u: np.ndarray, h: float) -> np.ndarray:
    padded = np.concatenate([u, np.zeros((u.shape[0], 1), dtype=u.dtype)], axis=1)
    return np.diff(padded, axis=1) / h


def l2_inner(a: Field, b: Field) -> float:
    """Real part of the trapezoid approximation of sum_j int a_j conj(b_j)."""
    _same(a, b)
    w = a.domain.weights
    return float(np.real(np.sum(w * a.values * np.conj(b.values))))


def h1_inner(a: Field, b: Field) -> complex:
    """Complex H1 inner product: trapezoid L2 part plus forward-difference gradients."""
    _same(a, b)
    d = a.domain
    l2 = np.sum(d.weights * a.values * np.conj(b.values))
    da = _forward_differences(a.values, d.h)
    db = _forward_differences(b.values, d.h)
    return complex(l2 + d.h * np.sum(da * np.conj(db)))


def h1_norm_sq(a: Field) -> float:
    return float(np.real(h1_inner(a, a)))


def lp_norm_p(a: Field, q: float) -> float:
    """``sum_j int |a_j|^q`` by the trapezoid rule."""
    return float(np.sum(a.domain.weights * np.abs(a.values) ** q))
