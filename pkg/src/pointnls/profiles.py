"""Closed-form standing-wave profiles for point interactions.

Every profile is a sech-power branch ``[A sech^2(kappa s + c)]^(1/(p-1))``
on each edge, with ``A = (p+1) omega / 2`` and ``kappa = (p-1) sqrt(omega)/2``;
only the per-edge shift ``c`` and sign differ between models.  The repulsive
delta model uses the csch branch and, at ``omega = 0``, an algebraic profile.

Edge coordinates: ``s >= 0`` is the distance from the vertex and derivatives
are taken with respect to ``s`` (outward).  On the line, edge 0 is ``x < 0``,
so ``d/ds = -d/dx`` there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from .domain import LINE, STAR, DiscreteDomain, Field
from .errors import MatchingFailed, OutOfExistenceWindow, ValidationError

LINE_DELTA = "line_delta_attractive"
LINE_DELTA_REPULSIVE = "line_delta_repulsive"
LINE_DELTA_PRIME = "line_delta_prime"
GRAPH_DELTA = "graph_delta"
GRAPH_DELTA_PRIME = "graph_delta_prime"

KINDS = (LINE_DELTA, LINE_DELTA_REPULSIVE, LINE_DELTA_PRIME, GRAPH_DELTA, GRAPH_DELTA_PRIME)

DEFAULT_VARIANT = {
    LINE_DELTA: "even",
    LINE_DELTA_REPULSIVE: "even",
    LINE_DELTA_PRIME: "odd",
    GRAPH_DELTA: "tail",
    GRAPH_DELTA_PRIME: "tail",
}
VARIANTS = {
    LINE_DELTA: ("even",),
    LINE_DELTA_REPULSIVE: ("even",),
    LINE_DELTA_PRIME: ("odd", "asymmetric"),
    GRAPH_DELTA: ("tail", "bump"),
    GRAPH_DELTA_PRIME: ("tail",),
}


@dataclass(frozen=True)
class InteractionModel:
    """Equation identity: kind, strength (gamma, gamma, beta, alpha or lambda) and edge count."""

    kind: str
    strength: float
    n_edges: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        if self.is_line and self.n_edges != 2:
            raise ValidationError("line models have exactly two half-lines")
        if not self.is_line and self.n_edges < 2:
            raise ValidationError("star graphs need at least two edges")
        if self.strength == 0 and self.kind != LINE_DELTA:
            raise ValidationError("interaction strength must be nonzero")
        if self.kind == LINE_DELTA_REPULSIVE and self.strength <= 0:
            raise ValidationError("the repulsive model needs gamma > 0")
        if self.kind == GRAPH_DELTA and self.strength >= 0:
            raise ValidationError("graph-delta profiles need alpha < 0")
        if self.kind == GRAPH_DELTA_PRIME and self.strength >= 0:
            raise ValidationError("graph-delta' profiles need lambda < 0")

    @property
    def is_line(self) -> bool:
        return self.kind.startswith("line")

    @property
    def attractive(self) -> bool:
        return self.kind != LINE_DELTA_REPULSIVE

    @property
    def vertex_type(self) -> str:
        """'delta' (continuous value, flux condition) or 'delta_prime'."""
        return "delta_prime" if self.kind in (LINE_DELTA_PRIME, GRAPH_DELTA_PRIME) else "delta"

    @property
    def coupling(self) -> float:
        """Strength in star-graph convention: alpha for delta, lambda for delta'.

        With outward derivatives the line delta condition reads
        ``sum_j u_j'(0) = -gamma u(0)`` and, after flipping the sign of the
        left half-line, the line delta' condition is the N=2 star condition
        with ``lambda = -beta``.
        """
        if self.kind in (LINE_DELTA, LINE_DELTA_REPULSIVE, LINE_DELTA_PRIME):
            return -self.strength
        return self.strength

    @property
    def orientation(self) -> np.ndarray:
        """Per-edge sign turning the field into star-graph variables."""
        if self.kind == LINE_DELTA_PRIME:
            return np.array([-1.0, 1.0])
        return np.ones(self.n_edges)

    @property
    def domain_kind(self) -> str:
        return LINE if self.is_line else STAR

    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class ProfileSpec:
    """A standing wave: model, frequency, power, variant and matching constants.

    ``shifts[j]`` and ``signs[j]`` define edge ``j`` as
    ``signs[j] * branch(kappa s + shifts[j])``.  Evaluation always uses the
    stored constants, so a spec whose ``omega`` is altered afterwards is no
    longer a solution (which the residual checks detect).
    """

    model: InteractionModel
    omega: float
    p: float
    variant: str
    matching: tuple[tuple[str, float], ...]
    shifts: tuple[float, ...]
    signs: tuple[float, ...]
    branch: str = "sech"
    bump: int = 0

    @property
    def constants(self) -> Mapping[str, float]:
        return dict(self.matching)

    @property
    def kappa(self) -> float:
        return 0.5 * (self.p - 1.0) * math.sqrt(self.omega)

    def family(self) -> "ProfileFamily":
        return ProfileFamily(self.model, self.p, self.variant, self.bump)

    def label(self) -> str:
        v = f"bump({self.bump})" if self.variant == "bump" else self.variant
        return f"{self.model.kind}[{self.model.strength:g},N={self.model.n_edges}] {v} omega={self.omega:g} p={self.p:g}"


@dataclass(frozen=True)
class ProfileFamily:
    """A one-parameter (in omega) family of profiles."""

    model: InteractionModel
    p: float
    variant: str | None = None
    bump: int = 0

    def at(self, omega: float) -> ProfileSpec:
        return make_profile(self.model, omega, self.p, self.variant, self.bump)

    @property
    def resolved_variant(self) -> str:
        return self.variant or DEFAULT_VARIANT[self.model.kind]


def existence_window(model: InteractionModel, p: float, variant: str | None = None,
                     m: int = 0) -> tuple[float, float]:
    """Open frequency interval on which the variant exists."""
    variant = variant or DEFAULT_VARIANT[model.kind]
    s, N = model.strength, model.n_edges
    if model.kind == LINE_DELTA:
        return (s * s / 4.0, math.inf)
    if model.kind == LINE_DELTA_REPULSIVE:
        return (0.0, s * s / 4.0)
    if model.kind == LINE_DELTA_PRIME:
        lo = 4.0 / (s * s)
        if variant == "asymmetric":
            lo *= (p + 1.0) / (p - 1.0)
        return (lo, math.inf)
    if model.kind == GRAPH_DELTA:
        m = m if variant == "bump" else 0
        return (s * s / (N - 2 * m) ** 2, math.inf)
    return (N * N / (s * s), math.inf)


def make_profile(model: InteractionModel, omega: float, p: float,
                 variant: str | None = None, m: int = 0) -> ProfileSpec:
    """Resolve the matching constants of a standing wave.

    Raises OutOfExistenceWindow when ``(omega, p, variant)`` lies outside the
    variant's existence window and MatchingFailed when the asymmetric delta'
    constants cannot be found.
    """
    variant = variant or DEFAULT_VARIANT[model.kind]
    if variant == "tail" and model.kind == GRAPH_DELTA:
        m = 0
    if variant not in VARIANTS[model.kind]:
        raise ValidationError(f"variant {variant!r} is not defined for {model.kind}")
    if not p > 1:
        raise ValidationError(f"power p must exceed 1, got {p}")
    N, s = model.n_edges, model.strength

    if model.kind == LINE_DELTA_REPULSIVE and omega == 0:
        if not p < 5:
            raise OutOfExistenceWindow("omega = 0 repulsive profile needs 1 < p < 5")
        return ProfileSpec(model, 0.0, p, variant, (), (0.0, 0.0), (1.0, 1.0), branch="algebraic")

    lo, hi = existence_window(model, p, variant, m)
    if not (lo < omega < hi):
        raise OutOfExistenceWindow(
            f"{model.kind} {variant} profile needs {lo:g} < omega < {hi:g}, got omega={omega:g}"
        )
    root = math.sqrt(omega)

    if model.kind == LINE_DELTA:
        a = math.atanh(s / (2 * root))
        return ProfileSpec(model, omega, p, variant, (("a", a),), (a, a), (1.0, 1.0))

    if model.kind == LINE_DELTA_REPULSIVE:
        a = math.atanh(2 * root / s)
        return ProfileSpec(model, omega, p, variant, (("a", a),), (a, a), (1.0, 1.0), branch="csch")

    if model.kind == LINE_DELTA_PRIME:
        kappa = 0.5 * (p - 1) * root
        if variant == "odd":
            a = math.atanh(2 / (s * root))
            return ProfileSpec(model, omega, p, variant, (("a", a), ("y", a / kappa)),
                               (a, a), (-1.0, 1.0))
        c1, c2 = _asymmetric_shifts(abs(s) * root, p)
        if s < 0:
            c1, c2 = -c1, -c2
        consts = (("a1", c1), ("a2", c2), ("y1", c1 / kappa), ("y2", c2 / kappa))
        spec = ProfileSpec(model, omega, p, variant, consts, (c2, c1), (-1.0, 1.0))
        worst = max(vertex_residuals(spec).values())
        if worst > 1e-10:
            raise MatchingFailed(f"asymmetric delta' matching residual {worst:.3e}")
        return spec

    if model.kind == GRAPH_DELTA:
        if not 0 <= m <= (N - 1) // 2:
            raise ValidationError(f"bump count m must lie in 0..{(N - 1) // 2} for N={N}")
        a = math.atanh(s / ((2 * m - N) * root))
        shifts = tuple(-a if j < m else a for j in range(N))
        return ProfileSpec(model, omega, p, variant, (("a_m", a),), shifts, (1.0,) * N, bump=m)

    a = math.atanh(-N / (s * root))
    return ProfileSpec(model, omega, p, variant, (("a", a),), (a,) * N, (1.0,) * N)


def _asymmetric_shifts(b: float, p: float) -> tuple[float, float]:
    """Shifts (c1, c2), c1 < c2, of the asymmetric delta' profile for ``b = beta sqrt(omega) > 0``.

    With ``t = tanh(c)`` and ``F = (1 - t^2)^(1/(p-1))`` the two matching
    conditions read ``t1 F1 = t2 F2`` and ``F1 + F2 = b t1 F1``.  Eliminating
    ``t1 = t2 / (b t2 - 1)`` leaves a scalar equation in ``t2`` whose trivial
    root ``t2 = 2/b`` is the odd profile; the asymmetric root lies in
    ``(2/b, 1)``.
    """
    e = 1.0 / (p - 1.0)

    def t1_of(t2):
        return t2 / (b * t2 - 1.0)

    def g(t2):
        t1 = t1_of(t2)
        return e * (math.log1p(-t2 * t2) - math.log1p(-t1 * t1)) + math.log(b * t2 - 1.0)

    t_odd = 2.0 / b
    grid = t_odd + (1.0 - t_odd) * (1.0 - np.geomspace(1.0, 1e-14, 4000))[1:-1]
    grid = grid[(grid > t_odd) & (grid < 1.0)]
    vals = np.array([g(t) for t in grid])
    pos = np.flatnonzero(vals > 0)
    if pos.size == 0:
        raise MatchingFailed("no asymmetric delta' branch found (omega too close to the bifurcation?)")
    start = pos[0]
    neg = np.flatnonzero(vals[start:] < 0)
    if neg.size == 0:
        raise MatchingFailed("asymmetric delta' matching equation has no sign change")
    i = start + neg[0]
    try:
        t2 = brentq(g, grid[i - 1], grid[i], xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (ValueError, RuntimeError) as exc:
        raise MatchingFailed(str(exc)) from exc
    t1 = t1_of(t2)
    return math.atanh(t1), math.atanh(t2)


def _log_sech(z):
    az = np.abs(z)
    return -az - np.log1p(np.exp(-2 * az)) + math.log(2.0)


def _log_csch(z):
    return -z - np.log1p(-np.exp(-2 * z)) + math.log(2.0)


def eval_profile(spec: ProfileSpec, edge: int, x, order: int = 0):
    """Profile (order 0) or its first/second derivative in the edge coordinate."""
    x = np.asarray(x, dtype=float)
    p, omega = spec.p, spec.omega
    sign = spec.signs[edge]
    if spec.branch == "algebraic":
        g = spec.model.strength
        B = (2 * (p + 1) * g * g) ** (1 / (p - 1))
        q = 2 / (p - 1)
        u = 4 + (p - 1) * g * x
        if order == 0:
            out = B * u ** -q
        elif order == 1:
            out = -2 * g * B * u ** (-q - 1)
        else:
            out = 2 * (p + 1) * g * g * B * u ** (-q - 2)
        return sign * out

    root = math.sqrt(omega)
    kappa = 0.5 * (p - 1) * root
    z = kappa * x + spec.shifts[edge]
    logA = math.log(0.5 * (p + 1) * omega)
    if spec.branch == "sech":
        f = np.exp((logA + 2 * _log_sech(z)) / (p - 1))
        if order == 0:
            out = f
        elif order == 1:
            out = -root * np.tanh(z) * f
        else:
            sech2 = np.exp(2 * _log_sech(z))
            out = f * (omega * np.tanh(z) ** 2 - root * kappa * sech2)
    elif spec.branch == "csch":
        f = np.exp((logA + 2 * _log_csch(z)) / (p - 1))
        coth = 1.0 / np.tanh(z)
        if order == 0:
            out = f
        elif order == 1:
            out = -root * coth * f
        else:
            csch2 = np.exp(2 * _log_csch(z))
            out = f * (root * kappa * csch2 + omega * coth ** 2)
    else:
        raise ValidationError(f"unknown branch {spec.branch!r}")
    return sign * out


def sample(spec: ProfileSpec, dom: DiscreteDomain, order: int = 0) -> Field:
    if dom.n_edges != spec.model.n_edges:
        raise ValidationError("domain and model have different edge counts")
    return Field.from_function(dom, lambda j, s: eval_profile(spec, j, s, order))


def vertex_residuals(spec: ProfileSpec) -> dict[str, float]:
    """Absolute residuals of the model's vertex (or jump) conditions."""
    m = spec.model
    N = m.n_edges
    v = np.array([float(eval_profile(spec, j, 0.0, 0)) for j in range(N)])
    d = np.array([float(eval_profile(spec, j, 0.0, 1)) for j in range(N)])
    if m.kind in (LINE_DELTA, LINE_DELTA_REPULSIVE):
        # u'(0+) - u'(0-) = d1 + d0 in outward derivatives
        return {
            "continuity": abs(v[0] - v[1]),
            "derivative_jump": abs(d[0] + d[1] + m.strength * v[1]),
        }
    if m.kind == LINE_DELTA_PRIME:
        # u'(0+) = d1, u'(0-) = -d0
        return {
            "derivative_continuity": abs(d[1] + d[0]),
            "value_jump": abs(v[1] - v[0] + m.strength * d[1]),
        }
    if m.kind == GRAPH_DELTA:
        return {
            "continuity": float(np.max(np.abs(v - v[0]))),
            "flux_sum": abs(d.sum() - m.strength * v[0]),
        }
    return {
        "derivative_equality": float(np.max(np.abs(d - d[0]))),
        "value_sum": abs(v.sum() - m.strength * d[0]),
    }


def interior_residual(spec: ProfileSpec, dom: DiscreteDomain) -> float:
    """Sup over interior nodes of ``|-phi'' + omega phi -+ |phi|^(p-1) phi|``."""
    s = dom.s[1:]
    sgn = 1.0 if spec.model.attractive else -1.0
    worst = 0.0
    for j in range(spec.model.n_edges):
        f0 = eval_profile(spec, j, s, 0)
        f2 = eval_profile(spec, j, s, 2)
        r = -f2 + spec.omega * f0 - sgn * np.abs(f0) ** (spec.p - 1) * f0
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def stationary_residual(spec: ProfileSpec, dom: DiscreteDomain) -> float:
    """Interior equation residual plus the sum of vertex-condition residuals."""
    return interior_residual(spec, dom) + sum(vertex_residuals(spec).values())
