"""Squared L2 norm of profile families and its frequency derivative J(omega).

On an edge with shift ``c`` the sech branch gives

    int_0^inf phi^2 ds = K(omega) G(tanh c),   G(tau) = int_tau^1 (1-t^2)^(r-1) dt,

with ``r = 2/(p-1)`` and ``K = ((p+1)/2)^r * 2/(p-1) * omega^(r-1/2)``.  For
every explicit family ``tanh c = k/sqrt(omega)`` with ``k`` fixed, so J has a
closed form in terms of G; the csch branch gives the same with
``H(sigma) = int_1^sigma (t^2-1)^(r-1) dt``.  G and H have an algebraic
endpoint singularity for p > 3, handled by QUADPACK's algebraic weight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

from .errors import NoBracket, ValidationError, WindowBoundaryTooClose
from .profiles import ProfileFamily, eval_profile, existence_window

FD_STEP = 1e-4


def G(tau: float, r: float) -> float:
    """``int_tau^1 (1 - t^2)^(r-1) dt`` for ``-1 < tau < 1``."""
    if tau >= 1:
        return 0.0
    val, _ = quad(lambda t: (1 + t) ** (r - 1), tau, 1.0, weight="alg", wvar=(0.0, r - 1),
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def H(sigma: float, r: float) -> float:
    """``int_1^sigma (t^2 - 1)^(r-1) dt`` for ``sigma > 1``."""
    val, _ = quad(lambda t: (1 + t) ** (r - 1), 1.0, sigma, weight="alg", wvar=(r - 1, 0.0),
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def _K(omega: float, p: float) -> float:
    r = 2.0 / (p - 1.0)
    return ((p + 1) / 2) ** r * 2 / (p - 1) * omega ** (r - 0.5)


def has_closed_form(family: ProfileFamily) -> bool:
    return family.resolved_variant != "asymmetric"


def _window(family: ProfileFamily) -> tuple[float, float]:
    return existence_window(family.model, family.p, family.resolved_variant, family.bump)


def _taus(family: ProfileFamily, omega: float) -> np.ndarray:
    spec = family.at(omega)
    return np.tanh(np.asarray(spec.shifts, dtype=float))


def norm_sq_of_omega(family: ProfileFamily, omega: float) -> float:
    """``||Phi_omega||^2`` by adaptive quadrature of the closed-form profile."""
    spec = family.at(omega)
    root = math.sqrt(omega)
    kappa = spec.kappa
    total = 0.0
    for j in range(family.model.n_edges):
        peak = max(0.0, -spec.shifts[j] / kappa) if spec.branch == "sech" else 0.0
        end = peak + 40.0 / root + 40.0 / kappa

        def f(s, j=j):
            return eval_profile(spec, j, s) ** 2

        if peak > 0:
            a, _ = quad(f, 0.0, peak, epsabs=0.0, epsrel=1e-13, limit=200)
            total += a
        b, _ = quad(f, peak, end, epsabs=0.0, epsrel=1e-13, limit=400)
        total += b
    return total


def norm_sq_closed(family: ProfileFamily, omega: float) -> float:
    """Same quantity from the t-integral form."""
    p = family.p
    r = 2.0 / (p - 1.0)
    spec = family.at(omega)
    K = _K(omega, p)
    if spec.branch == "csch":
        sigma = family.model.strength / (2 * math.sqrt(omega))
        return family.model.n_edges * K * H(sigma, r)
    return K * sum(G(t, r) for t in np.tanh(spec.shifts))


def J_closed(family: ProfileFamily, omega: float) -> float:
    """Closed-form slope ``d/domega ||Phi||^2`` (explicit families only)."""
    if not has_closed_form(family):
        raise ValidationError("no closed-form slope for the asymmetric profile")
    p = family.p
    r = 2.0 / (p - 1.0)
    K = _K(omega, p)
    spec = family.at(omega)
    if spec.branch == "csch":
        sigma = family.model.strength / (2 * math.sqrt(omega))
        per_edge = K * ((r - 0.5) / omega * H(sigma, r) - sigma / (2 * omega) * (sigma ** 2 - 1) ** (r - 1))
        return family.model.n_edges * per_edge
    return K / (2 * omega) * sum(_bracket(t, p) for t in _taus(family, omega))


def _bracket(tau: float, p: float) -> float:
    r = 2.0 / (p - 1.0)
    return (5 - p) / (p - 1) * G(tau, r) + tau * (1 - tau * tau) ** ((3 - p) / (p - 1))


def scaling_constant(family: ProfileFamily) -> float:
    """C in ``J = C omega^((7-3p)/(2(p-1))) J1``."""
    p = family.p
    return family.model.n_edges / (p - 1) * ((p + 1) / 2) ** (2 / (p - 1))


def J1(family: ProfileFamily, omega: float) -> float:
    """Edge-averaged bracket; carries the sign of J for the sech families."""
    taus = _taus(family, omega)
    return float(np.mean([_bracket(t, family.p) for t in taus]))


def J1_prime(family: ProfileFamily, omega: float) -> float:
    """``dJ1/domega`` in closed form."""
    p = family.p
    e = (3 - p) / (p - 1)
    out = []
    for tau in _taus(family, omega):
        q = 1 - tau * tau
        out.append(e * tau / omega * (q ** e + tau * tau * q ** (e - 1)))
    return float(np.mean(out))


def J_fd(family: ProfileFamily, omega: float, step: float = FD_STEP) -> float:
    d = step * omega
    lo, hi = _window(family)
    if omega - d <= lo or omega + d >= hi:
        raise WindowBoundaryTooClose("finite-difference stencil leaves the existence window")
    return (norm_sq_of_omega(family, omega + d) - norm_sq_of_omega(family, omega - d)) / (2 * d)


def tol_slope(norm_sq: float, omega: float) -> float:
    return 1e-6 * (1.0 + norm_sq / omega)


@dataclass(frozen=True)
class SlopeReport:
    family: ProfileFamily
    omega: float
    norm_sq: float
    J: float
    method: str
    J_closed: float | None
    J_fd: float
    p_of_omega: int | str
    disagreement: bool
    omega_star: float | None = None
    tol_slope: float = 0.0

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "norm_sq": self.norm_sq,
            "J": self.J,
            "method": self.method,
            "J_closed": self.J_closed,
            "J_fd": self.J_fd,
            "p_of_omega": self.p_of_omega,
            "disagreement": self.disagreement,
            "omega_star": self.omega_star,
            "tol_slope": self.tol_slope,
        }


def p_of_omega(J: float, tol: float) -> int | str:
    if J > tol:
        return 1
    if J < -tol:
        return 0
    return "indeterminate"


def slope_J(family: ProfileFamily, omega: float) -> SlopeReport:
    """J(omega) by the closed form (when available) and by central differences.

    Raises WindowBoundaryTooClose when omega lies within ten FD steps of an
    edge of the existence window.
    """
    lo, hi = _window(family)
    if not lo < omega < hi:
        family.at(omega)  # raises OutOfExistenceWindow with the window in the message
    margin = 10 * FD_STEP * omega
    if omega - lo < margin or hi - omega < margin:
        raise WindowBoundaryTooClose(
            f"omega={omega:g} is within {margin:.3g} of the window ({lo:g}, {hi:g})"
        )
    norm = norm_sq_of_omega(family, omega)
    fd = J_fd(family, omega)
    closed = J_closed(family, omega) if has_closed_form(family) else None
    J = closed if closed is not None else fd
    disagree = closed is not None and abs(closed - fd) > 1e-4 * max(abs(closed), 1e-300)
    tol = tol_slope(norm, omega)
    return SlopeReport(family, omega, norm, J, "closed_form" if closed is not None else "quadrature_fd",
                       closed, fd, p_of_omega(J, tol), disagree, tol_slope=tol)


@dataclass(frozen=True)
class OmegaStar:
    omega_star: float
    J_below: float
    J_above: float
    bracket: tuple[float, float]
    monotone: bool


def find_omega_star(family: ProfileFamily, n_monotone: int = 50) -> OmegaStar:
    """Root of J1 for p > 5, by bisection to relative tolerance 1e-10.

    The sign change is certified by finite-difference slopes at
    ``omega* (1 -+ 1e-3)`` and J1 is checked to decrease strictly on
    ``n_monotone`` sample points of the bracket.
    """
    if not family.p > 5:
        raise ValidationError(f"omega* exists only for p > 5, got p={family.p:g}")
    if not has_closed_form(family) or family.model.kind == "line_delta_repulsive":
        raise ValidationError("omega* search needs an explicit sech family")
    lo0, _ = _window(family)
    if lo0 <= 0:
        raise ValidationError("omega* search needs a positive window start")
    a, b = lo0 * (1 + 1e-6), lo0 * 1e6
    fa, fb = J1(family, a), J1(family, b)
    if not (fa > 0 > fb):
        raise NoBracket(f"J1 does not change sign on [{a:g}, {b:g}] (J1 = {fa:.3g}, {fb:.3g})")
    root = bisect(lambda w: J1(family, w), a, b, xtol=1e-300, rtol=1e-10, maxiter=500)
    samples = np.geomspace(a, b, n_monotone)
    vals = np.array([J1(family, w) for w in samples])
    monotone = bool(np.all(np.diff(vals) < 0))
    below = J_fd(family, root * (1 - 1e-3))
    above = J_fd(family, root * (1 + 1e-3))
    return OmegaStar(root, below, above, (a, b), monotone)
