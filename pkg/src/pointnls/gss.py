"""Orbital-stability verdicts from spectral counts and the slope sign.

The generic contract: with ``n = n(L1)`` on the verdict's space and
``p = p(omega)`` (1 if J > 0, 0 if J < 0) a standing wave is stable when
``n - p = 0`` and unstable when ``n - p`` is odd, provided L2 >= 0 with a
one-dimensional kernel spanned by the profile and L1 has trivial kernel.
Regimes where those facts are only cited, or where the parity is unknown,
are returned as indeterminate or flagged ``asserted=False``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .domain import DiscreteDomain, auto_truncation, l2_inner
from .errors import InconsistentInputs
from .operators import SpectralReport, assemble, spectral_report
from .profiles import (GRAPH_DELTA, GRAPH_DELTA_PRIME, LINE_DELTA, LINE_DELTA_PRIME,
                       LINE_DELTA_REPULSIVE, ProfileSpec, sample)
from .slope import SlopeReport, slope_J

STABLE, UNSTABLE, INDETERMINATE = "stable", "unstable", "indeterminate"
KERNEL_CORRELATION = 0.999


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str
    space: str
    n_negative: int
    kernel_ok: bool
    p_of_omega: int | str
    rule: str
    asserted: bool
    diagnostics: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "space": self.space,
            "n_negative": self.n_negative,
            "kernel_ok": self.kernel_ok,
            "p_of_omega": self.p_of_omega,
            "rule": self.rule,
            "asserted": self.asserted,
            "diagnostics": list(self.diagnostics),
        }


def _key(r: SpectralReport) -> tuple[str, str]:
    return r.which, r.subspace


def _same_spec(a: ProfileSpec, b: ProfileSpec) -> bool:
    return (a.model == b.model and a.omega == b.omega and a.p == b.p and a.variant == b.variant
            and a.bump == b.bump)


def threshold(spec: ProfileSpec) -> float | None:
    """Frequency where n(L1) jumps for the delta' families."""
    m = spec.model
    if m.kind == LINE_DELTA_PRIME and spec.variant == "odd":
        return 4 / m.strength ** 2 * (spec.p + 1) / (spec.p - 1)
    if m.kind == GRAPH_DELTA_PRIME:
        return m.n_edges ** 2 / m.strength ** 2 * (spec.p + 1) / (spec.p - 1)
    return None


def _kernel_correlation(report: SpectralReport, spec: ProfileSpec) -> float | None:
    zero = [f for mu, f in report.lowest_eigs if abs(mu) <= report.tol_zero]
    if not zero:
        return None
    v = zero[0]
    phi = sample(spec, v.domain)
    num = abs(l2_inner(v, phi))
    return num / math.sqrt(l2_inner(v, v) * l2_inner(phi, phi))


def classify(spec: ProfileSpec, spectral, slope: SlopeReport) -> StabilityVerdict:
    """Verdict for ``spec`` from its spectral reports and slope report.

    ``spectral`` is an iterable of SpectralReport covering at least L1 and L2
    on the full space; parity-sector reports (odd sector for line delta',
    edgewise-even for graph delta' with even N) enable the restricted
    instability routes.  Raises InconsistentInputs when a report belongs to a
    different profile.
    """
    reports = {}
    for r in spectral:
        if not _same_spec(r.spec, spec):
            raise InconsistentInputs(f"spectral report for {r.spec.label()} does not match {spec.label()}")
        reports[_key(r)] = r
    if slope.omega != spec.omega or slope.family != spec.family():
        raise InconsistentInputs("slope report was computed for a different family or frequency")
    for need in (("L1", "full"), ("L2", "full")):
        if need not in reports:
            raise InconsistentInputs(f"missing spectral report {need[0]} on the full space")

    L1, L2 = reports[("L1", "full")], reports[("L2", "full")]
    m = spec.model
    p_om = slope.p_of_omega
    diags: list[str] = [f"n(L1)={L1.n_negative}", f"ker(L1)={L1.kernel_dim}",
                        f"n(L2)={L2.n_negative}", f"ker(L2)={L2.kernel_dim}", f"J={slope.J:.6g}"]
    space = {LINE_DELTA: "H1_line", LINE_DELTA_REPULSIVE: "H1_line",
             LINE_DELTA_PRIME: "H1_line_minus_origin", GRAPH_DELTA: "E_graph",
             GRAPH_DELTA_PRIME: "H1_graph"}[m.kind]

    def verdict(v, rule, n=L1.n_negative, sp=space, asserted=True, ok=True):
        return StabilityVerdict(v, sp, n, ok, p_om, rule, asserted and v != INDETERMINATE, tuple(diags))

    # spectral preconditions shared by every regime
    l2_ok = L2.n_negative == 0 and L2.kernel_dim == 1
    corr = _kernel_correlation(L2, spec)
    if corr is not None:
        diags.append(f"corr(ker L2, phi)={corr:.9f}")
        l2_ok = l2_ok and corr >= KERNEL_CORRELATION
    if not l2_ok:
        return verdict(INDETERMINATE, "precondition failed: L2 must be nonnegative with kernel spanned by the profile", ok=False)
    if spec.omega <= 0:
        return verdict(INDETERMINATE, "precondition failed: essential spectrum touches zero", ok=False)
    if L1.kernel_dim != 0:
        why = "translation kernel" if (m.kind == LINE_DELTA and m.strength == 0) else "nontrivial kernel"
        return verdict(INDETERMINATE, f"precondition failed: L1 has a {why} (dim {L1.kernel_dim})", ok=False)
    if p_om == INDETERMINATE:
        return verdict(INDETERMINATE, "degenerate slope |J| <= tol; second-order criterion not applied")

    n = L1.n_negative
    if m.kind == LINE_DELTA:
        if m.strength < 0:
            return verdict(UNSTABLE, "repulsive defect: n(L1)=2, instability cited not proved", asserted=False)
        if n != 1:
            return verdict(INDETERMINATE, f"expected n(L1)=1, measured {n}")
        return verdict(STABLE if p_om == 1 else UNSTABLE, "slope criterion with n(L1)=1")

    if m.kind == LINE_DELTA_REPULSIVE:
        if n == 0 and p_om == 0:
            return verdict(STABLE, "repulsive nonlinearity: L1 positive, n(L1)-p=0")
        return verdict(INDETERMINATE, f"unexpected counts for the repulsive case (n={n}, p={p_om})")

    if m.kind == LINE_DELTA_PRIME:
        if spec.variant == "asymmetric":
            return verdict(INDETERMINATE, "asymmetric branch: counts and slope reported only")
        if n - p_om == 0:
            return verdict(STABLE, "GSS count n(L1)-p=0")
        if p_om == 0 and ("L1", "odd_sector") in reports:
            odd = reports[("L1", "odd_sector")]
            diags.append(f"n(L1|odd)={odd.n_negative}")
            if odd.kernel_dim == 0 and (odd.n_negative - p_om) % 2 == 1:
                return verdict(UNSTABLE, "odd-subspace GSS", n=odd.n_negative, sp="H1_odd_line")
        return _parity(verdict, n, p_om, "GSS count n(L1)-p")

    if m.kind == GRAPH_DELTA:
        if spec.variant == "bump":
            return verdict(INDETERMINATE, "bump profiles: no verdict established")
        if n != 1:
            return verdict(INDETERMINATE, f"expected n(L1)=1, measured {n}")
        return verdict(STABLE if p_om == 1 else UNSTABLE, "slope criterion with n(L1)=1 on the vertex-symmetric space")

    # graph delta'
    if n - p_om == 0:
        return verdict(STABLE, "GSS count n(L1)-p=0")
    thr = threshold(spec)
    if m.n_edges % 2 == 0:
        key = ("L1", "edgewise_even")
        if key in reports:
            ev = reports[key]
            diags.append(f"n(L1|edgewise even)={ev.n_negative}")
            if ev.kernel_dim == 0 and (ev.n_negative - p_om) % 2 == 1:
                return verdict(UNSTABLE, "edgewise-even sector GSS count (odd n-p)",
                               n=ev.n_negative, sp="H1_even_graph")
        return _parity(verdict, n, p_om, "GSS count n(L1)-p")
    if thr is not None and spec.omega > thr:
        return verdict(INDETERMINATE, f"odd N above threshold: full-space parity unknown (measured n={n})")
    return _parity(verdict, n, p_om, "GSS count n(L1)-p")


def _parity(verdict, n, p_om, rule):
    if (n - p_om) % 2 == 1:
        return verdict(UNSTABLE, rule + " odd")
    return verdict(INDETERMINATE, rule + f" even and nonzero (n={n}, p={p_om})")


def required_subspaces(spec: ProfileSpec) -> list[tuple[str, str]]:
    out = [("L1", "full"), ("L2", "full")]
    m = spec.model
    if m.kind == LINE_DELTA_PRIME and spec.variant == "odd":
        out.append(("L1", "odd_sector"))
    if m.kind == GRAPH_DELTA_PRIME and m.n_edges % 2 == 0:
        out.append(("L1", "edgewise_even"))
    return out


def default_domain(spec: ProfileSpec, h: float = 0.01, X: float | None = None) -> DiscreteDomain:
    X = X or auto_truncation(spec.omega, spec.p)
    return DiscreteDomain.build(spec.model.domain_kind, spec.model.n_edges, X, h)


def analyze(spec: ProfileSpec, h: float = 0.01, X: float | None = None,
            dom: DiscreteDomain | None = None) -> tuple[StabilityVerdict, list[SpectralReport], SlopeReport]:
    """Compute every report ``classify`` needs and return the verdict with them."""
    dom = dom or default_domain(spec, h, X)
    reports = []
    for which, sub in required_subspaces(spec):
        k = 1 if which == "L2" else 0
        reports.append(spectral_report(assemble(which, spec, dom, sub), k))
    slope = slope_J(spec.family(), spec.omega)
    return classify(spec, reports, slope), reports, slope
