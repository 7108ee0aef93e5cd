"""Discrete linearized operators on a star, their inertia and low spectrum.

The operators come from the quadratic form

    Q(u) = sum_j sum_k (u_{j,k+1} - u_{j,k})^2 / h + sum m_k V_k u_k^2 + vertex term

with lumped masses ``m`` (``h`` per interior node, ``h/2`` per edge at the
vertex) and a homogeneous Dirichlet value past the last stored node.  The
vertex term is ``alpha u(0)^2`` for a delta vertex (one shared vertex
unknown) and ``(1/lambda) (sum_j sigma_j u_j(0))^2`` for a delta' vertex (one
unknown per edge, ``sigma`` the orientation signs).  Eigenpairs solve
``A v = mu M v``; stationarity of the form reproduces the usual 3-point
stencil inside the edges and the vertex condition at ``s = 0``.

Every matrix is an arrow matrix: one tridiagonal block per edge, each
coupled to the small vertex block through its first node only.  Inertia is
therefore counted with a scalar LDL^T recurrence run from the outer end of
each edge followed by a dense Schur complement at the vertex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

from .domain import DiscreteDomain, Field
from .errors import (FactorizationBreakdown, IncompatibleSubspace, NoConvergence,
                     ValidationError)
from .profiles import InteractionModel, ProfileSpec, eval_profile

SUBSPACES = ("full", "even_sector", "odd_sector", "edgewise_even")


def tol_zero_for(h: float, omega: float) -> float:
    """Kernel tolerance: eigenvalues converge like h^2, scaled by the potential size."""
    return max(50.0 * h * h * (1.0 + omega), 1e-8)


@dataclass
class Branch:
    """Tridiagonal block of one edge (or one group of edges after reduction)."""

    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray
    link: np.ndarray  # coupling of the first node to each vertex unknown


@dataclass
class StarMatrix:
    branches: list[Branch]
    vertex: np.ndarray
    vertex_mass: np.ndarray

    @property
    def n_vertex(self) -> int:
        return self.vertex.shape[0]

    @property
    def size(self) -> int:
        return self.n_vertex + sum(b.diag.size for b in self.branches)

    def to_sparse(self) -> tuple[sp.csc_matrix, np.ndarray]:
        """Global matrix (vertex unknowns first, then each branch outward) and mass diagonal."""
        nv = self.n_vertex
        rows, cols, vals = [], [], []
        vi, vj = np.nonzero(self.vertex)
        rows.append(vi)
        cols.append(vj)
        vals.append(self.vertex[vi, vj])
        masses = [self.vertex_mass]
        off = nv
        for b in self.branches:
            n = b.diag.size
            idx = off + np.arange(n)
            rows += [idx, idx[:-1], idx[1:]]
            cols += [idx, idx[1:], idx[:-1]]
            vals += [b.diag, b.off, b.off]
            lk = np.flatnonzero(b.link)
            rows += [np.full(lk.size, off), lk]
            cols += [lk, np.full(lk.size, off)]
            vals += [b.link[lk], b.link[lk]]
            masses.append(b.mass)
            off += n
        A = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(off, off),
        )
        return A, np.concatenate(masses)

    def count_below(self, sigma: float) -> int:
        """Number of eigenvalues of ``A v = mu M v`` below ``sigma``.

        Equals the number of negative eigenvalues of ``A - sigma M``
        (Sylvester), computed by LDL^T on each branch from the outer end and
        Haynsworth additivity over the vertex Schur complement.  Pivots that
        vanish to rounding are retried with a slightly moved shift.
        """
        scale = max(1.0, float(max(np.max(np.abs(b.diag)) for b in self.branches)))
        for attempt in range(4):
            shift = sigma + attempt * 1e-11 * scale * (1 if attempt % 2 else -1)
            try:
                return self._count(shift, 1e-13 * scale)
            except _TinyPivot:
                continue
        raise FactorizationBreakdown(f"persistent zero pivot near shift {sigma:.6g}")

    def _count(self, sigma: float, tiny: float) -> int:
        negatives = 0
        schur = self.vertex - sigma * np.diag(self.vertex_mass)
        for b in self.branches:
            a = (b.diag - sigma * b.mass).tolist()
            o2 = (b.off * b.off).tolist()
            d = a[-1]
            neg = 0
            for k in range(len(a) - 2, -1, -1):
                if abs(d) < tiny:
                    raise _TinyPivot
                if d < 0:
                    neg += 1
                d = a[k] - o2[k] / d
            if abs(d) < tiny:
                raise _TinyPivot
            if d < 0:
                neg += 1
            negatives += neg
            if schur.size:
                schur = schur - np.outer(b.link, b.link) / d
        if schur.size:
            ev = np.linalg.eigvalsh(schur)
            if np.min(np.abs(ev)) < tiny:
                raise _TinyPivot
            negatives += int(np.sum(ev < 0))
        return negatives

    def gershgorin_lower(self) -> float:
        A, m = self.to_sparse()
        s = 1.0 / np.sqrt(m)
        B = sp.diags(s) @ A @ sp.diags(s)
        d = B.diagonal()
        radius = np.asarray(abs(B).sum(axis=1)).ravel() - np.abs(d)
        return float(np.min(d - radius))


class _TinyPivot(Exception):
    pass


@dataclass(frozen=True)
class _Sector:
    groups: tuple[tuple[tuple[int, ...], tuple[float, ...]], ...]
    vertex_map: np.ndarray  # full vertex unknowns = vertex_map @ reduced vertex unknowns


def _sector(model: InteractionModel, subspace: str) -> _Sector:
    N = model.n_edges
    prime = model.vertex_type == "delta_prime"
    if subspace == "full":
        groups = tuple(((j,), (1.0,)) for j in range(N))
        return _Sector(groups, np.eye(N if prime else 1))
    if subspace in ("even_sector", "odd_sector"):
        if not model.is_line:
            raise IncompatibleSubspace(f"{subspace} is defined for line models only")
        if subspace == "even_sector":
            signs = (1.0, 1.0)
            Q = np.array([[1.0], [1.0]]) if prime else np.array([[1.0]])
        else:
            signs = (-1.0, 1.0)
            Q = np.array([[-1.0], [1.0]]) if prime else np.zeros((1, 0))
        return _Sector((((0, 1), signs),), Q)
    if subspace == "edgewise_even":
        if not (prime and not model.is_line and N % 2 == 0):
            raise IncompatibleSubspace("edgewise_even needs a graph-delta' model with even N")
        half = N // 2
        g1, g2 = tuple(range(half)), tuple(range(half, N))
        Q = np.zeros((N, 2))
        Q[:half, 0] = 1.0
        Q[half:, 1] = 1.0
        return _Sector(((g1, (1.0,) * half), (g2, (1.0,) * half)), Q)
    raise IncompatibleSubspace(f"unknown subspace {subspace!r}")


def _full_matrix(model: InteractionModel, dom: DiscreteDomain, potential: np.ndarray) -> StarMatrix:
    """Unreduced arrow matrix for per-node potential ``potential[j, k]``."""
    N, h = model.n_edges, dom.h
    n = dom.n_interior
    prime = model.vertex_type == "delta_prime"
    branches = []
    for j in range(N):
        link = np.zeros(N if prime else 1)
        link[j if prime else 0] = -1.0 / h
        branches.append(Branch(
            diag=2.0 / h + h * potential[j, 1:],
            off=np.full(n - 1, -1.0 / h),
            mass=np.full(n, h),
            link=link,
        ))
    if prime:
        sigma = model.orientation
        vertex = np.diag(1.0 / h + 0.5 * h * potential[:, 0]) + np.outer(sigma, sigma) / model.coupling
        vmass = np.full(N, 0.5 * h)
    else:
        vertex = np.array([[N / h + 0.5 * h * potential[:, 0].sum() + model.coupling]])
        vmass = np.array([0.5 * h * N])
    return StarMatrix(branches, vertex, vmass)


def _reduce(full: StarMatrix, sector: _Sector) -> StarMatrix:
    Q = sector.vertex_map
    branches = []
    for edges, signs in sector.groups:
        bs = [full.branches[j] for j in edges]
        link = sum(s * (Q.T @ b.link) for s, b in zip(signs, bs))
        branches.append(Branch(
            diag=sum(b.diag for b in bs),
            off=sum(b.off for b in bs),
            mass=sum(b.mass for b in bs),
            link=np.atleast_1d(np.asarray(link, dtype=float)),
        ))
    vertex = Q.T @ full.vertex @ Q
    vmass = np.diag(Q.T @ np.diag(full.vertex_mass) @ Q).copy()
    return StarMatrix(branches, vertex, vmass)


def potential_of(which: str, spec: ProfileSpec, dom: DiscreteDomain) -> np.ndarray:
    """``omega -+ c |phi|^(p-1)`` on every node, ``c = p`` for L1 and 1 for L2."""
    if which not in ("L1", "L2"):
        raise ValidationError(f"operator must be L1 or L2, got {which!r}")
    c = spec.p if which == "L1" else 1.0
    sgn = 1.0 if spec.model.attractive else -1.0
    s = dom.s
    phi = np.array([eval_profile(spec, j, s) for j in range(spec.model.n_edges)])
    return spec.omega - sgn * c * np.abs(phi) ** (spec.p - 1)


@dataclass(eq=False)
class LinearizedOperator:
    which: str
    spec: ProfileSpec
    dom: DiscreteDomain
    subspace: str
    matrix: StarMatrix
    sector: _Sector = field(repr=False)

    @property
    def model(self) -> InteractionModel:
        return self.spec.model

    @cached_property
    def sparse(self) -> tuple[sp.csc_matrix, np.ndarray]:
        return self.matrix.to_sparse()

    @property
    def tol_zero(self) -> float:
        return tol_zero_for(self.dom.h, self.spec.omega)

    @cached_property
    def counts(self) -> tuple[int, int]:
        """(n_negative, kernel_dim) with the kernel tolerance."""
        t = self.tol_zero
        below = self.matrix.count_below(-t)
        upto = self.matrix.count_below(t)
        return below, upto - below

    def expand(self, vec: np.ndarray) -> Field:
        """Field on the full star from a vector of reduced unknowns."""
        dom = self.dom
        nv = self.matrix.n_vertex
        vertex = self.sector.vertex_map @ vec[:nv] if nv else np.zeros(self.sector.vertex_map.shape[0])
        vals = np.zeros((self.model.n_edges, dom.n_nodes))
        off = nv
        n = dom.n_interior
        prime = self.model.vertex_type == "delta_prime"
        for edges, signs in self.sector.groups:
            w = vec[off:off + n]
            for j, s in zip(edges, signs):
                vals[j, 1:] = s * w
                vals[j, 0] = vertex[j] if prime else vertex[0]
            off += n
        return Field(vals, dom)

    def restrict(self, u: Field) -> np.ndarray:
        """Reduced unknowns of a field lying in the operator's subspace."""
        v = np.real(u.values)
        prime = self.model.vertex_type == "delta_prime"
        vertex = v[:, 0] if prime else v[:1, 0]
        Q = self.sector.vertex_map
        parts = [np.linalg.lstsq(Q, vertex, rcond=None)[0]] if Q.shape[1] else []
        for edges, signs in self.sector.groups:
            parts.append(signs[0] * v[edges[0], 1:])
        return np.concatenate(parts)


def assemble(which: str, spec: ProfileSpec, dom: DiscreteDomain,
             subspace: str = "full") -> LinearizedOperator:
    """Linearized operator L1 or L2 of ``spec`` on ``dom`` restricted to ``subspace``."""
    model = spec.model
    if dom.n_edges != model.n_edges or dom.kind != model.domain_kind:
        raise ValidationError("domain geometry does not match the model")
    if spec.branch == "algebraic" or spec.omega <= 0:
        raise ValidationError("spectral runs need omega > 0")
    dom.check_frequency(spec.omega)
    if subspace != "full" and subspace in ("even_sector", "odd_sector") and spec.variant == "asymmetric":
        raise IncompatibleSubspace("the asymmetric profile does not preserve parity sectors")
    sector = _sector(model, subspace)
    full = _full_matrix(model, dom, potential_of(which, spec, dom))
    matrix = full if subspace == "full" else _reduce(full, sector)
    return LinearizedOperator(which, spec, dom, subspace, matrix, sector)


def kinetic_matrix(model: InteractionModel, dom: DiscreteDomain) -> tuple[sp.csc_matrix, np.ndarray]:
    """Interaction Laplacian (zero potential) on the full star: matrix and lumped masses."""
    A, m = _full_matrix(model, dom, np.zeros((model.n_edges, dom.n_nodes))).to_sparse()
    return A, m


def field_to_vector(model: InteractionModel, u: np.ndarray) -> np.ndarray:
    """Global unknowns (vertex first) from an (N, n_nodes) array on the full star."""
    prime = model.vertex_type == "delta_prime"
    vertex = u[:, 0] if prime else u[:, 0].mean(keepdims=True)
    return np.concatenate([vertex, u[:, 1:].ravel()])


def vector_to_field(model: InteractionModel, vec: np.ndarray, n_nodes: int) -> np.ndarray:
    N = model.n_edges
    prime = model.vertex_type == "delta_prime"
    nv = N if prime else 1
    out = np.empty((N, n_nodes), dtype=vec.dtype)
    out[:, 1:] = vec[nv:].reshape(N, n_nodes - 1)
    out[:, 0] = vec[:N] if prime else vec[0]
    return out


def inertia_negative(op: LinearizedOperator) -> int:
    """Eigenvalues below ``-tol_zero``, counted exactly by factorization inertia."""
    return op.counts[0]


def kernel_dim(op: LinearizedOperator) -> int:
    return op.counts[1]


def quadratic_form(op: LinearizedOperator, u: Field) -> float:
    A, _ = op.sparse
    v = op.restrict(u)
    return float(v @ (A @ v))


def _lowest_eigenvalue(mat: StarMatrix) -> float:
    lo = mat.gershgorin_lower()
    hi = lo + 1.0
    while mat.count_below(hi) < 1:
        hi = lo + 2.0 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mat.count_below(mid) >= 1:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-6 * max(1.0, abs(hi)):
            break
    return lo


def _residual(A, m, mu, v) -> float:
    r = A @ v - mu * m * v
    return float(np.sqrt(np.sum(r * r / m)) / np.sqrt(np.sum(m * v * v)))


def low_eigenpairs(op: LinearizedOperator, k: int = 2) -> list[tuple[float, Field]]:
    """The ``k`` smallest eigenpairs, ascending, with residual <= 1e-8 in the mass norm.

    Eigenfields are normalized to unit lumped-mass norm with their
    largest-magnitude entry positive.
    """
    if not 1 <= k <= 8:
        raise ValidationError("k must lie in 1..8")
    A, m = op.sparse
    n = A.shape[0]
    if k >= n:
        raise ValidationError("k exceeds the problem size")
    lowest = _lowest_eigenvalue(op.matrix)
    sigma = lowest - max(1e-4, 1e-4 * abs(lowest))
    M = sp.diags(m).tocsc()
    v0 = np.random.default_rng(0).standard_normal(n)
    try:
        vals, vecs = eigsh(A, k=k, M=M, sigma=sigma, which="LM", v0=v0, tol=1e-13, maxiter=20 * n)
    except Exception as exc:  # ARPACK reports non-convergence through several exception types
        raise NoConvergence(f"shift-invert eigensolver failed: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    out: list[tuple[float, np.ndarray]] = []
    lu = None
    for mu, v in zip(vals, vecs.T):
        v = v / math.sqrt(np.sum(m * v * v))
        if _residual(A, m, mu, v) > 1e-8:
            if lu is None:
                lu = splu((A - (sigma) * M).tocsc())
            for _ in range(20):
                w = lu.solve(m * v)
                for _, u in out:
                    w -= np.sum(m * u * w) * u
                v = w / math.sqrt(np.sum(m * w * w))
                mu = float(v @ (A @ v))
                if _residual(A, m, mu, v) <= 1e-9:
                    break
        res = _residual(A, m, mu, v)
        if res > 1e-8:
            raise NoConvergence(f"eigenpair residual {res:.2e} exceeds 1e-8")
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out.append((float(mu), v))
    return [(mu, op.expand(v)) for mu, v in out]


@dataclass(frozen=True)
class ZeroCount:
    per_edge: tuple[int, ...]
    total: int


def _sign_changes(x: np.ndarray) -> int:
    scale = np.max(np.abs(x)) if x.size else 0.0
    if scale == 0:
        return 0
    kept = x[np.abs(x) > 1e-12 * scale]
    return int(np.sum(np.signbit(kept[1:]) != np.signbit(kept[:-1])))


def count_zeros(v: Field, orientation=None) -> ZeroCount:
    """Sign changes along each edge and in total.

    ``orientation`` multiplies each edge before counting (pass the model's
    orientation to count in star-graph variables).  On a line domain the
    total is taken along the whole line, so a sign change across the origin
    counts; on a star it is the sum over edges.
    """
    vals = np.real(v.values)
    if orientation is not None:
        vals = vals * np.asarray(orientation, dtype=float)[:, None]
    per_edge = tuple(_sign_changes(row) for row in vals)
    if v.domain.kind == "line":
        total = _sign_changes(np.concatenate([vals[0, ::-1], vals[1]]))
    else:
        total = sum(per_edge)
    return ZeroCount(per_edge, total)


@dataclass(frozen=True, eq=False)
class SpectralReport:
    which: str
    spec: ProfileSpec
    subspace: str
    n_negative: int
    kernel_dim: int
    lowest_eigs: tuple[tuple[float, Field], ...]
    tol_zero: float
    ess_spectrum_floor: float
    h: float
    X: float

    @property
    def omega(self) -> float:
        return self.spec.omega

    @property
    def eigenvalues(self) -> list[float]:
        return [mu for mu, _ in self.lowest_eigs]

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "model": self.spec.model.kind,
            "subspace": self.subspace,
            "omega": self.spec.omega,
            "p": self.spec.p,
            "n_negative": self.n_negative,
            "kernel_dim": self.kernel_dim,
            "lowest_eigs": self.eigenvalues,
            "tol_zero": self.tol_zero,
            "h": self.h,
            "X": self.X,
        }


def spectral_report(op: LinearizedOperator, k: int = 0) -> SpectralReport:
    """Inertia and kernel counts plus, when ``k > 0``, the ``k`` lowest eigenpairs."""
    n_neg, ker = op.counts
    eigs = tuple(low_eigenpairs(op, k)) if k else ()
    return SpectralReport(op.which, op.spec, op.subspace, n_neg, ker, eigs,
                          op.tol_zero, op.spec.omega, op.dom.h, op.dom.X)
