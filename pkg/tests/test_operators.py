import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import domain_for
from oracles import dense_generalized_eigs, quad_norm
from pointnls.domain import DiscreteDomain, Field, l2_inner
from pointnls.errors import IncompatibleSubspace, ValidationError
from pointnls.operators import (assemble, count_zeros, inertia_negative, kernel_dim,
                                low_eigenpairs, quadratic_form, spectral_report, tol_zero_for)
from pointnls.profiles import (GRAPH_DELTA, GRAPH_DELTA_PRIME, LINE_DELTA, LINE_DELTA_PRIME,
                               LINE_DELTA_REPULSIVE, InteractionModel, eval_profile,
                               make_profile, sample)


def spec_of(kind, s, omega, p=3, N=2, variant=None, m=0):
    return make_profile(InteractionModel(kind, s, N), omega, p, variant, m)


def op_of(which, spec, h=0.01, sub="full", X=None):
    return assemble(which, spec, domain_for(spec, h, X), sub)


# ---------------------------------------------------------------- structure

@pytest.mark.parametrize("spec", [
    spec_of(LINE_DELTA, 1.0, 1.0),
    spec_of(LINE_DELTA_PRIME, 2.0, 3.0),
    spec_of(GRAPH_DELTA, -1.0, 2.0, N=3),
    spec_of(GRAPH_DELTA_PRIME, -3.0, 5.0, N=4),
])
def test_symmetry_and_interior_stencil(spec):
    op = op_of("L1", spec, h=0.1)
    A, m = op.sparse
    A = A.toarray()
    assert np.max(np.abs(A - A.T)) <= 1e-12 * np.max(np.abs(A))
    h = op.dom.h
    nv = op.matrix.n_vertex
    # a row deep inside edge 0: -1/h, 2/h + h V, -1/h  (i.e. mass h times the 3-point stencil)
    k = nv + 10
    V = op.matrix.branches[0].diag[10] / h - 2 / h ** 2
    s = op.dom.s[11]
    expected_V = spec.omega - spec.p * abs(eval_profile(spec, 0, s)) ** (spec.p - 1)
    assert V == pytest.approx(expected_V, rel=1e-10, abs=1e-10)
    assert A[k, k - 1] == pytest.approx(-1 / h) and A[k, k + 1] == pytest.approx(-1 / h)
    assert m[k] == pytest.approx(h)


def test_count_below_matches_dense_oracle():
    cases = [
        spec_of(LINE_DELTA, -1.0, 1.0),
        spec_of(LINE_DELTA_PRIME, 2.0, 3.0),
        spec_of(GRAPH_DELTA, -1.0, 2.0, N=3),
        spec_of(GRAPH_DELTA_PRIME, -3.0, 6.0, N=3),
        spec_of(GRAPH_DELTA_PRIME, -3.0, 5.0, N=4),
    ]
    for spec in cases:
        dom = DiscreteDomain.build(spec.model.domain_kind, spec.model.n_edges, 20.0, 0.1)
        for sub in ("full",) + (("edgewise_even",) if spec.model.n_edges == 4 else ()):
            op = assemble("L1", spec, dom, sub)
            A, m = op.sparse
            eigs = dense_generalized_eigs(A, m)
            for sigma in (-5.0, -1.0, -0.1, 0.5, 2.0):
                assert op.matrix.count_below(sigma) == int(np.sum(eigs < sigma))


def test_tol_zero():
    assert tol_zero_for(0.01, 1.0) == pytest.approx(0.01)
    assert tol_zero_for(1e-5, 0.0) == 1e-8


# ---------------------------------------------------------------- counts

@pytest.mark.parametrize("spec, n", [
    (spec_of(LINE_DELTA, 1.0, 1.0), 1),
    (spec_of(LINE_DELTA, -1.0, 1.0), 2),
    (spec_of(LINE_DELTA_PRIME, 2.0, 1.5), 1),
    (spec_of(LINE_DELTA_PRIME, 2.0, 3.0), 2),
    (spec_of(GRAPH_DELTA, -1.0, 2.0, N=3), 1),
    (spec_of(GRAPH_DELTA_PRIME, -2.0, 3.0, N=3), 1),
    (spec_of(GRAPH_DELTA_PRIME, -2.0, 6.0, N=3), 3),
    (spec_of(GRAPH_DELTA, -1.0, 2.0, N=3, variant="bump", m=1), 2),
])
def test_negative_counts(spec, n):
    op = op_of("L1", spec)
    assert inertia_negative(op) == n
    assert kernel_dim(op) == 0


@pytest.mark.parametrize("spec", [
    spec_of(LINE_DELTA, 1.0, 1.0),
    spec_of(LINE_DELTA, -1.0, 1.0),
    spec_of(LINE_DELTA_PRIME, 2.0, 3.0),
    spec_of(LINE_DELTA_PRIME, 2.0, 3.0, variant="asymmetric"),
    spec_of(GRAPH_DELTA, -1.0, 2.0, N=3),
    spec_of(GRAPH_DELTA_PRIME, -3.0, 5.0, N=4),
])
def test_L2_nonnegative_with_profile_kernel(spec):
    op = op_of("L2", spec)
    assert (inertia_negative(op), kernel_dim(op)) == (0, 1)
    (mu, v), = low_eigenpairs(op, 1)
    assert abs(mu) <= op.tol_zero
    phi = sample(spec, op.dom)
    corr = abs(l2_inner(v, phi)) / math.sqrt(l2_inner(v, v) * l2_inner(phi, phi))
    assert corr >= 1 - 1e-6


def test_repulsive_operators_positive():
    spec = spec_of(LINE_DELTA_REPULSIVE, 2.0, 0.5)
    L1, L2 = op_of("L1", spec), op_of("L2", spec)
    assert (inertia_negative(L1), kernel_dim(L1)) == (0, 0)
    # L2 still annihilates the profile itself
    assert (inertia_negative(L2), kernel_dim(L2)) == (0, 1)


def test_graph_delta_prime_threshold_kernel():
    spec = spec_of(GRAPH_DELTA_PRIME, -2.0, 4.5, N=3)
    op = op_of("L1", spec)
    assert kernel_dim(op) == 2
    assert inertia_negative(op) == 1


def test_odd_sector_count():
    spec = spec_of(LINE_DELTA_PRIME, 2.0, 3.0)
    assert inertia_negative(op_of("L1", spec, sub="odd_sector")) == 1
    assert inertia_negative(op_of("L1", spec, sub="even_sector")) == 1


def test_poschl_teller_eigenvalues():
    spec = spec_of(LINE_DELTA, 0.0, 1.0)
    op = op_of("L1", spec)
    (m0, v0), (m1, v1) = low_eigenpairs(op, 2)
    assert m0 == pytest.approx(-3.0, abs=5e-3)
    assert m1 == pytest.approx(0.0, abs=5e-3)
    # translation mode is odd, ground state even
    assert count_zeros(v0).total == 0 and count_zeros(v1).total == 1


def test_ground_state_symmetric_across_edges():
    spec = spec_of(GRAPH_DELTA, -1.0, 2.0, N=3)
    op = op_of("L1", spec)
    (mu, v), = low_eigenpairs(op, 1)
    assert mu < -op.tol_zero
    vals = np.asarray(v.values)
    for perm in ([1, 2, 0], [0, 2, 1]):
        np.testing.assert_allclose(vals[perm], vals, atol=1e-8)


def test_eigenpair_residual_and_normalization():
    spec = spec_of(GRAPH_DELTA_PRIME, -3.0, 5.0, N=4)
    op = op_of("L1", spec)
    A, m = op.sparse
    for mu, v in low_eigenpairs(op, 4):
        x = op.restrict(v)
        r = A @ x - mu * m * x
        assert math.sqrt(np.sum(r * r / m)) <= 1e-8 * math.sqrt(np.sum(m * x * x))
        assert np.sum(m * x * x) == pytest.approx(1.0)
        assert x[np.argmax(np.abs(x))] > 0
    with pytest.raises(ValidationError):
        low_eigenpairs(op, 9)


def test_edgewise_even_negative_subspace():
    spec = spec_of(GRAPH_DELTA_PRIME, -3.0, 5.0, N=4)
    op = op_of("L1", spec, sub="edgewise_even")
    assert (inertia_negative(op), kernel_dim(op)) == (2, 0)
    pairs = low_eigenpairs(op, 2)
    phi = sample(spec, op.dom)
    psi = Field(phi.values * np.array([1, 1, -1, -1.0])[:, None], op.dom)
    for f in (phi, psi):
        c = [l2_inner(f, v) for _, v in pairs]
        # share of the field inside the negative subspace
        assert math.sqrt(sum(x * x for x in c) / l2_inner(f, f)) >= 0.95
    full = op_of("L1", spec)
    assert (inertia_negative(full), kernel_dim(full)) == (4, 0)


def test_incompatible_subspaces():
    with pytest.raises(IncompatibleSubspace):
        op_of("L1", spec_of(GRAPH_DELTA_PRIME, -3.0, 5.0, N=3), sub="edgewise_even")
    with pytest.raises(IncompatibleSubspace):
        op_of("L1", spec_of(GRAPH_DELTA, -1.0, 2.0, N=4), sub="edgewise_even")
    with pytest.raises(IncompatibleSubspace):
        op_of("L1", spec_of(GRAPH_DELTA, -1.0, 2.0, N=3), sub="odd_sector")
    with pytest.raises(IncompatibleSubspace):
        op_of("L1", spec_of(LINE_DELTA_PRIME, 2.0, 3.0, variant="asymmetric"), sub="odd_sector")
    with pytest.raises(ValidationError):
        op_of("L3", spec_of(LINE_DELTA, 1.0, 1.0))


def test_mesh_robustness():
    spec = spec_of(GRAPH_DELTA_PRIME, -2.0, 6.0, N=3)
    base = op_of("L1", spec).counts
    assert op_of("L1", spec, h=0.005).counts == base
    assert op_of("L1", spec, X=1.5 * domain_for(spec).X).counts == base


# ---------------------------------------------------------------- zero counts

def test_count_zeros_examples():
    spec = spec_of(LINE_DELTA, 1.0, 1.0)
    dom = domain_for(spec)
    assert count_zeros(sample(spec, dom)).total == 0
    soliton = spec_of(LINE_DELTA, 0.0, 1.0)
    # d/dx = -d/ds on edge 0: build the line derivative from the outward one
    d = sample(soliton, dom, 1).values * np.array([-1.0, 1.0])[:, None]
    assert count_zeros(Field(d, dom)).total == 1
    odd = spec_of(LINE_DELTA_PRIME, 2.0, 4.0)
    assert count_zeros(sample(odd, domain_for(odd))).total == 1


def test_count_zeros_tiny_node_counts_once():
    dom = DiscreteDomain.star(2, 0.5, 0.1)
    vals = np.array([[1, 1, 1, 1, 1], [1, 1e-14, -1, -1, 1]], dtype=float)
    zc = count_zeros(Field(vals, dom))
    assert zc.per_edge == (0, 2) and zc.total == 2


@pytest.mark.parametrize("spec", [
    spec_of(LINE_DELTA, 1.0, 1.0),
    spec_of(LINE_DELTA, -1.0, 1.0),
    spec_of(LINE_DELTA_PRIME, 2.0, 1.5),
    spec_of(LINE_DELTA_PRIME, 2.0, 3.0),
    spec_of(LINE_DELTA_REPULSIVE, 2.0, 0.5),
])
def test_oscillation_ordering(spec):
    # counted in star-graph variables so that the delta' sign flip is undone
    op = op_of("L1", spec)
    pairs = low_eigenpairs(op, 3)
    z = [count_zeros(v, spec.model.orientation).total for _, v in pairs]
    assert z == sorted(z) and len(set(z)) == 3


# ---------------------------------------------------------------- quadratic form

@pytest.mark.parametrize("spec", [
    spec_of(LINE_DELTA, 1.0, 1.0),
    spec_of(LINE_DELTA_PRIME, 2.0, 3.0),
    spec_of(GRAPH_DELTA, -1.0, 2.0, N=3),
    spec_of(GRAPH_DELTA_PRIME, -3.0, 5.0, N=3),
])
def test_rayleigh_at_profile(spec):
    op = op_of("L1", spec, h=5e-4)
    phi = sample(spec, op.dom)
    p = spec.p
    exact = -(p - 1) * quad_norm(lambda j, s: abs(eval_profile(spec, j, s)) ** (p + 1),
                                 spec.model.n_edges)
    assert quadratic_form(op, phi) == pytest.approx(exact, rel=1e-6)
    assert quadratic_form(op, phi) < 0


def test_spectral_report_dict():
    spec = spec_of(LINE_DELTA, 1.0, 1.0)
    rep = spectral_report(op_of("L1", spec), k=2)
    d = rep.to_dict()
    for key in ("which", "model", "omega", "p", "n_negative", "kernel_dim", "lowest_eigs",
                "tol_zero", "h", "X"):
        assert key in d
    assert d["n_negative"] == 1 and len(d["lowest_eigs"]) == 2
    assert rep.ess_spectrum_floor == spec.omega
    assert rep.eigenvalues == sorted(rep.eigenvalues)


# ---------------------------------------------------------------- inertia bounds

@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(1.05, 6.0), st.floats(1.5, 6.0))
def test_bound_line_delta(gamma, wfac, p):
    spec = spec_of(LINE_DELTA, gamma, gamma * gamma / 4 * wfac + 0.05, p)
    assert inertia_negative(op_of("L1", spec, h=0.05)) <= 1


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(1.05, 6.0), st.floats(1.5, 6.0))
def test_bound_line_delta_prime(beta, wfac, p):
    spec = spec_of(LINE_DELTA_PRIME, beta, 4 / beta ** 2 * wfac, p)
    assert inertia_negative(op_of("L1", spec, h=0.05)) <= 2


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.floats(-2.0, -0.2), st.floats(1.05, 6.0), st.floats(1.5, 6.0))
def test_bound_graph_delta(N, alpha, wfac, p):
    spec = spec_of(GRAPH_DELTA, alpha, alpha * alpha / N ** 2 * wfac + 0.05, p, N)
    assert inertia_negative(op_of("L1", spec, h=0.05)) <= 1


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.floats(-4.0, -1.0), st.floats(1.05, 6.0), st.floats(1.5, 6.0))
def test_bound_graph_delta_prime(N, lam, wfac, p):
    spec = spec_of(GRAPH_DELTA_PRIME, lam, N * N / lam ** 2 * wfac, p, N)
    assert inertia_negative(op_of("L1", spec, h=0.05)) <= N
