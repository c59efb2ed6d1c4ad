"""Certificate matrices, witnesses, equilibria, and explicit bounds."""

import math

import numpy as np
import pytest
from conftest import exp_kernel, forced_lv, logistic_pair, scalar_logistic, symmetric_lv, symmetric_stage
from scipy.optimize import linprog

from fdekit.certificates import (
    _phase_one_feasible,
    build_logistic_matrix,
    build_lv_matrices,
    build_nonaut_matrices,
    find_positive_vector,
    logistic_bounds,
    logistic_certificate,
    lv_certificate,
    lv_equilibrium,
    m_matrix_check,
    nonaut_certificate,
    spectral_bound,
    stage_certificate,
    stage_delta_margins,
)
from fdekit.errors import ContractViolationError, DegenerateModelError
from fdekit.fading_memory import HistoryBuffer, InitialHistory
from fdekit.models import (
    CooperativeLVSpec,
    LogisticNetSpec,
    StageStructuredSpec,
    TimeCoefficient,
    rhs,
    same_kernel,
)


# ---------------------------------------------------------------------------
# Matrix builders
# ---------------------------------------------------------------------------


def test_build_lv_matrices():
    bundle = build_lv_matrices(symmetric_lv())
    assert np.array_equal(bundle.growth, [[1.0, 0.5], [0.5, 1.0]])
    assert np.array_equal(bundle.decay, [[2.0, -0.5], [-0.5, 2.0]])


def test_build_lv_matrices_negative_growth_rate():
    k = exp_kernel()
    spec = CooperativeLVSpec(
        beta=[-1.0], mu=[1.0], a=[[0.0]], d=[[0.0]], eta=same_kernel(k, 1), nu=same_kernel(k, 1)
    )
    bundle = build_lv_matrices(spec)
    assert bundle.growth[0, 0] == -1.0


def test_build_nonaut_matrices():
    bundle = build_nonaut_matrices(forced_lv())
    assert np.allclose(bundle.growth_lower, [[0.5, 0.5], [0.5, 0.5]])
    assert np.allclose(bundle.growth_upper, [[1.5, 0.5], [0.5, 1.5]])
    assert np.allclose(bundle.decay, [[2.0, -0.75], [-0.75, 2.0]])


def test_build_nonaut_matrices_constant_consistency():
    k = exp_kernel()
    from fdekit.models import NonautLVSpec

    spec = NonautLVSpec(
        beta=(1.0, 1.0),
        mu=(2.0, 2.0),
        a=((0.0, 0.5), (0.5, 0.0)),
        d=((0.0, 0.5), (0.5, 0.0)),
        eta=same_kernel(k, 2),
        nu=same_kernel(k, 2),
    )
    bundle = build_nonaut_matrices(spec)
    auto = build_lv_matrices(symmetric_lv())
    assert np.array_equal(bundle.growth_lower, auto.growth)
    assert np.array_equal(bundle.growth_upper, auto.growth)
    assert np.array_equal(bundle.decay, auto.decay)


def test_build_logistic_matrix():
    bundle = build_logistic_matrix(logistic_pair())
    assert np.allclose(bundle.growth, [[1.5, 0.25], [0.25, 1.5]])
    scalar = build_logistic_matrix(scalar_logistic())
    assert np.allclose(scalar.growth, [[1.5]])


def test_build_logistic_matrix_negative_diagonal():
    spec = LogisticNetSpec(
        alpha=[[1.0]], beta=[[0.0]], tau=[[0.0]], d=[[0.0]], sigma=[[0.0]], mu=[2.0], kappa=[1.0]
    )
    bundle = build_logistic_matrix(spec)
    assert bundle.growth[0, 0] == -1.0
    assert find_positive_vector(bundle.growth) is None


# ---------------------------------------------------------------------------
# Spectral bound and positive witnesses
# ---------------------------------------------------------------------------


def test_spectral_bound_examples():
    assert spectral_bound(np.diag([-1.0, -2.0])) == pytest.approx(-1.0, abs=1e-10)
    assert spectral_bound(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(1.0, abs=1e-10)
    assert spectral_bound(np.array([[-1.0, 2.0], [2.0, -1.0]])) == pytest.approx(1.0, abs=1e-10)


def test_spectral_bound_rejects_non_metzler():
    with pytest.raises(ContractViolationError):
        spectral_bound(np.array([[1.0, -0.5], [0.0, 1.0]]))


def test_find_positive_vector_examples():
    m = np.array([[1.0, 0.5], [0.5, 1.0]])
    v = find_positive_vector(m)
    assert v is not None and np.allclose(v, [1.0, 1.0])
    assert (m @ v > 0).all()

    m = np.array([[-1.0, 2.0], [2.0, -1.0]])
    v = find_positive_vector(m)
    assert v is not None and (m @ v > 0).all()

    assert find_positive_vector(np.array([[-1.0, 0.5], [0.5, -1.0]])) is None


def test_find_positive_vector_reducible_cases():
    assert find_positive_vector(np.diag([1.0, 2.0])) is not None
    assert find_positive_vector(np.diag([1.0, -2.0])) is None
    # block triangular, feasible only by weighting the second block
    m = np.array([[0.5, 0.0], [1.0, -0.2]])
    v = find_positive_vector(m)
    assert v is not None and (m @ v > 0).all()


def test_witness_normalization():
    v = find_positive_vector(np.array([[1.0, 0.5], [0.5, 2.0]]))
    assert v.min() == pytest.approx(1.0, abs=1e-12)


def test_witness_matches_spectral_sign_on_random_irreducible():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(2, 6))
        m = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j and rng.random() < 0.5:
                    m[i, j] = rng.uniform(0.0, 1.0)
            m[i, (i + 1) % n] = max(m[i, (i + 1) % n], rng.uniform(0.1, 1.0))
            m[i, i] = rng.uniform(-2.5, 0.5)
        s_true = float(np.max(np.linalg.eigvals(m).real))
        if abs(s_true) <= 1e-8:
            continue
        v = find_positive_vector(m)
        assert (v is not None) == (s_true > 0)
        if v is not None:
            assert (m @ v).min() > 0


def test_phase_one_simplex_against_linprog_oracle():
    rng = np.random.default_rng(77)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        mrows = int(rng.integers(1, 6))
        a = rng.uniform(-1.0, 1.0, (mrows, n))
        b = rng.uniform(-1.0, 1.0, mrows)
        ub = rng.uniform(0.5, 5.0, n)
        mine = _phase_one_feasible(a, b, ub)
        res = linprog(
            np.zeros(n),
            A_ub=-a,
            b_ub=-b,
            bounds=[(0.0, float(u)) for u in ub],
            method="highs",
        )
        if res.success:
            assert mine is not None, "simplex missed a feasible system"
            assert (a @ mine >= b - 1e-7).all()
            assert (mine >= -1e-12).all() and (mine <= ub + 1e-9).all()
        else:
            assert mine is None, "simplex accepted an infeasible system"


# ---------------------------------------------------------------------------
# M-matrix test
# ---------------------------------------------------------------------------


def test_m_matrix_examples():
    ok, q = m_matrix_check(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    assert ok and np.allclose(q, [1.0, 1.0])
    ok, q = m_matrix_check(np.array([[1.0, -2.0], [-2.0, 1.0]]))
    assert not ok and q is None
    ok, q = m_matrix_check(np.eye(3))
    assert ok and np.allclose(q, 1.0)


def test_m_matrix_rejects_positive_offdiagonal():
    with pytest.raises(ContractViolationError):
        m_matrix_check(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_m_matrix_matches_minors_oracle():
    rng = np.random.default_rng(4)
    for _ in range(300):
        n = int(rng.integers(2, 5))
        z = -rng.uniform(0.0, 1.0, (n, n))
        np.fill_diagonal(z, rng.uniform(-0.5, 3.0, n))
        minors = [np.linalg.det(z[: k + 1, : k + 1]) for k in range(n)]
        if min(abs(d) for d in minors) <= 1e-8:
            continue
        ok, q = m_matrix_check(z)
        assert ok == all(d > 0 for d in minors)
        if ok:
            assert (z @ q > 0).all()


# ---------------------------------------------------------------------------
# Equilibria and the LV certificate
# ---------------------------------------------------------------------------


def test_lv_equilibrium_symmetric():
    x = lv_equilibrium(symmetric_lv(), np.array([0.5, 0.5]))
    assert x is not None and np.allclose(x, 1.0, atol=1e-10)


def test_lv_equilibrium_decoupled():
    k = exp_kernel()
    spec = CooperativeLVSpec(
        beta=[1.0, 2.0],
        mu=[1.0, 4.0],
        a=np.zeros((2, 2)),
        d=np.zeros((2, 2)),
        eta=same_kernel(k, 2),
        nu=same_kernel(k, 2),
    )
    x = lv_equilibrium(spec, np.array([1.0, 1.0]))
    assert x is not None and np.allclose(x, [1.0, 0.5], atol=1e-10)


def test_lv_equilibrium_absent_for_negative_growth():
    k = exp_kernel()
    spec = CooperativeLVSpec(
        beta=[-1.0, -1.0],
        mu=[1.0, 1.0],
        a=np.zeros((2, 2)),
        d=np.zeros((2, 2)),
        eta=same_kernel(k, 2),
        nu=same_kernel(k, 2),
    )
    assert lv_equilibrium(spec, np.array([1.0, 1.0])) is None


def test_lv_equilibrium_residual_through_model_rhs():
    spec = symmetric_lv()
    x = lv_equilibrium(spec, np.array([0.5, 0.5]))
    buf = HistoryBuffer(InitialHistory.constant(x))
    res = rhs(spec, 0.0, buf, 1e-12)
    assert np.max(np.abs(res)) <= 1e-10


def test_lv_certificate_symmetric():
    cert = lv_certificate(symmetric_lv())
    assert cert.persistent and cert.permanent and cert.attractor
    assert np.allclose(cert.equilibrium, [1.0, 1.0], atol=1e-10)
    assert np.allclose(cert.growth_at_equilibrium, [1.5, 1.5], atol=1e-10)
    assert cert.spectral_bound == pytest.approx(1.5, abs=1e-9)
    assert (symmetric_lv().beta[0] - cert.witness_decay @ [0, 0]) is not None  # smoke on payload


def test_lv_certificate_negative_growth_with_dispersal():
    k = exp_kernel()
    spec = CooperativeLVSpec(
        beta=[-1.0, -1.0],
        mu=[2.0, 2.0],
        a=np.zeros((2, 2)),
        d=[[0.0, 2.0], [2.0, 0.0]],
        eta=same_kernel(k, 2),
        nu=same_kernel(k, 2),
    )
    cert = lv_certificate(spec)
    assert cert.persistent and cert.permanent
    assert cert.spectral_bound == pytest.approx(1.0, abs=1e-9)


def test_lv_certificate_uncertified():
    k = exp_kernel()
    spec = CooperativeLVSpec(
        beta=[-1.0, -1.0],
        mu=[2.0, 2.0],
        a=np.zeros((2, 2)),
        d=[[0.0, 0.5], [0.5, 0.0]],
        eta=same_kernel(k, 2),
        nu=same_kernel(k, 2),
    )
    cert = lv_certificate(spec)
    assert not cert.persistent
    assert cert.spectral_bound == pytest.approx(-0.5, abs=1e-9)


def test_every_witness_reverifies():
    cert = lv_certificate(symmetric_lv())
    m, n = cert.bundle.growth, cert.bundle.decay
    assert (m @ cert.witness_growth).min() > 0
    assert (n @ cert.witness_decay).min() > 0
    assert (m @ cert.equilibrium).min() > 0


def test_nonaut_certificate():
    cert = nonaut_certificate(forced_lv())
    assert cert.persistent and cert.permanent
    assert cert.attractor is None


# ---------------------------------------------------------------------------
# Logistic bounds
# ---------------------------------------------------------------------------


def test_logistic_bounds_scalar():
    spec = scalar_logistic()
    pair = logistic_bounds(spec, np.array([1.0]))
    assert pair.upper == pytest.approx(1.5, abs=1e-15)
    assert pair.lower == pytest.approx(2.0 / 2.5 - 0.5, abs=1e-15)


def test_logistic_bounds_pair():
    pair = logistic_bounds(logistic_pair(), np.array([1.0, 1.0]))
    assert pair.upper == pytest.approx(1.75, abs=1e-15)
    assert pair.lower == pytest.approx(2.0 / 2.75 - 0.5 + 0.25, abs=1e-15)


def test_logistic_bounds_without_saturation_collapse():
    spec = scalar_logistic(saturating=False)
    pair = logistic_bounds(spec, np.array([1.0]))
    assert pair.lower == pytest.approx(pair.upper, abs=1e-15)
    assert pair.upper == pytest.approx(1.5, abs=1e-15)


def test_logistic_bounds_bracket_sampled_ratio():
    # seasonal coefficients: interval brackets must contain the densely
    # sampled sup/inf of the true time-dependent ratios
    spec = LogisticNetSpec(
        alpha=[[TimeCoefficient(2.0, 0.5, 1.3)]],
        beta=[[TimeCoefficient(1.0, 0.2, 0.7)]],
        tau=[[1.0]],
        d=[[0.0]],
        sigma=[[0.0]],
        mu=[TimeCoefficient(0.5, 0.1, 2.1)],
        kappa=[TimeCoefficient(1.0, 0.3, 1.0)],
    )
    outer = logistic_bounds(spec, np.array([1.0]))
    refined = logistic_bounds(spec, np.array([1.0]), refine_samples=4001)
    assert refined.upper <= outer.upper + 1e-12
    assert refined.lower >= outer.lower - 1e-12
    assert refined.lower <= refined.upper


def test_logistic_scaling_consistency():
    # rescaling the state by an exact power-of-two witness and rebuilding the
    # matrix with the unit witness flips signs identically
    spec = LogisticNetSpec(
        alpha=[[2.0], [3.0]],
        beta=[[1.0], [0.5]],
        tau=[[1.0], [0.5]],
        d=[[0.0, 0.25], [0.5, 0.0]],
        sigma=[[0.0, 1.0], [1.0, 0.0]],
        mu=[0.5, 2.0],
        kappa=[1.0, 2.0],
    )
    v = np.array([1.0, 2.0])
    h = build_logistic_matrix(spec).growth
    h_scaled = build_logistic_matrix(spec.scaled(v)).growth
    assert np.array_equal(h_scaled @ np.ones(2) > 0, (h @ v) / v > 0)
    assert np.array_equal(h_scaled @ np.ones(2), (h @ v) / v)


def test_logistic_certificate_end_to_end():
    cert = logistic_certificate(scalar_logistic())
    assert cert.persistent and cert.permanent
    assert cert.bounds is not None and not cert.bounds.vacuous
    assert cert.bounds.lower == pytest.approx(0.3, abs=1e-15)
    assert cert.bounds.upper == pytest.approx(1.5, abs=1e-15)


def test_logistic_certificate_vacuous_lower_bound():
    # heavy saturation drives the explicit lower bound negative: the
    # certificate keeps the witness but flags the bound as vacuous
    spec = LogisticNetSpec(
        alpha=[[2.0]],
        beta=[[50.0]],
        tau=[[1.0]],
        d=[[0.0]],
        sigma=[[0.0]],
        mu=[1.0],
        kappa=[1.0],
    )
    cert = logistic_certificate(spec)
    assert cert.persistent
    assert cert.bounds.vacuous
    assert any("vacuous" in note for note in cert.notes)


# ---------------------------------------------------------------------------
# Stage-structured certificate
# ---------------------------------------------------------------------------


def test_stage_certificate_symmetric():
    cert = stage_certificate(symmetric_stage())
    assert cert.persistent and cert.permanent and cert.attractor
    assert np.allclose(cert.equilibrium, [0.8, 0.8], atol=1e-14)
    assert cert.delta is not None
    m1, m2 = stage_delta_margins(symmetric_stage(), cert.delta)
    assert m1 > 0 and m2 > 0
    assert (cert.first_level_lower > 0).all()
    assert (cert.first_level_lower <= cert.first_level_upper).all()


def test_stage_equilibrium_against_linear_solve_oracle():
    rng = np.random.default_rng(31)
    for _ in range(20):
        alpha = rng.uniform(1.0, 3.0, 2)
        beta = rng.uniform(0.5, 2.0, 2)
        gamma = rng.uniform(0.5, 2.0, 2)
        c = rng.uniform(0.0, 0.3, 2)
        k = exp_kernel(decay=float(rng.uniform(0.5, 2.0)))
        spec = StageStructuredSpec(alpha=alpha, beta=beta, gamma=gamma, c=c, kernels=(k, k))
        cert = stage_certificate(spec)
        kappa = spec.maturation_mass()
        a = np.array([[beta[0], c[0]], [c[1], beta[1]]])
        oracle = np.linalg.solve(a, alpha * kappa)
        if cert.equilibrium is not None:
            assert np.allclose(cert.equilibrium, oracle, atol=1e-12)


def test_stage_certificate_decoupled():
    cert = stage_certificate(symmetric_stage(c=0.0))
    assert cert.attractor
    assert np.allclose(cert.equilibrium, [1.0, 1.0], atol=1e-14)
    assert np.allclose(cert.first_level_lower, cert.first_level_upper)


def test_stage_certificate_fails_for_strong_competition():
    k = exp_kernel()
    spec = StageStructuredSpec(
        alpha=[2.0, 2.0], beta=[1.0, 1.0], gamma=[1.0, 1.0], c=[0.25, 5.0], kernels=(k, k)
    )
    cert = stage_certificate(spec)
    assert not (cert.persistent or cert.permanent or cert.attractor)
    assert cert.equilibrium is None


def test_stage_certificate_degenerate_denominator():
    k = exp_kernel()
    spec = StageStructuredSpec(
        alpha=[2.0, 2.0], beta=[1.0, 1.0], gamma=[1.0, 1.0], c=[1.0, 1.0], kernels=(k, k)
    )
    with pytest.raises(DegenerateModelError):
        stage_certificate(spec)


def test_stage_equilibrium_zero_model_residual():
    spec = symmetric_stage()
    cert = stage_certificate(spec)
    buf = HistoryBuffer(InitialHistory.constant(cert.equilibrium))
    res = rhs(spec, 0.0, buf, 1e-8)
    assert np.max(np.abs(res)) <= 5e-8


def test_certificate_json_shape():
    record = lv_certificate(symmetric_lv()).to_json()
    assert set(record) == {
        "theorem",
        "matrices",
        "witnesses",
        "spectral_bound",
        "conditions",
        "bounds",
        "flags",
        "notes",
    }
    assert record["theorem"] == "cooperative_lv"
    assert all({"name", "holds", "margin", "inconclusive"} == set(c) for c in record["conditions"])
