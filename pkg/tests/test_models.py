"""Model right-hand sides, coefficient families, and the order probe."""

import math

import numpy as np
import pytest
from conftest import exp_kernel, forced_lv, scalar_logistic, symmetric_lv, symmetric_stage

from fdekit.fading_memory import HistoryBuffer, InitialHistory
from fdekit.models import (
    CooperativeLVSpec,
    DelayFunction,
    LogisticNetSpec,
    StageStructuredSpec,
    TimeCoefficient,
    coefficient_bounds,
    quasimonotone_probe,
    rhs,
    rhs_parts,
    same_kernel,
)


def const_buffer(values):
    return HistoryBuffer(InitialHistory.constant(values))


# ---------------------------------------------------------------------------
# Coefficients and delays
# ---------------------------------------------------------------------------


def test_coefficient_bounds_families():
    assert coefficient_bounds(TimeCoefficient.constant(2.0)) == (2.0, 2.0)
    assert coefficient_bounds(TimeCoefficient(1.0, 0.5, 1.0)) == (0.5, 1.5)
    assert coefficient_bounds(TimeCoefficient(3.0, 0.0, 1.0)) == (3.0, 3.0)


def test_coefficient_bounds_bracket_sampled_values():
    rng = np.random.default_rng(3)
    ts = np.linspace(0.0, 1e3, 10_000)
    for _ in range(10):
        c = TimeCoefficient(
            c0=rng.uniform(0.5, 3.0),
            c1=rng.uniform(0.0, 0.5),
            omega=rng.uniform(0.1, 4.0),
            theta=rng.uniform(0.0, 2 * math.pi),
        )
        lo, hi = c.bounds()
        vals = np.array([c.value(t) for t in ts])
        assert lo - 1e-12 <= vals.min() and vals.max() <= hi + 1e-12


def test_delay_families():
    assert DelayFunction.constant(2.0).value(10.0) == 2.0
    d = DelayFunction.sinusoid(1.0, 0.5, 2.0)
    assert d.value(0.0) == 1.0
    assert d.escaping
    p = DelayFunction.proportional(0.5)
    assert p.value(8.0) == 4.0
    with pytest.raises(ValueError):
        DelayFunction.proportional(1.0)
    with pytest.raises(ValueError):
        DelayFunction.sinusoid(0.5, 1.0, 1.0)


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------


def test_lv_rhs_vanishes_at_equilibrium():
    res = rhs(symmetric_lv(), 0.0, const_buffer([1.0, 1.0]))
    assert np.max(np.abs(res)) <= 1e-8


def test_stage_rhs_value():
    # alpha*kappa*1 - beta*1 - c*1 = 1 - 1 - 0.25
    res = rhs(symmetric_stage(), 0.0, const_buffer([1.0, 1.0]))
    assert res == pytest.approx([-0.25, -0.25], abs=1e-8)


def test_logistic_rhs_value():
    # 2*1/(1+1) - 0.5 - 1 = -0.5
    res = rhs(scalar_logistic(), 0.0, const_buffer([1.0]))
    assert res[0] == pytest.approx(-0.5, abs=1e-10)


def test_lv_rhs_matches_instantaneous_reduction_on_constants():
    # constant histories factor every normalized kernel out, leaving the
    # delay-free system as an oracle
    spec = symmetric_lv()
    rng = np.random.default_rng(11)
    for _ in range(10):
        x = rng.uniform(0.1, 3.0, size=2)
        expected = x * (spec.beta - spec.mu * x + spec.a @ x) + spec.d @ x
        got = rhs(spec, 0.0, const_buffer(x))
        assert got == pytest.approx(expected, abs=5e-8)


def test_lv_gain_part_is_additive():
    spec = symmetric_lv()
    rng = np.random.default_rng(5)
    x = rng.uniform(0.1, 2.0, size=2)
    y = rng.uniform(0.1, 2.0, size=2)
    g_x, _, _ = rhs_parts(spec, 0.0, const_buffer(x), 1e-12)
    g_y, _, _ = rhs_parts(spec, 0.0, const_buffer(y), 1e-12)
    g_xy, _, _ = rhs_parts(spec, 0.0, const_buffer(x + y), 1e-12)
    assert g_xy == pytest.approx(g_x + g_y, abs=1e-10)


def test_stage_gain_nonnegative_on_nonnegative_histories():
    spec = symmetric_stage()
    rng = np.random.default_rng(9)
    for _ in range(20):
        x = rng.uniform(0.0, 3.0, size=2) + 1e-9
        gain, _, _ = rhs_parts(spec, 0.0, const_buffer(x))
        assert (gain >= 0.0).all()


def test_nonaut_rhs_uses_time_dependent_coefficients():
    spec = forced_lv()
    buf = const_buffer([1.0, 1.0])
    r0 = rhs(spec, 0.0, buf)
    r_quarter = rhs(spec, math.pi / 2.0, buf)
    # beta(t) = 1 + 0.5 sin t and a(t) = 0.5 + 0.25 sin t both peak at pi/2
    assert (r_quarter > r0).all()


def test_spec_validation():
    k = exp_kernel()
    with pytest.raises(ValueError):
        CooperativeLVSpec(
            beta=[1.0],
            mu=[1.0],
            a=[[-0.1]],
            d=[[0.0]],
            eta=same_kernel(k, 1),
            nu=same_kernel(k, 1),
        )
    with pytest.raises(ValueError):
        StageStructuredSpec(
            alpha=[2.0, 2.0],
            beta=[1.0, 1.0],
            gamma=[1.0, 1.0],
            c=[0.25, 0.25],
            kernels=(exp_kernel(damping=0.5), exp_kernel()),
        )
    with pytest.raises(ValueError):
        LogisticNetSpec(
            alpha=[[1.0]],
            beta=[[0.0]],
            tau=[[0.0]],
            d=[[0.0]],
            sigma=[[0.0]],
            mu=[0.5],
            kappa=[0.0],  # quadratic loss must have a positive floor
        )


# ---------------------------------------------------------------------------
# Order-preservation probe
# ---------------------------------------------------------------------------


def test_probe_passes_on_cooperative_lv():
    report = quasimonotone_probe(symmetric_lv(), n_pairs=500, seed=42)
    assert report.passed


def test_probe_finds_witness_on_stage_competition():
    report = quasimonotone_probe(symmetric_stage(), n_pairs=500, seed=42)
    assert not report.passed
    assert report.witness is not None
    assert report.witness["gap"] > 1e-10


def test_probe_witness_matches_explicit_pair():
    # raising only the competitor makes the first component's derivative drop
    spec = symmetric_stage()
    low = const_buffer([1.0, 1.0])
    high = const_buffer([1.0, 2.0])
    f_low = rhs(spec, 0.0, low, 1e-12)[0]
    f_high = rhs(spec, 0.0, high, 1e-12)[0]
    assert f_low > f_high + 1e-10


def test_probe_equal_pairs_trivially_pass():
    for spec in (symmetric_lv(), symmetric_stage()):
        report = quasimonotone_probe(spec, n_pairs=25, seed=1, bump_scale=0.0)
        assert report.passed


def test_probe_passes_on_forced_lv():
    report = quasimonotone_probe(forced_lv(), n_pairs=200, seed=3)
    assert report.passed
