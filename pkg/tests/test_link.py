import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from fadenc.channel import LognormalParams, lognormal_pdf
from fadenc.errors import DomainError
from fadenc.link import (
    CorrelationMatrix,
    LinkBudget,
    PowerPolicy,
    ber_adaptive,
    ber_correlated,
    ber_fixed,
    effective_power,
    joint_lognormal_density,
    outage_threshold,
    packet_erasure,
    q2,
    q_function,
    q_inverse,
    qn,
    sample_lognormal_sum,
)

P = LognormalParams(-0.5, 1.0)


def budget_for(snr, bits=8):
    return LinkBudget(n0=1.0 / snr, rate=1.0, bits=bits, snr=snr)


def test_q_against_quadrature(frozen):
    for case in frozen["q_grid"]:
        got = q_function(case["x"])
        assert abs(got - case["value"]) <= 1e-12 * case["value"]
    assert q_function(1.2816) == pytest.approx(frozen["q"]["x_1.2816"], rel=1e-12)
    assert q_function(1.2816) == pytest.approx(0.1, abs=1e-4)


def test_q_identities():
    assert q_function(0.0) == 0.5
    assert q_function(60.0) == 0.0
    for x in (0.0, 0.5, -0.5, 3.0, -3.0):
        assert abs(q_function(x) + q_function(-x) - 1.0) <= 1e-12
    grid = np.linspace(-8, 8, 100)
    assert np.all(np.diff(q_function(grid)) < 0)


def test_q_inverse(frozen):
    assert q_inverse(0.01) == pytest.approx(frozen["q_inverse"]["p_0.01"], abs=1e-10)
    assert q_inverse(0.01) == pytest.approx(2.3263, abs=1e-4)
    assert q_inverse(0.5) == 0.0
    assert q_inverse(q_function(2.0)) == pytest.approx(2.0, abs=1e-8)
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            q_inverse(bad)


def test_ber_fixed_values(frozen):
    got = ber_fixed(1.0, budget_for(10.0), P)
    assert got == pytest.approx(frozen["q"]["ber_fixed_h1_snr10"], rel=1e-12)
    assert got == pytest.approx(0.0357, abs=1e-4)
    # h / SNR = e^m puts the argument at zero
    assert ber_fixed(math.exp(-0.5) * 10.0, budget_for(10.0), P) == pytest.approx(0.5, abs=1e-15)
    assert ber_fixed(1.0, budget_for(1e300), P) < 1e-300


def test_ber_fixed_directions():
    h = np.geomspace(0.01, 100, 50)
    snr = np.geomspace(0.1, 1e4, 50)
    lit_h = ber_fixed(h, budget_for(10.0), P)
    prod_h = ber_fixed(h, budget_for(10.0), P, orientation="product")
    assert np.all(np.diff(lit_h) > 0)  # literal form grows with h
    assert np.all(np.diff(prod_h) >= 0) and prod_h[-1] > prod_h[0]
    lit_s = [ber_fixed(1.0, budget_for(s), P) for s in snr]
    prod_s = [ber_fixed(1.0, budget_for(s), P, orientation="product") for s in snr]
    assert np.all(np.diff(lit_s) < 0)  # literal form falls with SNR
    assert np.all(np.diff(prod_s) >= 0) and prod_s[-1] > prod_s[0]
    with pytest.raises(DomainError):
        ber_fixed(1.0, budget_for(10.0), P, orientation="sideways")
    with pytest.raises(DomainError):
        ber_fixed(0.0, budget_for(10.0), P)


def test_ber_adaptive(frozen):
    pol = PowerPolicy("adaptive", pt=1.0, pt_max=10.0, p_out=0.1, h_out=0.2)
    bud = LinkBudget(n0=1.0, rate=1.0, bits=8, snr=1.0)
    assert ber_adaptive(pol, bud, P) == pytest.approx(frozen["q"]["ber_adaptive_hout0.2"], rel=1e-12)
    assert ber_adaptive(pol, bud, P) == pytest.approx(0.1336, abs=1e-4)
    pol0 = PowerPolicy("adaptive", pt=1.0, pt_max=10.0, p_out=0.1, h_out=math.exp(-0.5))
    assert ber_adaptive(pol0, bud, P) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(TypeError):
        ber_adaptive(PowerPolicy.fixed(), bud, P)


def test_ber_adaptive_channel_independent():
    pol = PowerPolicy.adaptive_for(1.0, 5.0, 0.1, P)
    bud = LinkBudget.from_snr_db(10.0)
    rng = np.random.default_rng(4)
    gains = np.exp(rng.normal(0.0, 0.5, 100))
    vals = []
    for h in gains:
        assert effective_power(h, pol) > 0
        vals.append(ber_adaptive(pol, bud, P))
    assert len(set(vals)) == 1


def test_packet_erasure(frozen):
    assert packet_erasure(1e-3, 1000) == pytest.approx(frozen["packet_erasure"]["pb1e-3_B1000"], rel=1e-12)
    assert packet_erasure(1e-3, 1000) == pytest.approx(0.6323, abs=1e-4)
    pb = ber_fixed(1.0, budget_for(10.0), P)
    assert packet_erasure(pb, 100) == pytest.approx(frozen["packet_erasure"]["fixed_h1_snr10_B100"], rel=1e-12)
    assert packet_erasure(pb, 100) == pytest.approx(0.9738, abs=2e-4)
    assert packet_erasure(0.0, 8) == 0.0
    assert packet_erasure(1.0, 8) == 1.0
    assert packet_erasure(1e-18, 8) == pytest.approx(8e-18, rel=1e-12)
    with pytest.raises(DomainError):
        packet_erasure(1.2, 8)
    with pytest.raises(DomainError):
        packet_erasure(0.1, 0)


def test_packet_erasure_monotone():
    pb = np.linspace(0.0, 0.5, 40)
    assert np.all(np.diff(packet_erasure(pb, 16)) > 0)
    bits = np.arange(1, 40)
    assert np.all(np.diff(packet_erasure(0.01, bits)) > 0)


def test_outage_threshold(frozen):
    assert outage_threshold(0.1, P) == pytest.approx(frozen["outage_threshold_p0.1"], rel=1e-10)
    # exp(-0.5 - 1.2816) = 0.16838
    assert outage_threshold(0.1, P) == pytest.approx(0.16838, abs=1e-4)
    assert outage_threshold(0.5, P) == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert outage_threshold(1e-12, P) < outage_threshold(1e-6, P) < 1e-2
    for p_out in (0.01, 0.1, 0.5):
        h = outage_threshold(p_out, P)
        assert abs(q_function((P.m - math.log(h)) / P.sigma) - p_out) <= 1e-9


def test_effective_power():
    fixed = PowerPolicy.fixed(2.0)
    assert np.all(effective_power(np.array([0.01, 1.0, 50.0]), fixed) == 2.0)
    pol = PowerPolicy.adaptive_for(1.0, 10.0, 0.1, P)
    assert effective_power(pol.h_out, pol) == 1.0
    assert effective_power(pol.cutoff_gain, pol) == pytest.approx(10.0, rel=1e-15)
    assert effective_power(pol.cutoff_gain, pol) > 0
    assert effective_power(pol.h_out / 1000, pol) == 0.0
    assert effective_power(pol.cutoff_gain * (1 - 1e-12), pol) == 0.0


def test_policy_validation():
    with pytest.raises(DomainError, match="pt_max"):
        PowerPolicy.adaptive_for(2.0, 1.0, 0.1, P)
    with pytest.raises(DomainError, match="p_out"):
        PowerPolicy.adaptive_for(1.0, 2.0, 0.0, P)
    with pytest.raises(DomainError):
        PowerPolicy("adaptive", pt=1.0, pt_max=2.0, p_out=0.1, h_out=0.5, channel=P)
    with pytest.raises(DomainError):
        PowerPolicy.fixed(0.0)
    with pytest.raises(DomainError):
        PowerPolicy("other", 1.0)


def test_link_budget():
    b = LinkBudget.from_snr_db(10.0, pt=2.0, bits=8, tp=1 / 150)
    assert b.rate == pytest.approx(1200.0)
    assert b.snr == pytest.approx(10.0)
    assert b.consistent_with(PowerPolicy.fixed(2.0))
    assert not b.consistent_with(PowerPolicy.fixed(1.0))
    with pytest.raises(DomainError):
        LinkBudget(n0=0.0, rate=1.0, bits=8, snr=1.0)
    with pytest.raises(DomainError):
        LinkBudget(n0=1.0, rate=1.0, bits=0, snr=1.0)


def test_correlation_matrix_validation():
    with pytest.raises(DomainError, match="symmetric"):
        CorrelationMatrix([[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(DomainError, match="diagonal"):
        CorrelationMatrix([[2.0, 0.2], [0.2, 1.0]])
    with pytest.raises(DomainError):
        CorrelationMatrix([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    c = CorrelationMatrix.equicorrelated(3, 0.2)
    lower = c.factor()
    assert np.allclose(lower @ lower.T, c.entries, atol=1e-14)


def test_q2_orthant(frozen):
    for case in frozen["q2_orthant"]:
        assert abs(q2(0.0, 0.0, case["rho"]) - case["closed"]) <= 1e-5
        assert q2(0.0, 0.0, case["rho"]) == pytest.approx(case["value"], abs=1e-10)
    mc = frozen["q2_orthant_mc_rho0.2"]
    assert abs(q2(0.0, 0.0, 0.2) - mc["value"]) < 3 * mc["se"]
    assert q2(0.0, 0.0, 0.0) == 0.25


def test_q2_independence_grid(frozen):
    for case in frozen["q2_rho0_grid"]:
        assert abs(q2(case["x1"], case["x2"], 0.0) - case["value"]) <= 1e-6


def test_q2_general_cases(frozen):
    for case in frozen["q2_cases"]:
        assert q2(case["x1"], case["x2"], case["rho"]) == pytest.approx(case["value"], abs=1e-9)
    with pytest.raises(DomainError):
        q2(0.0, 0.0, 1.0)


def test_qn_matches_q2(frozen):
    for k, case in enumerate(frozen["q2_cases"]):
        c = CorrelationMatrix([[1.0, case["rho"]], [case["rho"], 1.0]])
        est = qn([case["x1"], case["x2"]], c, samples=200_000, seed=k)
        assert abs(est.value - q2(case["x1"], case["x2"], case["rho"])) < 3 * est.stderr


def test_qn_trivariate(frozen):
    c = CorrelationMatrix.equicorrelated(3, 0.2)
    est = qn([0.0, 0.0, 0.0], c, samples=1_000_000, seed=3)
    ref = frozen["orthant3_rho0.2"]
    assert abs(est.value - ref["closed"]) < 3 * est.stderr
    assert abs(ref["mc"]["value"] - ref["closed"]) < 3 * ref["mc"]["se"]
    assert est.value == pytest.approx(0.1730, abs=2e-3)


def test_qn_reductions():
    est = qn([0.7], CorrelationMatrix([[1.0]]), samples=400_000, seed=1)
    assert abs(est.value - q_function(0.7)) < 3 * est.stderr
    x = [0.1, -0.3, 0.5, 0.0]
    est = qn(x, CorrelationMatrix(np.eye(4)), samples=400_000, seed=2)
    assert abs(est.value - np.prod([q_function(v) for v in x])) < 3 * est.stderr
    a = qn(x, CorrelationMatrix(np.eye(4)), samples=10_000, seed=5)
    b = qn(x, CorrelationMatrix(np.eye(4)), samples=10_000, seed=5)
    assert a == b
    with pytest.raises(DomainError):
        qn([0.0, 0.0], CorrelationMatrix(np.eye(3)))


def test_ber_correlated():
    m = math.exp(-0.5)
    assert ber_correlated([m, m], CorrelationMatrix(np.eye(2)), P) == 0.25
    assert ber_correlated([m, m], CorrelationMatrix.equicorrelated(2, 0.2), P) == pytest.approx(0.2820, abs=1e-4)
    assert ber_correlated([0.3], CorrelationMatrix([[1.0]]), P) == q_function((P.m - math.log(0.3)) / P.sigma)
    v3 = ber_correlated([m, m, m], CorrelationMatrix.equicorrelated(3, 0.2), P, samples=200_000, seed=1)
    assert v3 == pytest.approx(0.1731, abs=3e-3)


def test_joint_density(frozen):
    c1 = CorrelationMatrix([[1.0]])
    assert joint_lognormal_density([0.7], -0.5, c1, 1.0) == pytest.approx(lognormal_pdf(0.7, P), abs=1e-12)
    c0 = CorrelationMatrix(np.eye(2))
    got = joint_lognormal_density([0.7, 1.9], -0.5, c0, 1.0)
    assert got == pytest.approx(lognormal_pdf(0.7, P) * lognormal_pdf(1.9, P), abs=1e-12)
    # mass over a wide log-spaced grid
    c = CorrelationMatrix.equicorrelated(2, 0.2)
    t = np.linspace(-9.0, 9.0, 401)
    h = np.exp(-0.5 + t)
    dens = np.array([[joint_lognormal_density([a, b], -0.5, c, 1.0) * a * b for b in h] for a in h])
    mass = trapezoid(trapezoid(dens, t, axis=1), t)
    assert abs(mass - 1.0) < 1e-4
    assert abs(frozen["joint_density_mass_rho0.2"] - 1.0) < 1e-4


def test_lognormal_sum_samples():
    c = CorrelationMatrix.equicorrelated(2, 0.2)
    s = sample_lognormal_sum(200_000, -0.5, c, 1.0, seed=3)
    se = s.std(ddof=1) / math.sqrt(s.size)
    assert abs(s.mean() - 2.0) < 4 * se
    assert np.array_equal(s[:10], sample_lognormal_sum(200_000, -0.5, c, 1.0, seed=3)[:10])


@settings(max_examples=60, deadline=None)
@given(x1=st.floats(-4, 4), x2=st.floats(-4, 4), rho=st.floats(-0.95, 0.95))
def test_q2_bounds_property(x1, x2, rho):
    v = q2(x1, x2, rho)
    assert 0.0 <= v <= min(q_function(x1), q_function(x2)) + 1e-12
    assert v == pytest.approx(q2(x2, x1, rho), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(p_out=st.floats(1e-6, 1 - 1e-6), m=st.floats(-2, 2), sigma=st.floats(0.1, 3))
def test_outage_round_trip_property(p_out, m, sigma):
    p = LognormalParams(m, sigma)
    h = outage_threshold(p_out, p)
    assert abs(q_function((m - math.log(h)) / sigma) - p_out) <= 1e-9
