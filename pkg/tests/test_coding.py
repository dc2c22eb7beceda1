import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fadenc.coding import (
    CodedConfig,
    DofDistribution,
    energy_coded,
    expected_time_coded,
    optimize_energy,
    optimize_ni,
    round_success_distribution,
)
from fadenc.delay import ErasureProfile
from fadenc.errors import ConvergenceError, DomainError
from fadenc.link import LinkBudget, PowerPolicy
from fadenc.mcsim import SimConfig, run_episodes

TP = 1.0 / 150


def const(pe, n=4):
    return ErasureProfile.constant(pe, n)


def test_config_validation():
    with pytest.raises(DomainError):
        CodedConfig(0, 1, TP)
    with pytest.raises(DomainError):
        CodedConfig(2, 0, TP)
    with pytest.raises(DomainError):
        CodedConfig(2, 3, TP, ni_max=2)
    with pytest.raises(DomainError):
        CodedConfig(2, 3, 0.0)
    cfg = CodedConfig(3, 2, TP)
    assert cfg.ni_max == 3 and cfg.round_slots == 3


def test_dof_distribution_validation():
    with pytest.raises(DomainError):
        DofDistribution(np.array([0.5, 0.6]))
    with pytest.raises(DomainError):
        DofDistribution(np.array([1.1, -0.1]))


def test_round_distribution_examples(frozen):
    d = round_success_distribution([0.2, 0.5], 2)
    assert np.allclose(d.probs, [0.40, 0.50, 0.10], atol=1e-15)
    by_success = frozen["round_distribution_0.2_0.5"]
    assert np.abs(d.probs - by_success[::-1]).max() <= 1e-12
    assert list(round_success_distribution([0.0] * 3, 2).probs) == [1.0, 0.0, 0.0]
    assert list(round_success_distribution([1.0] * 3, 2).probs) == [0.0, 0.0, 1.0]
    assert list(round_success_distribution([], 2).probs) == [0.0, 0.0, 1.0]
    with pytest.raises(DomainError):
        round_success_distribution([0.5], 0)
    with pytest.raises(DomainError):
        round_success_distribution([1.5], 1)


@pytest.mark.parametrize("ni", range(1, 13))
def test_round_distribution_against_enumeration(ni):
    rng = np.random.default_rng(100 + ni)
    pe = rng.uniform(0, 1, ni)
    for i in sorted({1, max(1, ni // 2), ni}):
        got = round_success_distribution(pe, i).probs
        ref = oracles.round_distribution_enum(list(pe), i)[::-1]
        assert np.abs(got - ref).max() <= 1e-12


def test_perfect_channel_timing():
    assert expected_time_coded(const(0.0), CodedConfig(4, 4, TP)) == pytest.approx(5 * TP, abs=1e-15)
    assert expected_time_coded(const(0.0), CodedConfig(2, 1, 1.0)) == 4.0


def test_ack_accounting_fixed_schedules():
    # with no erasures each round clears min(ni, dof) and costs ni + 1 slots
    for sched in ([0, 1, 1, 1], [0, 2, 3, 3], [0, 1, 2, 5], [0, 4, 1, 2]):
        dof, slots = 3, 0
        while dof:
            slots += sched[dof] + 1
            dof -= min(sched[dof], dof)
        got = expected_time_coded(const(0.0), CodedConfig(3, 1, 1.0, ni_max=5), schedule=sched)
        assert got == slots


def test_round_tree_example(frozen):
    ref = frozen["coded_round_tree_pe0.5_N2_ni3"]
    assert ref["cut_mass"] < 1e-9
    got = expected_time_coded(const(0.5), CodedConfig(2, 3, 1.0))
    assert abs(got - ref["value"]) <= 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_time_varying_profile_against_round_tree(seed):
    rng = np.random.default_rng(seed)
    pe = list(rng.uniform(0.0, 0.6, int(rng.integers(1, 7))))
    tail = float(rng.uniform(0.05, 0.4))
    n_data = int(rng.integers(1, 4))
    sched = [0] + [int(v) for v in rng.integers(1, 4, n_data)]
    value, cut = oracles.coded_round_tree(pe, tail, n_data, sched, 1.0, depth_rounds=60)
    assert cut < 1e-10
    got = expected_time_coded(ErasureProfile(np.array(pe), tail), CodedConfig(n_data, 1, 1.0, ni_max=3), schedule=sched)
    assert abs(got - value) <= 1e-8


@pytest.mark.parametrize("pe", [0.1, 0.5, 0.9])
def test_constant_profile_against_level_oracle(pe):
    sched = [0, 3, 2, 4]
    ref = oracles.coded_time_constant(pe, 3, sched, TP)[3]
    got = expected_time_coded(const(pe), CodedConfig(3, 1, TP, ni_max=4), schedule=sched)
    assert got == pytest.approx(ref, rel=1e-12)


def test_stall_raises():
    with pytest.raises(ConvergenceError):
        expected_time_coded(ErasureProfile(np.array([0.2]), np.nextafter(1.0, 0.0)), CodedConfig(1, 1, 1.0))
    with pytest.raises(DomainError):
        expected_time_coded(const(0.2), CodedConfig(3, 1, TP), schedule=[0, 1])


def test_energy_examples():
    assert energy_coded(const(0.0), CodedConfig(4, 4, TP), 2.5) == pytest.approx(2.5 * 4 * TP, abs=1e-15)
    assert energy_coded(const(0.5), CodedConfig(1, 1, 1.0), 1.0) == pytest.approx(2.0, abs=1e-9)
    e1 = energy_coded(const(0.3), CodedConfig(3, 4, TP), 1.0)
    e2 = energy_coded(const(0.3), CodedConfig(3, 4, TP), 2.0)
    assert e2 == 2 * e1
    with pytest.raises(DomainError):
        energy_coded(const(0.3), CodedConfig(3, 4, TP), -1.0)


@pytest.mark.parametrize("pe", [0.0, 0.1, 0.5, 0.8])
def test_energy_time_consistency(pe):
    sched = [0, 2, 3, 3]
    cfg = CodedConfig(3, 1, TP, ni_max=3)
    t = expected_time_coded(const(pe), cfg, schedule=sched)
    e = energy_coded(const(pe), cfg, 1.7, schedule=sched)
    rounds = oracles.coded_cost_constant(pe, 3, sched, lambda i, ni: 1.0)[3]
    assert abs(e - 1.7 * (t / TP - rounds) * TP) <= 1e-9
    ref = oracles.coded_cost_constant(pe, 3, sched, lambda i, ni: 1.7 * ni * TP)[3]
    assert e == pytest.approx(ref, rel=1e-12)


def test_energy_skips_silent_slots():
    # relative power 0 marks outage slots: they take time but no energy
    prof = ErasureProfile(np.array([1.0, 0.0, 0.0]), 0.0, power=np.array([0.0, 1.0, 1.0]))
    cfg = CodedConfig(1, 1, 1.0)
    assert expected_time_coded(prof, cfg) == 4.0
    assert energy_coded(prof, cfg, 1.0) == 1.0


def test_optimize_perfect_channel():
    plan = optimize_ni(const(0.0), 4, TP, 8)
    assert list(plan.ni_star[1:]) == [1, 2, 3, 4]
    assert plan.expected_seconds == pytest.approx(5 * TP, abs=1e-15)
    ni_star, seconds = plan
    assert seconds == plan.expected_seconds


def test_optimize_degenerate_search():
    prof = ErasureProfile(np.array([0.3, 0.7, 0.1]), 0.4)
    plan = optimize_ni(prof, 1, TP, 1)
    assert plan.ni_star[1] == 1
    assert plan.expected_seconds == pytest.approx(expected_time_coded(prof, CodedConfig(1, 1, TP)), rel=1e-15)


def test_optimize_pe09_example(frozen):
    ref = frozen["coded_pe0.9_nimax2"]
    plan = optimize_ni(const(0.9), 1, 1.0, 2)
    a = expected_time_coded(const(0.9), CodedConfig(1, 1, 1.0, ni_max=2))
    b = expected_time_coded(const(0.9), CodedConfig(1, 2, 1.0))
    assert plan.ni_star[1] == (1 if a <= b else 2) == ref["ni"]
    assert plan.expected_seconds == pytest.approx(min(a, b), rel=1e-12)
    assert plan.expected_seconds == pytest.approx(ref["value"], rel=1e-12)


@pytest.mark.parametrize("pe,n_data,ni_max", [(0.1, 2, 4), (0.5, 2, 5), (0.5, 3, 3), (0.8, 3, 4), (0.3, 4, 4), (0.65, 1, 16)])
def test_optimize_ni_brute_force(pe, n_data, ni_max):
    t_ref, sched = oracles.brute_force_schedule(pe, n_data, TP, ni_max)
    plan = optimize_ni(const(pe), n_data, TP, ni_max)
    assert list(plan.ni_star[1:]) == sched[1:]
    assert plan.expected_seconds == pytest.approx(t_ref, rel=1e-12)


@pytest.mark.parametrize("pe", [0.1, 0.4, 0.7])
def test_optimizer_beats_pinned_schedule(pe):
    rng = np.random.default_rng(int(pe * 10))
    prof = ErasureProfile(rng.uniform(0, pe, 20), pe)
    plan = optimize_ni(prof, 4, TP, 8)
    pinned = expected_time_coded(prof, CodedConfig(4, 1, TP, ni_max=4), schedule=[0, 1, 2, 3, 4])
    assert plan.expected_seconds <= pinned * (1 + 1e-12)


def _flat_pe(table):
    return lambda p: table[p]


@pytest.mark.parametrize(
    "table,n_data,ni_max",
    [
        ({1.0: 0.6, 2.0: 0.15}, 1, 2),
        ({1.0: 0.6, 2.0: 0.15}, 2, 3),
        ({0.5: 0.9, 1.0: 0.5, 3.0: 0.05}, 2, 4),
        ({1.0: 0.3, 4.0: 0.01}, 3, 4),
        ({1.0: 0.45, 1.5: 0.2, 2.0: 0.1, 4.0: 0.02}, 2, 4),
    ],
)
def test_optimize_energy_brute_force(table, n_data, ni_max):
    pe_of = _flat_pe(table)
    ref, choice = oracles.brute_force_energy(pe_of, n_data, TP, list(table), ni_max)
    plan = optimize_energy(lambda p: const(pe_of(p)), n_data, TP, list(table), ni_max)
    assert plan.expected_joules == pytest.approx(ref, rel=1e-12)
    for i in range(1, n_data + 1):
        assert (plan.power[i], plan.ni_star[i]) == choice[i]


def test_optimize_energy_properties():
    flat = {1.0: const(0.3), 2.0: const(0.3), 5.0: const(0.3)}
    plan = optimize_energy(flat, 3, TP, [5.0, 1.0, 2.0], 4)
    assert np.all(plan.power[1:] == 1.0)
    single = optimize_energy(lambda p: const(0.4), 3, TP, [2.0], 4)
    assert np.all(single.power[1:] == 2.0)
    with pytest.raises(DomainError):
        optimize_energy(flat, 3, TP, [], 4)
    with pytest.raises(DomainError):
        optimize_energy(flat, 3, TP, [0.0], 4)


def test_plan_csv():
    text = optimize_ni(const(0.3), 3, TP, 5).to_csv()
    lines = text.splitlines()
    assert lines[0] == "dof,ni_star,power,expected_seconds,expected_joules"
    assert len(lines) == 4


@pytest.mark.slow
@pytest.mark.parametrize("pe", [0.1, 0.5])
@pytest.mark.parametrize("n_data", [1, 2, 4])
def test_against_monte_carlo(pe, n_data):
    ni = n_data + 1
    analytic = expected_time_coded(const(pe), CodedConfig(n_data, ni, TP))
    cfg = SimConfig(n_data=n_data, policy=PowerPolicy.fixed(), budget=LinkBudget.from_snr_db(10.0),
                    scheme="coded", ni=ni, episodes=100_000, seed=3, erasure=pe)
    times = np.array([r.delivery_time for r in run_episodes(cfg)])
    se = times.std(ddof=1) / math.sqrt(times.size)
    assert abs(times.mean() - analytic) < 3 * se


@settings(max_examples=40, deadline=None)
@given(pe=st.lists(st.floats(0.0, 1.0), min_size=0, max_size=10), i=st.integers(1, 6))
def test_round_distribution_property(pe, i):
    d = round_success_distribution(pe, i).probs
    assert d.size == i + 1
    assert abs(d.sum() - 1.0) <= 1e-12
    assert np.all(d >= 0)
    # remaining dof can never be below i minus the number of slots
    assert np.all(d[: max(0, i - len(pe))] == 0.0)
