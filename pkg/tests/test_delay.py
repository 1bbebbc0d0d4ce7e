import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetvfc.delay import (
    InfeasibleDecision,
    OffloadDecision,
    average_tpd,
    computing_delay,
    delay_matrices,
    transmission_delay,
)
from hetvfc.phy import RateTable
from hetvfc.scenario import SlotScenario


def test_computing_delay_cases():
    assert computing_delay(0.0, 3.2e6, 200, 0.0, 2e9) == 0.0
    assert computing_delay(0.5, 3.2e6, 200, 0.5, 2e9) == pytest.approx(0.32, rel=1e-15)
    assert computing_delay(1.0, 3.2e6, 200, 1.0, 2e9) == pytest.approx(3.2e6 * 200 / 2e9)
    with pytest.raises(InfeasibleDecision):
        computing_delay(0.1, 3.2e6, 200, 0.0, 2e9)


def test_transmission_delay_cases():
    assert transmission_delay(0.0, 3.2e6, 0.0, 0.0) == 0.0
    assert transmission_delay(0.25, 3.2e6, 1.5e6, 0.5e6) == pytest.approx(0.4, rel=1e-15)
    with pytest.raises(InfeasibleDecision):
        transmission_delay(0.25, 3.2e6, 0.0, 0.0)


def test_tiny_shares_count_as_zero():
    assert computing_delay(1e-12, 3.2e6, 200, 0.0, 2e9) == 0.0
    assert transmission_delay(1e-12, 3.2e6, 0.0, 0.0) == 0.0


def test_local_row_has_no_transmission():
    T, Z = delay_matrices(np.array([[0.5], [0.5]]), np.array([[1.0]]), np.array([[2e6]]),
                          np.array([3.2e6]), np.array([200.0]), np.array([2e9]), np.array([2e9]))
    assert T[1, 0] == 0.0 and Z[1, 0] == pytest.approx(0.16)


def test_all_local_average():
    sc = SlotScenario.synthetic([1e6, 2e6, 3e6], [100, 200, 300], [1e9, 2e9, 3e9], [2e9])
    M = np.zeros((2, 3))
    M[1] = 1
    rep = average_tpd(OffloadDecision(M, np.zeros((1, 3))), RateTable.from_total(np.ones((1, 3))), sc)
    assert rep.avg_tpd == pytest.approx(np.mean(sc.rho * sc.kappa / sc.tv_compute))
    assert (rep.offload_delay == 0).all() and (rep.branch == 1).all()


def test_equalized_desk_instance():
    sc = SlotScenario.synthetic([3.2e6], 200, 2e9, [2e9], slot_length=1.0)
    M = np.array([[1 / 7], [6 / 7]])
    rep = average_tpd(OffloadDecision(M, np.ones((1, 1))), RateTable.from_total([[2e6]]), sc)
    # 0.32 * 6/7 = 1.92/7
    assert rep.avg_tpd == pytest.approx(1.92 / 7, rel=1e-12)
    assert rep.T[0, 0] + rep.Z[0, 0] == pytest.approx(rep.local_delay[0], rel=1e-12)


def test_max_is_strictly_monotone_in_top_branch():
    sc = SlotScenario.synthetic([3.2e6], 200, 2e9, [2e9, 2e9], slot_length=1.0)
    rates = RateTable.from_total([[2e6], [2e6]])
    base = average_tpd(OffloadDecision(np.array([[0.2], [0.1], [0.7]]), np.ones((2, 1)) / 2), rates, sc)
    top = base.branch[0]
    M = np.array([[0.2], [0.1], [0.7]])
    M[top] += 0.05
    M[(top + 1) % 3] -= 0.05
    worse = average_tpd(OffloadDecision(M, np.ones((2, 1)) / 2), rates, sc)
    assert worse.tpd[0] > base.tpd[0]


def test_decision_checks():
    OffloadDecision(np.array([[0.5], [0.5]]), np.array([[0.5]])).check()
    with pytest.raises(InfeasibleDecision):
        OffloadDecision(np.array([[0.5], [0.4]]), np.array([[0.5]])).check()
    with pytest.raises(InfeasibleDecision):
        OffloadDecision(np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([[0.7, 0.7]])).check()
    with pytest.raises(ValueError):
        OffloadDecision(np.array([[1.0]]), np.array([[0.5]])).check()


def test_report_dump(tmp_path):
    sc = SlotScenario.synthetic([3.2e6], 200, 2e9, [2e9], slot_length=1.0)
    rep = average_tpd(OffloadDecision(np.array([[0.5], [0.5]]), np.ones((1, 1))), RateTable.from_total([[2e6]]), sc)
    rep.dump_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "tv,branch,T,Z,tpd" and lines[2].startswith("0,local,")


def random_case(seed, V=3, U=4):
    rng = np.random.default_rng(seed)
    sc = SlotScenario.synthetic(rng.uniform(1e5, 5e5, U), 200, rng.uniform(1e9, 3e9, U), rng.uniform(1e9, 3e9, V))
    M = rng.dirichlet(np.ones(V + 1), U).T
    F = rng.dirichlet(np.ones(U), V) * 0.9 + 0.01
    rates = RateTable(rng.uniform(1e5, 1e7, (V, U)), rng.uniform(1e5, 1e7, (V, U)))
    return sc, OffloadDecision(M, F), rates


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(1.0, 20.0))
def test_faster_links_never_hurt(seed, c):
    sc, dec, rates = random_case(seed)
    base = average_tpd(dec, rates, sc)
    fast = average_tpd(dec, RateTable(rates.R * c, rates.S * c), sc)
    assert (fast.T <= base.T * (1 + 1e-12)).all()
    assert fast.avg_tpd <= base.avg_tpd * (1 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_report_bounds(seed):
    sc, dec, rates = random_case(seed)
    rep = average_tpd(dec, rates, sc)
    assert (rep.T >= 0).all() and (rep.Z >= 0).all()
    assert (rep.T[-1] == 0).all()
    assert (rep.tpd >= rep.local_delay).all() and (rep.tpd >= rep.offload_delay).all()
    np.testing.assert_allclose(rep.tpd, (rep.T + rep.Z).max(axis=0))
