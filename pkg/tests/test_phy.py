import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetvfc.channel import ChannelState
from hetvfc.phy import (
    Assignment,
    PhyParams,
    RateTable,
    aggregate_rates,
    assign_subchannels,
    dbm_per_hz_to_w,
    rf_rate_table,
    rf_subchannel_rate,
    vlc_rate_table,
    vlc_subchannel_rate,
)

G = 0.5e6
MU_R = dbm_per_hz_to_w(-174.0)
MU_V = 1e-21


def state(h1, h2, g2):
    h1, h2, g2 = (np.asarray(x, dtype=float) for x in (h1, h2, g2))
    V, U = h1.shape
    return ChannelState(list(range(U)), list(range(U, U + V)), h1, h2, np.zeros((V, U), bool), g2)


def assignment(V, U, K=1, L=1, p=0.1, q=0.1):
    return Assignment(
        np.ones((V, U, K), bool) if V == 1 else np.zeros((V, U, K), bool),
        np.ones((V, U, L), bool) if V == 1 else np.zeros((V, U, L), bool),
        np.full((U, K), p), np.full((U, K), p), np.full((U, L), q), G, G, MU_V, MU_R,
    )


def test_noise_conversion():
    assert dbm_per_hz_to_w(-174.0) == pytest.approx(10 ** (-20.4), rel=1e-12)


def test_default_params():
    p = PhyParams()
    assert (p.n_vlc, p.n_rf, p.power_vlc, p.power_rf, p.gamma_v, p.gamma_r) == (8, 8, 0.1, 0.1, 0.5e6, 0.5e6)


def test_single_sv_takes_everything():
    cs = state([[1e-6, 2e-6]], [[0.0, 0.0]], np.full((1, 2, 8), 1e-9))
    asg = assign_subchannels(cs)
    assert asg.a.all() and asg.b.all()
    assert (asg.p1 == 0.1).all() and (asg.q == 0.1).all()


def test_strongest_rf_gain_wins_and_ties_pick_lowest():
    g2 = np.zeros((2, 1, 2))
    g2[:, 0, 0] = [3e-9, 1e-9]  # SV 0 stronger on subchannel 0
    g2[:, 0, 1] = [2e-9, 2e-9]  # tie on subchannel 1
    asg = assign_subchannels(state(np.zeros((2, 1)), np.zeros((2, 1)), g2), params=PhyParams(n_vlc=1, n_rf=2))
    assert asg.b[:, 0, 0].tolist() == [True, False]
    assert asg.b[:, 0, 1].tolist() == [True, False]


def test_vlc_unreachable_leaves_subchannels_free():
    asg = assign_subchannels(state(np.zeros((2, 1)), np.zeros((2, 1)), np.full((2, 1, 8), 1e-9)))
    assert not asg.a.any()


def test_vlc_strongest_of_forward_or_backward():
    asg = assign_subchannels(state([[1e-6], [0.0]], [[0.0], [5e-6]], np.full((2, 1, 8), 1e-9)))
    assert asg.a[1].all() and not asg.a[0].any()


def test_assignment_invariants_checked():
    a = np.ones((2, 1, 1), bool)
    with pytest.raises(ValueError):
        Assignment(a, np.zeros((2, 1, 1), bool), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)), G, G, MU_V, MU_R)
    with pytest.raises(ValueError):
        Assignment(np.zeros((1, 1, 1), bool), np.zeros((1, 1, 1), bool), -np.ones((1, 1)), np.ones((1, 1)),
                   np.ones((1, 1)), G, G, MU_V, MU_R)


def test_rf_rate_zero_power():
    asg = assignment(1, 1, q=0.0)
    assert rf_subchannel_rate(0, 0, 0, asg, state([[0.0]], [[0.0]], [[[1e-9]]])) == 0.0


def test_rf_rate_snr_three():
    g2 = 3 * MU_R * G / 0.1
    rate = rf_subchannel_rate(0, 0, 0, assignment(1, 1), state([[0.0]], [[0.0]], [[[g2]]]))
    assert rate == pytest.approx(1.0e6, rel=1e-12)


def test_rf_rate_with_interferer_high_precision():
    mpmath.mp.dps = 50
    x = 5.0
    g2 = x * MU_R * G / 0.1
    cs = state([[0.0, 0.0]], [[0.0, 0.0]], [[[g2], [g2]]])
    rate = rf_subchannel_rate(0, 0, 0, assignment(1, 2), cs)
    snr = mpmath.mpf(x)
    exact = G * mpmath.log(1 + snr / (snr + 1), 2)
    assert rate == pytest.approx(float(exact), rel=1e-13)


def test_vlc_rate_blocked_is_zero():
    assert vlc_subchannel_rate(0, 0, 0, 1, assignment(1, 1), state([[0.0]], [[0.0]], [[[0.0]]])) == 0.0


def test_vlc_rate_snr_three():
    h = math.sqrt(3 * MU_V * G / (0.1 * math.e / (2 * math.pi)))
    asg, cs = assignment(1, 1), state([[h]], [[0.0]], [[[0.0]]])
    assert vlc_subchannel_rate(0, 0, 0, 1, asg, cs) == pytest.approx(G, rel=1e-12)
    assert vlc_subchannel_rate(0, 0, 0, 2, asg, cs) == 0.0
    with pytest.raises(ValueError):
        vlc_subchannel_rate(0, 0, 0, 3, asg, cs)


def test_vlc_direction_exclusive_in_table():
    rng = np.random.default_rng(0)
    h1 = rng.uniform(0, 1e-5, (3, 4))
    h2 = np.where(rng.random((3, 4)) < 0.5, 0.0, rng.uniform(0, 1e-5, (3, 4)))
    h1 = np.where(h2 > 0, 0.0, h1)
    rates = vlc_rate_table(assignment(3, 4, K=2), state(h1, h2, np.zeros((3, 4, 1))))
    assert (rates[0] * rates[1] == 0).all()


def test_zero_assignment_gives_zero_table():
    cs = state([[1e-6]], [[0.0]], [[[1e-9]]])
    asg = assignment(2, 1)
    asg = Assignment(np.zeros((1, 1, 1), bool), np.zeros((1, 1, 1), bool), asg.p1, asg.p2, asg.q, G, G, MU_V, MU_R)
    rt = aggregate_rates(asg, cs)
    assert (rt.R == 0).all() and (rt.S == 0).all()


def test_single_rf_subchannel_sum():
    cs = state([[0.0]], [[0.0]], [[[1e-9, 2e-9]]])
    b = np.array([[[False, True]]])
    asg = Assignment(np.zeros((1, 1, 1), bool), b, np.full((1, 1), 0.1), np.full((1, 1), 0.1),
                     np.full((1, 2), 0.1), G, G, MU_V, MU_R)
    assert aggregate_rates(asg, cs).S[0, 0] == rf_subchannel_rate(0, 0, 1, asg, cs)


def scalar_tables(asg, cs):
    V, U = cs.h1.shape
    R, S = np.zeros((V, U)), np.zeros((V, U))
    for v in range(V):
        for u in range(U):
            S[v, u] = sum(asg.b[v, u, l] * rf_subchannel_rate(u, v, l, asg, cs) for l in range(asg.L))
            R[v, u] = sum(asg.a[v, u, k] * (vlc_subchannel_rate(u, v, k, 1, asg, cs) + vlc_subchannel_rate(u, v, k, 2, asg, cs))
                          for k in range(asg.K))
    return R, S


def test_two_by_two_matches_scalar_evaluation():
    rng = np.random.default_rng(3)
    h1 = np.array([[2e-6, 0.0], [0.0, 1e-6]])
    h2 = np.array([[0.0, 3e-6], [4e-6, 0.0]])
    g2 = rng.uniform(1e-10, 1e-8, (2, 2, 3))
    cs = state(h1, h2, g2)
    asg = assign_subchannels(cs, params=PhyParams(n_vlc=2, n_rf=3))
    rt = aggregate_rates(asg, cs)
    R, S = scalar_tables(asg, cs)
    np.testing.assert_allclose(rt.R, R, rtol=1e-12)
    np.testing.assert_allclose(rt.S, S, rtol=1e-12)


def test_unassigned_power_toggle():
    g2 = np.full((1, 2, 2), 1e-9)
    g2[0, 1, 1] = 0.0
    cs = state(np.zeros((1, 2)), np.zeros((1, 2)), g2)
    on = assign_subchannels(cs, params=PhyParams(n_vlc=1, n_rf=2))
    off = assign_subchannels(cs, params=PhyParams(n_vlc=1, n_rf=2, unassigned_interference=False))
    assert on.q[1, 1] == 0.1 and off.q[1, 1] == 0.0
    assert aggregate_rates(off, cs).S[0, 0] >= aggregate_rates(on, cs).S[0, 0]


def test_rate_dump(tmp_path):
    RateTable(np.ones((2, 1)), np.zeros((2, 1))).dump_csv(tmp_path / "r.csv", [7], [3, 4])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "tv,sv,R_vlc_bps,S_rf_bps" and len(lines) == 3


def test_only_medium():
    rt = RateTable(np.ones((1, 1)), 2 * np.ones((1, 1)))
    assert rt.only("vlc").total[0, 0] == 1 and rt.only("rf").total[0, 0] == 2
    with pytest.raises(ValueError):
        rt.only("mmwave")


pos = st.floats(1e-10, 1e-7)


@settings(max_examples=100, deadline=None)
@given(own=pos, other=pos, q_own=st.floats(0.01, 1.0), q_other=st.floats(0.0, 1.0), bump=st.floats(1.0, 10.0))
def test_rf_rate_monotone(own, other, q_own, q_other, bump):
    cs = state([[0.0, 0.0]], [[0.0, 0.0]], [[[own], [other]]])

    def rate(qo, qi):
        asg = assignment(1, 2)
        asg.q[:] = [[qo], [qi]]
        return rf_rate_table(asg, cs)[0, 0, 0]

    base = rate(q_own, q_other)
    assert rate(q_own * bump, q_other) >= base
    assert rate(q_own, q_other * bump) <= base
    assert rate(q_own, 0.0) >= base  # removing the interferer


@settings(max_examples=100, deadline=None)
@given(h_own=st.floats(1e-7, 1e-4), h_other=st.floats(0.0, 1e-4), p=st.floats(0.01, 1.0), bump=st.floats(1.0, 10.0))
def test_vlc_rate_monotone(h_own, h_other, p, bump):
    def rate(ho, pi):
        asg = assignment(1, 2, p=p)
        asg.p1[1] = pi
        return vlc_rate_table(asg, state([[ho, h_other]], [[0.0, 0.0]], np.zeros((1, 2, 1))))[0, 0, 0, 0]

    base = rate(h_own, p)
    assert rate(h_own * bump, p) >= base
    assert rate(h_own, p * bump) <= base
    assert rate(h_own, 0.0) >= base


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 1000))
def test_permuting_subchannels_keeps_aggregate(seed):
    rng = np.random.default_rng(seed)
    V, U, L = 3, 2, 5
    g2 = rng.uniform(1e-10, 1e-8, (V, U, L))
    h1 = rng.uniform(0, 1e-5, (V, U))
    cs = state(h1, np.zeros((V, U)), g2)
    params = PhyParams(n_vlc=2, n_rf=L)
    base = aggregate_rates(assign_subchannels(cs, params=params), cs)
    perm = rng.permutation(L)
    cs2 = state(h1, np.zeros((V, U)), g2[:, :, perm])
    other = aggregate_rates(assign_subchannels(cs2, params=params), cs2)
    np.testing.assert_allclose(other.S, base.S, rtol=1e-12)
    np.testing.assert_allclose(other.R, base.R, rtol=1e-12)
