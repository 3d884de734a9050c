import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nrmimo.phy import (
    HarqSoftState,
    RiConfig,
    RiDecision,
    RiMode,
    bler,
    bler_threshold_db,
    build_cqi_report,
    calibration_sinr_db,
    compute_cqi,
    compute_ri,
    compute_stream_sinr,
    decode_tb,
    harq_combine,
    noise_power_dbm,
    split_tx_power,
)
from nrmimo.tables import MAX_MCS, cqi_to_mcs

ADAPTIVE = RiConfig(RiMode.ADAPTIVE, threshold1_db=7.0, threshold2_db=12.0)
sinr_db = st.floats(-30.0, 40.0, allow_nan=False)


# -- split_tx_power ----------------------------------------------------------


def test_split_single_stream():
    assert split_tx_power(30.0, 1) == 30.0


def test_split_two_streams():
    assert split_tx_power(30.0, 2) == pytest.approx(26.99, abs=0.005)
    assert split_tx_power(30.0, 2) == pytest.approx(30.0 - 10 * math.log10(2), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_split_conserves_one_watt(n):
    per_stream_w = 10 ** ((split_tx_power(30.0, n) - 30.0) / 10)
    assert n * per_stream_w == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n", [0, 3])
def test_split_rejects_bad_stream_count(n):
    with pytest.raises(ValueError):
        split_tx_power(30.0, n)


# -- compute_stream_sinr -----------------------------------------------------


def test_sinr_rho_zero_is_snr():
    assert compute_stream_sinr(-50, -60, -100, 0.0) == pytest.approx(50.0, abs=1e-9)


def test_sinr_rho_one_hand_value():
    # 10 log10(1e-5 / (1e-10 + 1e-6))
    assert compute_stream_sinr(-50, -60, -100, 1.0) == pytest.approx(9.999565727231374, abs=1e-9)


def test_sinr_perfect_xpd_is_snr():
    assert compute_stream_sinr(-50, -300, -100, 1.0) == pytest.approx(50.0, abs=1e-9)


@pytest.mark.parametrize("rho", [-0.1, 1.1])
def test_sinr_rejects_rho_out_of_range(rho):
    with pytest.raises(ValueError):
        compute_stream_sinr(-50, -60, -100, rho)


@given(sinr_db, st.floats(-120, -20), st.floats(-120, -60))
def test_rho_zero_ignores_cross_power(co, cross, noise):
    assert compute_stream_sinr(co, cross, noise, 0.0) == pytest.approx(co - noise, abs=1e-9)


@given(st.floats(-90, -20), st.floats(-120, -20), st.floats(0, 1), st.floats(0, 1))
def test_sinr_non_increasing_in_rho(co, cross, r1, r2):
    lo, hi = sorted((r1, r2))
    assert compute_stream_sinr(co, cross, -95, hi) <= compute_stream_sinr(co, cross, -95, lo) + 1e-12


@given(st.floats(-100, -20))
def test_two_stream_perfect_xpd_costs_power_split(co_one_stream):
    noise = noise_power_dbm(20e6, 7.0)
    one = compute_stream_sinr(co_one_stream, -300, noise, 1.0)
    two = compute_stream_sinr(co_one_stream - 10 * math.log10(2), -300, noise, 1.0)
    assert two == pytest.approx(one - 3.0103, abs=1e-4)
    assert one - two == pytest.approx(10 * math.log10(2), abs=1e-6)


def test_noise_power_20mhz():
    assert noise_power_dbm(20e6, 7.0) == pytest.approx(-174 + 73.0103 + 7, abs=1e-4)


# -- BLER --------------------------------------------------------------------


def test_bler_midpoint():
    for mcs in (0, 13, MAX_MCS):
        assert bler(bler_threshold_db(mcs), mcs) == pytest.approx(0.5, abs=1e-12)


def test_bler_tail():
    for mcs in (0, 13, MAX_MCS):
        assert bler(bler_threshold_db(mcs) + 10.0, mcs) < 1e-6


def test_bler_target_at_calibration_point():
    for mcs in range(MAX_MCS + 1):
        assert bler(calibration_sinr_db(mcs), mcs) == pytest.approx(0.1, abs=1e-9)


def test_threshold_frozen_values():
    # 10 log10(2^(SE/0.85) - 1) - 0.5 * Phi^-1(0.9), SE from the 256QAM table
    assert bler_threshold_db(0) == pytest.approx(-7.405457606185392, abs=1e-9)
    assert bler_threshold_db(MAX_MCS) == pytest.approx(25.57849360987398, abs=1e-9)
    assert bler_threshold_db(0) < bler_threshold_db(MAX_MCS)


def test_bler_monotone_on_fine_grid():
    grid = np.round(np.arange(-15.0, 35.0, 0.1), 1)
    for mcs in range(MAX_MCS + 1):
        values = [bler(float(s), mcs) for s in grid]
        assert all(b <= a for a, b in zip(values, values[1:]))
    for s in grid[::10]:
        values = [bler(float(s), m) for m in range(MAX_MCS + 1)]
        assert all(b >= a for a, b in zip(values, values[1:]))


def test_bler_rejects_invalid_mcs():
    with pytest.raises(ValueError):
        bler(10.0, MAX_MCS + 1)
    with pytest.raises(ValueError):
        bler(10.0, -1)


# -- HARQ combining ----------------------------------------------------------


def test_combine_first_transmission():
    assert harq_combine(HarqSoftState(), 0, 5.0) == pytest.approx(5.0, abs=1e-9)


def test_combine_two_equal_transmissions():
    st_ = HarqSoftState()
    harq_combine(st_, 0, 5.0)
    assert harq_combine(st_, 0, 5.0) == pytest.approx(8.010299956639813, abs=1e-9)


def test_combine_five_and_zero():
    st_ = HarqSoftState()
    harq_combine(st_, 1, 5.0)
    assert harq_combine(st_, 1, 0.0) == pytest.approx(6.193310480660946, abs=1e-9)


def test_combine_after_final_rv_rejected():
    st_ = HarqSoftState()
    for _ in range(4):
        harq_combine(st_, 0, 0.0)
    with pytest.raises(ValueError):
        harq_combine(st_, 0, 0.0)


def test_streams_combine_independently():
    st_ = HarqSoftState()
    harq_combine(st_, 0, 10.0)
    assert harq_combine(st_, 1, 3.0) == pytest.approx(3.0, abs=1e-12)


@given(st.lists(sinr_db, min_size=1, max_size=4))
def test_combine_matches_linear_sum_and_increases(values):
    st_ = HarqSoftState()
    prev = -math.inf
    for i, v in enumerate(values):
        got = harq_combine(st_, 0, v)
        oracle = 10 * math.log10(sum(10 ** (x / 10) for x in values[: i + 1]))
        assert got == pytest.approx(oracle, abs=1e-9)
        assert got > prev
        prev = got


# -- CQI ---------------------------------------------------------------------


def test_cqi_out_of_range_and_saturation():
    assert compute_cqi(-20.0) == 0
    assert compute_cqi(40.0) == 15


def test_cqi_non_decreasing_on_sweep():
    grid = np.arange(-25.0, 45.0, 0.05)
    cqis = [compute_cqi(float(s)) for s in grid]
    assert all(b >= a for a, b in zip(cqis, cqis[1:]))
    assert set(cqis) >= {0, 15}


@given(sinr_db)
def test_cqi_is_largest_meeting_target(s):
    cqi = compute_cqi(s)
    if cqi > 0:
        assert bler(s, cqi_to_mcs(cqi)) <= 0.1 + 1e-12
    if cqi < 15:
        assert bler(s, cqi_to_mcs(cqi + 1)) > 0.1 - 1e-12


def test_cqi_rejects_other_tables():
    with pytest.raises(ValueError):
        compute_cqi(10.0, mcs_table=1)


# -- RI ----------------------------------------------------------------------


def test_adaptive_single_stream_above_t1():
    assert compute_ri(ADAPTIVE, [0], {0: 8.0}) == RiDecision(2, False)


def test_adaptive_two_streams_one_below_t2():
    assert compute_ri(ADAPTIVE, [0, 1], {0: 13.0, 1: 11.0}) == RiDecision(1, True)


@given(sinr_db, sinr_db)
def test_fixed_ri_one_ignores_sinr(a, b):
    cfg = RiConfig(RiMode.FIXED, fixed_ri=1)
    assert compute_ri(cfg, [0, 1], {0: a, 1: b}).ri == 1
    assert compute_ri(cfg, [1], {1: a}).ri == 1


def expected_ri(mode, fixed, t1, t2, sinrs):
    """The four-case rank function, written out independently."""
    if mode == "fixed":
        return fixed
    if len(sinrs) == 1:
        return 2 if sinrs[0] >= t1 else 1
    return 2 if sinrs[0] >= t2 and sinrs[1] >= t2 else 1


def test_ri_exhaustive_table():
    grid = [-5.0, 0.0, 6.99, 7.0, 7.01, 11.99, 12.0, 12.01, 20.0]
    thresholds = [(7.0, 12.0), (0.0, 0.0), (12.0, 7.0), (-3.0, 15.0)]
    checked = 0
    for (t1, t2), mode, fixed in itertools.product(thresholds, ("fixed", "adaptive"), (1, 2)):
        cfg = RiConfig(RiMode(mode), fixed_ri=fixed, threshold1_db=t1, threshold2_db=t2)
        for s in (0, 1):
            for a in grid:
                assert compute_ri(cfg, [s], {s: a}) == RiDecision(expected_ri(mode, fixed, t1, t2, [a]), False)
                checked += 1
        for a, b in itertools.product(grid, grid):
            got = compute_ri(cfg, [0, 1], {0: a, 1: b})
            assert got.ri == expected_ri(mode, fixed, t1, t2, [a, b])
            assert got.report_both_cqis
            checked += 1
    assert checked == 4 * 2 * 2 * (2 * 9 + 81)


@given(st.floats(-20, 30), st.floats(-20, 30), sinr_db, sinr_db, st.sampled_from([[0], [1], [0, 1]]))
def test_ri_property_matches_four_cases(t1, t2, a, b, active):
    cfg = RiConfig(RiMode.ADAPTIVE, threshold1_db=t1, threshold2_db=t2)
    sinrs = {0: a, 1: b}
    got = compute_ri(cfg, active, sinrs)
    assert got.ri == expected_ri("adaptive", 1, t1, t2, [sinrs[s] for s in active])
    assert got.report_both_cqis == (len(active) == 2)


def test_ri_needs_active_stream_and_sinr():
    with pytest.raises(ValueError):
        compute_ri(ADAPTIVE, [], {})
    with pytest.raises(ValueError):
        compute_ri(ADAPTIVE, [0, 1], {0: 10.0})


def test_rank_switch_sequence_with_power_split():
    # one stream at 8 dB asks for two; the -3.01 dB split lands both streams at 4.99 dB
    first = compute_ri(ADAPTIVE, [0], {0: 8.0})
    assert first.ri == 2
    noise = -100.0
    co_one = noise + 8.0
    co_two = co_one + split_tx_power(30.0, 2) - split_tx_power(30.0, 1)
    sinrs = {s: compute_stream_sinr(co_two, -300.0, noise, 1.0) for s in (0, 1)}
    assert sinrs[0] == pytest.approx(4.99, abs=0.005)
    second = compute_ri(ADAPTIVE, [0, 1], sinrs)
    assert second == RiDecision(1, True)
    report = build_cqi_report(1, second, {s: compute_cqi(v) for s, v in sinrs.items()})
    assert report.ri == 1 and len(report.wb_cqi) == 2
    assert all(c is not None for c in report.wb_cqi)


# -- CQI report --------------------------------------------------------------


def test_report_single_stream():
    r = build_cqi_report(7, RiDecision(1, False), {0: 12})
    assert (r.rnti, r.wb_cqi, r.ri) == (7, (12,), 1)


def test_report_two_streams():
    r = build_cqi_report(7, 2, {0: 12, 1: 9})
    assert (r.wb_cqi, r.ri) == ((12, 9), 2)


def test_report_keeps_index_for_stream_one_only():
    r = build_cqi_report(7, 1, {1: 9})
    assert r.wb_cqi == (None, 9)


def test_report_rejects_bad_input():
    with pytest.raises(ValueError):
        build_cqi_report(7, 1, {})
    with pytest.raises(ValueError):
        build_cqi_report(7, 1, {2: 3})
    with pytest.raises(ValueError):
        build_cqi_report(7, 3, {0: 3})


# -- decode_tb ---------------------------------------------------------------


def test_decode_certain_outcomes():
    rng = np.random.default_rng(0)
    assert all(decode_tb(5, 40.0, rng) for _ in range(100))
    assert not any(decode_tb(27, -20.0, rng) for _ in range(100))


def test_decode_nack_fraction_monte_carlo():
    rng = np.random.default_rng(12345)
    mcs = 10
    s = calibration_sinr_db(mcs)
    nacks = sum(not decode_tb(mcs, s, rng) for _ in range(10_000))
    assert nacks / 10_000 == pytest.approx(0.1, abs=0.01)
