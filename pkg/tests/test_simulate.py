import math

import numpy as np
import pytest

from odia.exceptions import AllTrialsInfeasible, DimensionError, DomainError
from odia.network import NetworkConfig, sample_channels
from odia.simulate import (
    db_to_power,
    decorrelate,
    desired_signal,
    dof_slope,
    link_rates,
    make_payload,
    monte_carlo,
    per_cell_rate,
    receivers,
    run_trial,
    transmit_two_slots,
)
from odia.solver import effective_channel, solve

from conftest import crandn


def cfg(C, K, M, N, NR, scheme="imac", **kw):
    return NetworkConfig(C, K, M, N, NR, scheme, **kw)


def setup(c, seed=0):
    ch = sample_channels(c, seed)
    return ch, solve(ch)


# -- transmission ----------------------------------------------------------

@pytest.mark.parametrize("c", [
    cfg(3, 2, 2, 4, 12),
    cfg(2, 2, 2, 4, 8, "ibc"),
    cfg(2, 2, 2, 4, 16, "fd"),
    cfg(2, 2, 2, 4, 16, "fd_instantaneous"),
    cfg(2, 2, 2, 4, 12, "hd_ue_fd_bs", uplink_users=1, downlink_users=1),
])
def test_noiseless_frame_holds_only_desired_signal(c):
    ch, bf = setup(c, 1)
    payload = make_payload(ch, bf, 100.0, 7)
    frame = transmit_two_slots(ch, bf, payload, 8, noise_var=0.0)
    for r in receivers(c):
        H, target = desired_signal(ch, bf, payload, r)
        y = frame.combined(r)
        assert np.linalg.norm(y - H @ target) <= 1e-9 * np.linalg.norm(y)


def test_single_cell_zero_relay_adds_two_noises():
    ch, bf = setup(cfg(1, 2, 1, 3, 2))
    assert not bf.T.any()
    payload = make_payload(ch, bf, 10.0, 0)
    frame = transmit_two_slots(ch, bf, payload, 1)
    H, x = desired_signal(ch, bf, payload, ("bs", 0))
    r = ("bs", 0)
    np.testing.assert_allclose(frame.combined(r), H @ x + frame.noise1[r] + frame.noise2[r], atol=1e-12)


def test_instantaneous_relay_has_one_noise_term():
    ch, bf = setup(cfg(2, 2, 2, 4, 16, "fd_instantaneous"))
    frame = transmit_two_slots(ch, bf, make_payload(ch, bf, 1.0, 0), 0)
    assert all(not n.any() for n in frame.noise2.values())


def test_frames_repeat_for_same_seed():
    ch, bf = setup(cfg(3, 2, 2, 4, 12))
    payload = make_payload(ch, bf, 10.0, 3)
    a = transmit_two_slots(ch, bf, payload, 4)
    b = transmit_two_slots(ch, bf, payload, 4)
    for r in a.slot1:
        assert a.combined(r).tobytes() == b.combined(r).tobytes()
    np.testing.assert_array_equal(a.relay, b.relay)


def test_payload_meets_average_power():
    ch, bf = setup(cfg(2, 2, 2, 4, 16, "fd"))
    p = 50.0
    energy = {t: 0.0 for t in make_payload(ch, bf, p, 0).x}
    n = 4000
    for s in range(n):
        for t, x in make_payload(ch, bf, p, s).x.items():
            energy[t] += np.vdot(x, x).real / n
    for t, e in energy.items():
        assert abs(e / p - 1.0) < 0.1, t


def test_payload_shape_mismatch():
    ch, bf = setup(cfg(3, 2, 2, 4, 12))
    payload = make_payload(ch, bf, 1.0, 0)
    payload.x[("ue", 0, 0)] = np.zeros(3, complex)
    with pytest.raises(DimensionError):
        transmit_two_slots(ch, bf, payload, 0)


# -- decorrelator ----------------------------------------------------------

def test_decorrelator_recovers_noiseless_payload():
    ch, bf = setup(cfg(3, 2, 2, 4, 12), 2)
    payload = make_payload(ch, bf, 1.0, 5)
    frame = transmit_two_slots(ch, bf, payload, 6, noise_var=0.0)
    for j in range(3):
        H, x = desired_signal(ch, bf, payload, ("bs", j))
        est = decorrelate(H, frame.combined(("bs", j)))
        assert np.linalg.norm(est - x) <= 1e-8 * np.linalg.norm(x)


def test_decorrelator_identity(rng):
    v = crandn(rng, 4)
    np.testing.assert_allclose(decorrelate(np.eye(4), v), v)


def test_decorrelator_is_least_squares_when_underdetermined(rng):
    H = crandn(rng, 3, 5)
    x = crandn(rng, 5)
    est = decorrelate(H, H @ x)
    oracle = np.linalg.lstsq(H, H @ x, rcond=None)[0]
    np.testing.assert_allclose(est, oracle, atol=1e-10)
    assert np.linalg.norm(est - x) > 1e-3 * np.linalg.norm(x)


# -- rates -----------------------------------------------------------------

def test_scalar_rate_closed_form():
    ch, bf = setup(cfg(1, 1, 1, 1, 1), 9)
    h = ch.ub[(0, 0, 0)][0, 0]
    for p in (0.1, 1.0, 1e3):
        expected = 0.5 * math.log2(1 + p * abs(h) ** 2 / 2)
        assert abs(per_cell_rate(ch, bf, p)[0] - expected) <= 1e-10


def test_rate_vanishes_at_zero_power():
    for c in (cfg(3, 2, 2, 4, 12), cfg(2, 2, 2, 4, 16, "fd")):
        ch, bf = setup(c)
        assert all(r.rate == 0.0 for r in link_rates(ch, bf, 0.0))
        assert max(per_cell_rate(ch, bf, 1e-9)) < 1e-6


def test_uplink_rate_matches_aligned_log_det():
    ch, bf = setup(cfg(3, 2, 2, 4, 12), 3)
    p = db_to_power(20.0)
    rates = per_cell_rate(ch, bf, p)
    for j in range(3):
        H = effective_channel(ch, bf, ("bs", j))
        FT = ch.rb[j] @ bf.T
        Q = 2 * np.eye(4) + FT @ FT.conj().T
        _, ld = np.linalg.slogdet(np.eye(4) + np.linalg.solve(Q, (p / 2) * H @ H.conj().T))
        assert abs(rates[j] - 0.5 * ld / math.log(2)) <= 1e-8


def test_uplink_high_snr_slope_per_cell():
    lo, hi = db_to_power(40.0), db_to_power(43.0)
    slopes = []
    for seed in range(20):
        ch, bf = setup(cfg(3, 2, 2, 4, 12), seed)
        r_lo, r_hi = per_cell_rate(ch, bf, lo), per_cell_rate(ch, bf, hi)
        slopes += [dof_slope(a, b, lo, hi) for a, b in zip(r_lo, r_hi)]
    assert abs(np.mean(slopes) - 2.0) < 0.1


def test_rate_grows_with_power():
    ch, bf = setup(cfg(2, 2, 2, 4, 16, "fd"), 1)
    prev = [0.0] * 2
    for snr in (0, 10, 20, 30):
        cur = per_cell_rate(ch, bf, db_to_power(snr))
        assert all(c > p for c, p in zip(cur, prev))
        prev = cur


def test_negative_power_rejected():
    ch, bf = setup(cfg(2, 1, 1, 1, 2))
    with pytest.raises(DomainError):
        link_rates(ch, bf, -1.0)


def test_dof_slope_arithmetic():
    assert dof_slope(10, 20, 1e3, 1e6) == pytest.approx(10 / math.log2(1e3), rel=1e-12)
    assert dof_slope(10, 20, 1e3, 1e6) == pytest.approx(1.0034, abs=1e-4)
    assert dof_slope(5, 5, 1, 2) == 0
    for p_lo, p_hi in ((10, 10), (100, 10), (0, 10)):
        with pytest.raises(DomainError):
            dof_slope(1, 2, p_lo, p_hi)


# -- Monte Carlo -----------------------------------------------------------

def test_monte_carlo_repeats_exactly():
    c = cfg(2, 2, 2, 4, 16, "fd")
    a = monte_carlo(c, 4, (20, 40), seed=9)
    b = monte_carlo(c, 4, (20, 40), seed=9)
    assert a.aggregate == b.aggregate
    assert monte_carlo(c, 4, (20, 40), seed=10).aggregate != a.aggregate


def test_trial_reproducible_in_isolation():
    c = cfg(3, 2, 2, 4, 12)
    res = monte_carlo(c, 6, (20, 40), seed=3)
    alone = run_trial(c, 3, 4, (20, 40))
    assert alone.rates == res.reports[4].rates
    assert alone.channel_seed == res.reports[4].channel_seed


def test_feasible_config_has_no_failed_trials():
    res = monte_carlo(cfg(3, 2, 2, 4, 12), 100, (40, 60), seed=0)
    assert res.aggregate.infeasible_trials == 0
    assert max(r.max_residual for r in res.reports) <= 1e-8
    assert max(r.recovery_error for r in res.reports) <= 1e-8


def test_undersized_relay_fails_every_trial():
    c = cfg(3, 2, 2, 4, 9)
    reports = [run_trial(c, 0, t, (20,)) for t in range(100)]
    assert sum(not r.feasible for r in reports) == 100
    with pytest.raises(AllTrialsInfeasible):
        monte_carlo(c, 5, (20,), seed=0)


def test_single_snr_point_gives_no_slope():
    res = monte_carlo(cfg(2, 1, 1, 1, 2), 2, (20,), seed=0)
    assert res.aggregate.dof_estimate is None


def test_monte_carlo_argument_checks():
    with pytest.raises(ValueError):
        monte_carlo(cfg(2, 1, 1, 1, 2), 0)
    with pytest.raises(ValueError):
        monte_carlo(cfg(2, 1, 1, 1, 2), 1, ())
