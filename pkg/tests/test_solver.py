import dataclasses

import numpy as np
import pytest

from odia.exceptions import DimensionError, Infeasible, SchemeError
from odia.linalg import numeric_rank
from odia.network import NetworkConfig, required_relay_antennas, sample_channels, uplink_view
from odia.solver import (
    bs_beamformers,
    cell_downlink_matrix,
    effective_channel,
    interference_residual,
    solve,
    solve_boost,
    solve_fd,
    solve_ibc,
    solve_imac,
)


def cfg(C, K, M, N, NR, scheme="imac", **kw):
    return NetworkConfig(C, K, M, N, NR, scheme, **kw)


def substituted_residual(ch, T):
    """Alignment residual recomputed straight from the channel dictionaries."""
    c = ch.config
    worst = 0.0
    for j in range(c.C):
        others = [(k, i) for i in range(c.C) if i != j for k in range(c.K)]
        Hbar = np.hstack([ch.ub[(j, k, i)] for k, i in others])
        Gbar = np.hstack([ch.ur[key] for key in others])
        worst = max(worst, np.linalg.norm(Hbar + ch.rb[j] @ T @ Gbar) / np.linalg.norm(Hbar))
    return worst


# -- uplink ----------------------------------------------------------------

def test_imac_scalar_network():
    ch = sample_channels(cfg(2, 1, 1, 1, 2), 0)
    bf = solve_imac(ch)
    assert substituted_residual(ch, bf.T) <= 1e-9
    assert interference_residual(ch, bf).max_residual <= 1e-9


def test_imac_reference_config():
    ch = sample_channels(cfg(3, 2, 2, 4, 12), 3)
    bf = solve_imac(ch)
    assert bf.diagnostics.rows == 96 and bf.diagnostics.unknowns == 144
    assert substituted_residual(ch, bf.T) <= 1e-8
    for j in range(3):
        assert numeric_rank(effective_channel(ch, bf, ("bs", j))) == 4


def test_single_cell_gives_zero_relay():
    ch = sample_channels(cfg(1, 2, 1, 2, 3), 0)
    bf = solve_imac(ch)
    assert not bf.T.any() and bf.T.shape == (3, 3)
    rep = interference_residual(ch, bf)
    assert rep.per_node == () and rep.max_residual == 0.0
    T = solve_ibc(sample_channels(cfg(1, 2, 1, 2, 3, "ibc"), 0)).T
    assert not T.any()


def test_imac_infeasible_below_bound():
    c = cfg(3, 2, 2, 4, 9)
    for seed in range(100):
        with pytest.raises(Infeasible) as info:
            solve_imac(sample_channels(c, seed))
        diag = info.value.diagnostics
        assert diag.rows == 96 and diag.unknowns == 81
        assert diag.rank_augmented > diag.rank


def test_imac_scalar_network_needs_two_relay_antennas():
    c = cfg(2, 1, 1, 1, 1)
    for seed in range(100):
        with pytest.raises(Infeasible):
            solve_imac(sample_channels(c, seed))


@pytest.mark.parametrize("extra", [0, 1, 3])
def test_feasible_at_and_above_bound(extra):
    base = cfg(3, 2, 2, 4, 1)
    c = base.with_relay_antennas(required_relay_antennas(base) + extra)
    for seed in range(5):
        ch = sample_channels(c, seed)
        assert interference_residual(ch, solve(ch)).max_residual <= 1e-8


def test_relay_scales_inversely_with_channels():
    ch = sample_channels(cfg(3, 2, 2, 4, 12), 2)
    T = solve_imac(ch).T
    T2 = solve_imac(ch.scaled(3.0)).T
    np.testing.assert_allclose(T2 * 3.0, T, atol=1e-10)


def test_wrong_solver_for_scheme():
    with pytest.raises(SchemeError):
        solve_imac(sample_channels(cfg(2, 1, 1, 1, 2, "ibc"), 0))


def test_zero_relay_residual_is_one():
    ch = sample_channels(cfg(3, 2, 2, 4, 12), 0)
    bf = solve_imac(ch)
    zero = dataclasses.replace(bf, relay=np.zeros_like(bf.relay))
    rep = interference_residual(ch, zero)
    assert all(r == 1.0 for _, r in rep.per_node)


def test_asymmetric_imac():
    c = NetworkConfig(3, [1, 2, 1], [[2], [1, 2], [3]], [3, 4, 3], 1, "imac")
    c = c.with_relay_antennas(required_relay_antennas(c))
    ch = sample_channels(c, 0)
    assert interference_residual(ch, solve(ch)).max_residual <= 1e-8


# -- downlink --------------------------------------------------------------

def test_ibc_reference_config():
    c = cfg(2, 2, 2, 4, 8, "ibc")
    for seed in range(10):
        ch = sample_channels(c, seed)
        bf = solve_ibc(ch)
        assert bf.diagnostics.rows == 32
        assert interference_residual(ch, bf).max_residual <= 1e-8
        for j in range(2):
            AV = cell_downlink_matrix(ch, bf.T, j) @ bf.bs[j]
            np.testing.assert_allclose(AV, np.eye(4), atol=1e-9)


def test_bs_beamformers_single_stream_selects_e1_e3():
    ch = sample_channels(cfg(2, 2, 2, 4, 8, "ibc", streams_per_ue=1), 1)
    bf = solve_ibc(ch)
    V = bs_beamformers(ch, bf, 1)
    for j in range(2):
        AV = cell_downlink_matrix(ch, bf.T, j) @ V[j]
        np.testing.assert_allclose(AV, np.eye(4)[:, [0, 2]], atol=1e-9)


def test_bs_beamformers_square_case():
    ch = sample_channels(cfg(2, 2, 1, 2, 4, "ibc", streams_per_ue=1), 0)
    bf = solve_ibc(ch)
    for j in range(2):
        np.testing.assert_allclose(cell_downlink_matrix(ch, bf.T, j) @ bf.bs[j], np.eye(2), atol=1e-9)


def test_bs_beamformers_fewer_bs_antennas_than_ue_antennas():
    # N < K M: only the first d antennas of each UE are kept clean
    ch = sample_channels(cfg(2, 2, 2, 2, 8, "ibc"), 0)
    bf = solve_ibc(ch)
    for j in range(2):
        AV = cell_downlink_matrix(ch, bf.T, j) @ bf.bs[j]
        np.testing.assert_allclose(AV[[0, 2]], np.eye(2), atol=1e-9)


def test_bs_beamformers_dimension_errors():
    ch = sample_channels(cfg(2, 2, 2, 4, 8, "ibc"), 0)
    T = solve_ibc(ch).T
    with pytest.raises(DimensionError):
        bs_beamformers(ch, T, 3)
    with pytest.raises(DimensionError):
        bs_beamformers(ch, T, 0)


def test_downlink_effective_channel_nulls_other_users():
    ch = sample_channels(cfg(2, 2, 2, 4, 8, "ibc", streams_per_ue=1), 4)
    bf = solve_ibc(ch)
    H = effective_channel(ch, bf, ("ue", 1, 0))
    assert H.shape == (2, 1)
    np.testing.assert_allclose(H, [[1], [0]], atol=1e-9)


# -- full duplex -----------------------------------------------------------

def test_fd_both_sides_aligned():
    c = cfg(2, 2, 2, 4, 16, "fd")
    for seed in range(10):
        ch = sample_channels(c, seed)
        bf = solve_fd(ch)
        rep = interference_residual(ch, bf)
        owners = {node[0] for node, _ in rep.per_node}
        assert owners == {"bs", "ue"}
        assert rep.max_residual <= 1e-8


def test_fd_infeasible_one_below_bound():
    c = cfg(2, 1, 1, 1, 3, "fd")
    assert required_relay_antennas(c) == 4
    for seed in range(100):
        with pytest.raises(Infeasible):
            solve_fd(sample_channels(c, seed))


def test_hd_without_downlink_is_imac():
    hd = cfg(3, 2, 2, 4, 12, "hd_ue_fd_bs", uplink_users=2, downlink_users=0)
    im = cfg(3, 2, 2, 4, 12)
    for seed in range(10):
        T1 = solve(sample_channels(hd, seed)).T
        T2 = solve_imac(sample_channels(im, seed)).T
        np.testing.assert_allclose(T1, T2, atol=1e-10)


def test_hd_mixed_split():
    c = cfg(2, 2, 2, 4, 12, "hd_ue_fd_bs", uplink_users=1, downlink_users=1)
    ch = sample_channels(c, 0)
    bf = solve(ch)
    assert bf.bs is not None and bf.bs[0].shape == (4, 2)
    assert interference_residual(ch, bf).max_residual <= 1e-8


# -- boost -----------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.5])
def test_boost_scales_desired_channel(alpha):
    c = cfg(3, 2, 2, 4, 12, "imac_boost", alpha=alpha)
    ch = sample_channels(c, 6)
    bf = solve_boost(ch)
    assert interference_residual(ch, bf).max_residual <= 1e-8
    for j in range(3):
        own = uplink_view(ch, j).desired
        err = np.linalg.norm(effective_channel(ch, bf, ("bs", j)) - (1 + alpha) * own)
        assert err / np.linalg.norm(own) <= 1e-8


def test_boost_alpha_override():
    ch = sample_channels(cfg(3, 2, 2, 4, 12, "imac_boost"), 0)
    assert solve_boost(ch, alpha=2.0).alpha == 2.0
    with pytest.raises(ValueError):
        solve_boost(ch, alpha=-1.0)
