"""
Two-slot transmission, decorrelation, finite-SNR rates and Monte-Carlo DoF.

Signal model
------------
Slot 1: every transmitter of the scheme sends. Receivers and the relay
listen. Slot 2: the relay forwards ``T y_R`` and the transmitters stay
silent. A receiver adds its two observations. Under ``fd_instantaneous`` the
relay forwards with zero delay, so both paths arrive in one slot with a
single receiver noise term.

A full-duplex node knows its own transmit signal. Its self-interference,
including the copy looped back through the relay, is assumed removed.

UEs transmit ``sqrt(P/M) z`` with ``z ~ CN(0, I_M)``. BS ``j`` transmits
``sqrt(P / ||V_j||_F^2) V_j s_j`` with ``s_j ~ CN(0, I)``. Both meet the
average power ``P``. Noise is unit-variance CN at every antenna.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import AllTrialsInfeasible, DimensionError, DomainError, Infeasible, RankDeficient
from .linalg import DEFAULT_REL_TOL, numeric_rank, pseudo_inverse
from .network import ChannelSet, NetworkConfig, Scheme, sample_channels
from .solver import Beamformer, cell_downlink_matrix, effective_channel, interference_residual, solve

__all__ = [
    "TransmitPayload",
    "ReceivedFrame",
    "LinkRate",
    "TrialReport",
    "Aggregate",
    "MonteCarloResult",
    "DEFAULT_SNR_GRID_DB",
    "transmitters",
    "receivers",
    "make_payload",
    "transmit_two_slots",
    "desired_signal",
    "decorrelate",
    "link_rates",
    "per_cell_rate",
    "dof_slope",
    "trial_seeds",
    "run_trial",
    "monte_carlo",
]

DEFAULT_SNR_GRID_DB = (0.0, 10.0, 20.0, 30.0, 40.0, 60.0)


# ---------------------------------------------------------------------------
# Link graph
# ---------------------------------------------------------------------------


def transmitters(cfg: NetworkConfig) -> list:
    nodes = []
    if cfg.bs_transmits:
        nodes += [("bs", j) for j in range(cfg.C)]
    nodes += [("ue", k, j) for j in range(cfg.C) for k in cfg.uplink_ues(j)]
    return nodes


def receivers(cfg: NetworkConfig) -> list:
    nodes = []
    if cfg.bs_receives:
        nodes += [("bs", j) for j in range(cfg.C)]
    nodes += [("ue", k, j) for j in range(cfg.C) for k in cfg.downlink_ues(j)]
    return nodes


def _antennas(cfg: NetworkConfig, node) -> int:
    return cfg.bs_ant(node[1]) if node[0] == "bs" else cfg.ue_ant(node[1], node[2])


def _to_relay(ch: ChannelSet, t):
    return ch.br[t[1]] if t[0] == "bs" else ch.ur[(t[1], t[2])]


def _from_relay(ch: ChannelSet, r):
    return ch.rb[r[1]] if r[0] == "bs" else ch.ru[(r[1], r[2])]


def _direct(ch: ChannelSet, r, t):
    if r[0] == "bs":
        key = (r[1], t[1]) if t[0] == "bs" else (r[1], t[1], t[2])
        return (ch.bb if t[0] == "bs" else ch.ub).get(key)
    if t[0] == "bs":
        return ch.bu.get((r[1], r[2], t[1]))
    return ch.uu.get((r[1], r[2], t[1], t[2]))


def _link(ch: ChannelSet, T: np.ndarray, r, t) -> np.ndarray:
    """Direct plus relayed channel from transmitter `t` to receiver `r`."""
    G = _from_relay(ch, r) @ T @ _to_relay(ch, t)
    direct = _direct(ch, r, t)
    return G if direct is None else direct + G


def _cell_of(node) -> int:
    return node[1] if node[0] == "bs" else node[2]


def _two_slot(cfg: NetworkConfig) -> bool:
    return cfg.scheme is not Scheme.FD_INSTANTANEOUS


def _bs_gain(bf: Beamformer, j: int, power: float) -> float:
    V = bf.bs[j]
    norm2 = float(np.sum(np.abs(V) ** 2))
    return math.sqrt(power / norm2) if norm2 > 0 else 0.0


def _stream_slice(cfg: NetworkConfig, bf: Beamformer, r) -> slice:
    pos = list(cfg.downlink_ues(r[2])).index(r[1])
    return slice(pos * bf.streams, (pos + 1) * bf.streams)


# ---------------------------------------------------------------------------
# Transmission
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransmitPayload:
    """Transmit vectors for one channel use.

    `x` maps each transmitting node to its antenna-domain vector. `streams`
    maps each BS to its precoder input ``s_j`` (stacked over its UEs).
    """

    power: float
    x: dict
    streams: dict = field(default_factory=dict)


def make_payload(ch: ChannelSet, bf: Beamformer, power: float, seed) -> TransmitPayload:
    """Draw i.i.d. unit-variance Gaussian symbols and scale them to `power`."""
    if power < 0:
        raise DomainError(f"power must be nonnegative, got {power}")
    cfg = ch.config
    rng = np.random.default_rng(seed)
    x, streams = {}, {}
    for t in transmitters(cfg):
        if t[0] == "bs":
            V = bf.bs[t[1]]
            s = _cn(rng, V.shape[1])
            streams[t] = s
            x[t] = _bs_gain(bf, t[1], power) * (V @ s)
        else:
            m = _antennas(cfg, t)
            x[t] = math.sqrt(power / m) * _cn(rng, m)
    return TransmitPayload(float(power), x, streams)


def _cn(rng, n: int) -> np.ndarray:
    z = rng.standard_normal((n, 2))
    return (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2.0)


@dataclass(frozen=True)
class ReceivedFrame:
    """Observations of every receiver over the two slots.

    `slot2` already has the receiver's own relay-looped signal removed. For
    ``fd_instantaneous`` the second-slot noise is identically zero.
    """

    slot1: dict
    slot2: dict
    relay: np.ndarray
    noise1: dict
    noise2: dict
    noise_relay: np.ndarray

    def combined(self, node) -> np.ndarray:
        return self.slot1[node] + self.slot2[node]


def transmit_two_slots(
    ch: ChannelSet, bf: Beamformer, payload: TransmitPayload, noise_seed, noise_var: float = 1.0
) -> ReceivedFrame:
    """Propagate `payload` through the direct links and the relay."""
    cfg = ch.config
    tx = transmitters(cfg)
    if set(payload.x) != set(tx):
        raise DimensionError("payload transmitters do not match the configuration")
    for t in tx:
        if payload.x[t].shape != (_antennas(cfg, t),):
            raise DimensionError(f"payload for {t} has shape {payload.x[t].shape}")
    rng = np.random.default_rng(noise_seed)
    sigma = math.sqrt(noise_var)
    T = bf.relay

    n_r = sigma * _cn(rng, cfg.N_R)
    y_r = n_r + sum((_to_relay(ch, t) @ payload.x[t] for t in tx), np.zeros(cfg.N_R, complex))

    slot1, slot2, noise1, noise2 = {}, {}, {}, {}
    for r in receivers(cfg):
        n = _antennas(cfg, r)
        n1 = sigma * _cn(rng, n)
        n2 = sigma * _cn(rng, n) if _two_slot(cfg) else np.zeros(n, complex)
        y1 = n1.copy()
        for t in tx:
            H = _direct(ch, r, t) if t != r else None
            if H is not None:
                y1 += H @ payload.x[t]
        relay_in = y_r - _to_relay(ch, r) @ payload.x[r] if r in payload.x else y_r
        slot1[r] = y1
        slot2[r] = _from_relay(ch, r) @ T @ relay_in + n2
        noise1[r], noise2[r] = n1, n2
    return ReceivedFrame(slot1, slot2, y_r, noise1, noise2, n_r)


def desired_signal(ch: ChannelSet, bf: Beamformer, payload: TransmitPayload, node):
    """Effective channel and target vector such that the desired part of
    ``frame.combined(node)`` equals ``H_eff @ target``.

    A BS targets the stacked transmit vectors of its own UEs. A downlink UE
    targets its own streams scaled by the BS gain.
    """
    cfg = ch.config
    H_eff = effective_channel(ch, bf, node)
    if node[0] == "bs":
        j = node[1]
        target = np.concatenate([payload.x[("ue", k, j)] for k in cfg.uplink_ues(j)])
    else:
        j = node[2]
        s = payload.streams[("bs", j)][_stream_slice(cfg, bf, node)]
        target = _bs_gain(bf, j, payload.power) * s
    return H_eff, target


def decorrelate(h_eff, combined, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Apply the pseudo-inverse of the effective channel to the combined observation."""
    return pseudo_inverse(h_eff, rel_tol) @ np.asarray(combined, dtype=np.complex128)


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkRate:
    cell: int
    direction: str
    node: tuple
    rate: float


def _log2det_ratio(Q: np.ndarray, S: np.ndarray) -> float:
    """``log2 det(I + Q^-1 S)`` for Hermitian positive definite `Q`."""
    _, num = np.linalg.slogdet(Q + S)
    _, den = np.linalg.slogdet(Q)
    return max(float(num - den) / math.log(2.0), 0.0)


def link_rates(ch: ChannelSet, bf: Beamformer, power: float) -> list:
    """Achievable rate at every receiver, in bits per channel use.

    A BS gets the sum rate of its own UEs:
    ``pre * log2 det(I + Q^-1 sum_t G_t Sigma_t G_t^H)``, where ``Q`` holds
    the noise ``(slots * I + F T T^H F^H)`` plus any residual interference.
    A UE gets its own stream rate, and the other streams of its serving BS
    count as interference. ``pre`` is 1/2 for two-slot schemes and 1 for
    ``fd_instantaneous``.
    """
    if power < 0:
        raise DomainError(f"power must be nonnegative, got {power}")
    cfg = ch.config
    T = bf.relay
    two_slot = _two_slot(cfg)
    pre = 0.5 if two_slot else 1.0
    slots = 2.0 if two_slot else 1.0

    # square-root transmit covariance of every transmitter
    root = {}
    for t in transmitters(cfg):
        if t[0] == "ue":
            root[t] = math.sqrt(power / _antennas(cfg, t)) * np.eye(_antennas(cfg, t))
        else:
            root[t] = _bs_gain(bf, t[1], power) * bf.bs[t[1]]

    out = []
    for r in receivers(cfg):
        F = _from_relay(ch, r)
        FT = F @ T
        Q = slots * np.eye(F.shape[0]) + FT @ FT.conj().T
        S = np.zeros_like(Q)
        j = _cell_of(r)
        for t, c in root.items():
            if t == r:
                continue
            GC = _link(ch, T, r, t) @ c
            if r[0] == "bs" and t[0] == "ue" and t[2] == j:
                S += GC @ GC.conj().T
            elif r[0] == "ue" and t == ("bs", j):
                mask = np.zeros(GC.shape[1], bool)
                mask[_stream_slice(cfg, bf, r)] = True
                S += GC[:, mask] @ GC[:, mask].conj().T
                Q += GC[:, ~mask] @ GC[:, ~mask].conj().T
            else:
                Q += GC @ GC.conj().T
        direction = "ul" if r[0] == "bs" else "dl"
        out.append(LinkRate(j, direction, r, pre * _log2det_ratio(Q, S)))
    return out


def per_cell_rate(ch: ChannelSet, bf: Beamformer, power: float) -> list:
    """Sum of :func:`link_rates` over the receivers of each cell."""
    rates = [0.0] * ch.config.C
    for lr in link_rates(ch, bf, power):
        rates[lr.cell] += lr.rate
    return rates


def dof_slope(rate_lo: float, rate_hi: float, p_lo: float, p_hi: float) -> float:
    """Rate increase per doubling of power between two operating points."""
    if not (p_hi > p_lo > 0):
        raise DomainError(f"need p_hi > p_lo > 0, got p_lo={p_lo}, p_hi={p_hi}")
    return (rate_hi - rate_lo) / (math.log2(p_hi) - math.log2(p_lo))


def db_to_power(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialReport:
    """Outcome of one channel realization.

    `rates` maps ``(cell, direction)`` to a tuple with one rate per SNR grid
    point. `eff_ranks` maps the same keys to the numeric rank of the
    desired effective channel: ``Hhat_eff,j`` uplink, ``A_j V_j`` downlink.
    """

    trial: int
    seed: int
    channel_seed: int
    feasible: bool
    max_residual: Optional[float]
    eff_ranks: dict
    rates: dict
    snr_db: tuple
    dof_estimate: Optional[float]
    recovery_error: Optional[float]
    diagnostics: object = None


@dataclass(frozen=True)
class Aggregate:
    trials: int
    feasible_trials: int
    infeasible_trials: int
    snr_db: tuple
    mean_rates: dict
    network_rate: tuple
    per_cell_rate: tuple
    dof_estimate: Optional[float]
    per_cell_dof: tuple


@dataclass(frozen=True)
class MonteCarloResult:
    config: NetworkConfig
    seed: int
    reports: list
    aggregate: Aggregate


def trial_seeds(seed: int, trial: int):
    """Channel and noise/payload seeds for one trial, derived from ``(seed, trial)``."""
    state = np.random.SeedSequence([int(seed), int(trial)]).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def _top_two(snr_db):
    order = sorted(range(len(snr_db)), key=lambda i: snr_db[i])
    if len(set(snr_db)) < 2:
        return None
    return order[-2], order[-1]


def _recovery_error(ch, bf, seed, rel_tol) -> float:
    payload = make_payload(ch, bf, 1.0, seed)
    frame = transmit_two_slots(ch, bf, payload, seed, noise_var=0.0)
    worst = 0.0
    for r in receivers(ch.config):
        H_eff, target = desired_signal(ch, bf, payload, r)
        est = decorrelate(H_eff, frame.combined(r), rel_tol)
        worst = max(worst, float(np.linalg.norm(est - target) / np.linalg.norm(target)))
    return worst


def effective_ranks(ch: ChannelSet, bf: Beamformer, rel_tol: float) -> dict:
    cfg = ch.config
    ranks = {}
    for j in range(cfg.C):
        if cfg.bs_receives:
            ranks[(j, "ul")] = numeric_rank(effective_channel(ch, bf, ("bs", j)), rel_tol)
        if cfg.bs_transmits:
            A = cell_downlink_matrix(ch, bf.relay, j)
            ranks[(j, "dl")] = numeric_rank(A @ bf.bs[j], rel_tol)
    return ranks


def run_trial(
    config: NetworkConfig,
    seed: int,
    trial: int,
    snr_db,
    rel_tol: float = DEFAULT_REL_TOL,
    residual_tol: float = 1e-8,
) -> TrialReport:
    """Solve and evaluate one realization; reproducible from ``(seed, trial)`` alone.

    A trial is feasible when the stacked system is consistent and the
    maximum alignment residual is at most `residual_tol`.
    """
    snr_db = tuple(float(s) for s in snr_db)
    ch_seed, noise_seed = trial_seeds(seed, trial)
    ch = sample_channels(config, ch_seed)
    try:
        bf = solve(ch, rel_tol)
    except (Infeasible, RankDeficient) as exc:
        return TrialReport(trial, seed, ch_seed, False, None, {}, {}, snr_db, None, None,
                           getattr(exc, "diagnostics", None))
    residual = interference_residual(ch, bf).max_residual
    if residual > residual_tol:
        return TrialReport(trial, seed, ch_seed, False, residual, {}, {}, snr_db, None, None,
                           bf.diagnostics)

    keys = [(lr.cell, lr.direction) for lr in link_rates(ch, bf, 1.0)]
    rates = {key: [] for key in dict.fromkeys(keys)}
    for s in snr_db:
        acc = {key: 0.0 for key in rates}
        for lr in link_rates(ch, bf, db_to_power(s)):
            acc[(lr.cell, lr.direction)] += lr.rate
        for key, v in acc.items():
            rates[key].append(v)
    rates = {key: tuple(v) for key, v in rates.items()}

    top = _top_two(snr_db)
    dof = None
    if top is not None:
        lo, hi = top
        total = [sum(v[i] for v in rates.values()) for i in range(len(snr_db))]
        dof = dof_slope(total[lo], total[hi], db_to_power(snr_db[lo]), db_to_power(snr_db[hi]))

    return TrialReport(
        trial, seed, ch_seed, True, residual,
        effective_ranks(ch, bf, rel_tol), rates, snr_db, dof,
        _recovery_error(ch, bf, noise_seed, rel_tol), bf.diagnostics,
    )


def monte_carlo(
    config: NetworkConfig,
    trials: int,
    snr_grid_db=DEFAULT_SNR_GRID_DB,
    seed: int = 0,
    rel_tol: float = DEFAULT_REL_TOL,
    residual_tol: float = 1e-8,
) -> MonteCarloResult:
    """Run independent trials and average the feasible ones.

    The DoF estimate is the slope of the mean network sum rate between the
    two highest grid points. Trials run in index order, so the aggregate is
    bit-stable for a fixed ``(config, seed)``.

    Raises
    ------
    AllTrialsInfeasible
        If no trial passes the solvability test.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    snr_db = tuple(float(s) for s in snr_grid_db)
    if not snr_db:
        raise ValueError("snr grid must not be empty")
    reports = [run_trial(config, seed, t, snr_db, rel_tol, residual_tol) for t in range(trials)]
    good = [r for r in reports if r.feasible]
    if not good:
        raise AllTrialsInfeasible(f"all {trials} trials infeasible for {config.scheme} with N_R = {config.N_R}")

    keys = list(good[0].rates)
    mean = {
        key: tuple(sum(r.rates[key][i] for r in good) / len(good) for i in range(len(snr_db)))
        for key in keys
    }
    network = tuple(sum(v[i] for v in mean.values()) for i in range(len(snr_db)))
    cells = tuple(
        tuple(sum(v[i] for key, v in mean.items() if key[0] == j) for i in range(len(snr_db)))
        for j in range(config.C)
    )
    top = _top_two(snr_db)
    dof, cell_dof = None, ()
    if top is not None:
        lo, hi = top
        p_lo, p_hi = db_to_power(snr_db[lo]), db_to_power(snr_db[hi])
        dof = dof_slope(network[lo], network[hi], p_lo, p_hi)
        cell_dof = tuple(dof_slope(c[lo], c[hi], p_lo, p_hi) for c in cells)

    agg = Aggregate(trials, len(good), trials - len(good), snr_db, mean, network, cells, dof, cell_dof)
    return MonteCarloResult(config, int(seed), reports, agg)
