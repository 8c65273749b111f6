"""
Closed-form relay and BS beamformers for relay-aided alignment.

Every relay design reduces to the same linear problem. Each receiving node
contributes a matrix condition ``L @ T @ R == X``, which vectorizes to
``kron(R.T, L) @ vec(T) == vec(X)``. The per-node rows are stacked and the
minimum-norm exact solution is taken. If the stacked system is inconsistent
at the rank tolerance, :class:`~odia.exceptions.Infeasible` is raised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DimensionError, Infeasible, RankDeficient, SchemeError
from .linalg import DEFAULT_REL_TOL, devectorize, hstack, min_norm_solve, numeric_rank, pseudo_inverse
from .network import ChannelSet, Scheme, _uplink_view, fd_views, downlink_view, uplink_view

__all__ = [
    "SolveDiagnostics",
    "Beamformer",
    "ResidualReport",
    "alignment_conditions",
    "solve",
    "solve_imac",
    "solve_ibc",
    "solve_fd",
    "solve_boost",
    "bs_beamformers",
    "interference_residual",
    "effective_channel",
]


@dataclass(frozen=True)
class SolveDiagnostics:
    rows: int
    unknowns: int
    rank: int
    rank_augmented: int
    consistent: bool
    residual: float


@dataclass(frozen=True)
class Beamformer:
    """Relay matrix ``T`` plus optional per-cell BS precoders ``V_j``.

    `bs` holds one ``N x K d`` precoder per cell (``K`` downlink UEs), with
    the columns of UE ``k`` at ``k*d : (k+1)*d``.
    """

    relay: np.ndarray
    scheme: Scheme
    diagnostics: SolveDiagnostics
    bs: Optional[tuple] = None
    streams: Optional[int] = None
    alpha: float = 0.0

    @property
    def T(self) -> np.ndarray:
        return self.relay


@dataclass(frozen=True)
class ResidualReport:
    per_node: tuple
    max_residual: float


def _solve_stacked(conditions, n_r: int, rel_tol: float, scheme: Scheme):
    """Solve ``L T R = X`` jointly for every ``(L, R, X)`` in `conditions`."""
    blocks = [np.kron(R.T, L) for L, R, X in conditions if X.size]
    rhs = [X.reshape(-1, order="F") for L, R, X in conditions if X.size]
    unknowns = n_r * n_r
    if not blocks:
        diag = SolveDiagnostics(0, unknowns, 0, 0, True, 0.0)
        return np.zeros((n_r, n_r), dtype=np.complex128), diag
    H = np.vstack(blocks)
    h = np.concatenate(rhs)
    x, rank, rank_aug = min_norm_solve(H, h, rel_tol)
    norm_h = np.linalg.norm(h)
    residual = float(np.linalg.norm(H @ x - h) / norm_h) if norm_h > 0 else 0.0
    diag = SolveDiagnostics(H.shape[0], unknowns, rank, rank_aug, rank_aug <= rank, residual)
    if not diag.consistent:
        raise Infeasible(
            f"{scheme}: rank([H|h]) = {rank_aug} > rank(H) = {rank} "
            f"({H.shape[0]} equations, {unknowns} unknowns)",
            diag,
        )
    return devectorize(x, n_r), diag


def _views(ch: ChannelSet):
    """All receiving-node views for the channel set's scheme."""
    cfg = ch.config
    s = cfg.scheme
    if s.is_uplink:
        return [uplink_view(ch, j) for j in range(cfg.C)]
    if s is Scheme.IBC:
        return [downlink_view(ch, k, j) for j in range(cfg.C) for k in range(cfg.users(j))]
    bs_views, ue_views = fd_views(ch)
    return bs_views + ue_views


def alignment_conditions(ch: ChannelSet):
    """``(L, R, X)`` triples whose joint solution ``L T R = X`` aligns all interference."""
    return [(v.relay_to_node, v.interference_relay, -v.interference) for v in _views(ch)]


def _check_scheme(ch: ChannelSet, allowed, op: str):
    if ch.config.scheme not in allowed:
        raise SchemeError(f"{op} does not apply to scheme {ch.config.scheme}")


def solve_imac(ch: ChannelSet, rel_tol: float = DEFAULT_REL_TOL) -> Beamformer:
    """Uplink relay beamformer cancelling all inter-cell interference at every BS."""
    _check_scheme(ch, (Scheme.IMAC,), "solve_imac")
    T, diag = _solve_stacked(alignment_conditions(ch), ch.config.N_R, rel_tol, Scheme.IMAC)
    return Beamformer(T, Scheme.IMAC, diag)


def solve_ibc(ch: ChannelSet, rel_tol: float = DEFAULT_REL_TOL) -> Beamformer:
    """Downlink relay beamformer for inter-cell interference, then BS precoders."""
    _check_scheme(ch, (Scheme.IBC,), "solve_ibc")
    T, diag = _solve_stacked(alignment_conditions(ch), ch.config.N_R, rel_tol, Scheme.IBC)
    bf = Beamformer(T, Scheme.IBC, diag, streams=ch.config.d)
    V = bs_beamformers(ch, bf, ch.config.d, rel_tol)
    return Beamformer(T, Scheme.IBC, diag, tuple(V), ch.config.d)


def solve_fd(ch: ChannelSet, rel_tol: float = DEFAULT_REL_TOL) -> Beamformer:
    """Relay beamformer aligning interference at BSs and UEs at once, plus BS precoders.

    BS rows come first (cells ascending), then UE rows (cells ascending, users
    ascending). Under ``hd_ue_fd_bs`` links that do not exist are simply absent
    from the stacked system.
    """
    cfg = ch.config
    _check_scheme(ch, (Scheme.FD, Scheme.FD_INSTANTANEOUS, Scheme.HD_UE_FD_BS), "solve_fd")
    T, diag = _solve_stacked(alignment_conditions(ch), cfg.N_R, rel_tol, cfg.scheme)
    if not cfg.bs_transmits:
        return Beamformer(T, cfg.scheme, diag)
    bf = Beamformer(T, cfg.scheme, diag, streams=cfg.d)
    V = bs_beamformers(ch, bf, cfg.d, rel_tol)
    return Beamformer(T, cfg.scheme, diag, tuple(V), cfg.d)


def solve_boost(ch: ChannelSet, alpha: Optional[float] = None, rel_tol: float = DEFAULT_REL_TOL) -> Beamformer:
    """Uplink relay beamformer that aligns interference and scales desired links by ``1 + alpha``.

    Each BS ``j`` gets the condition ``H^RB_j T H^UR = G_j``, where ``H^UR``
    lists every UE-to-relay channel and ``G_j`` holds ``-H_{j,(k,i)}`` for
    other-cell UEs and ``alpha * H_{j,(k,j)}`` for its own.
    """
    _check_scheme(ch, (Scheme.IMAC_BOOST,), "solve_boost")
    cfg = ch.config
    alpha = cfg.alpha if alpha is None else float(alpha)
    if not np.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha!r}")
    ues = [(k, i) for i in range(cfg.C) for k in range(cfg.users(i))]
    ur_all = hstack([ch.ur[key] for key in ues], cfg.N_R)
    conditions = []
    for j in range(cfg.C):
        target = hstack(
            [(alpha if i == j else -1.0) * ch.ub[(j, k, i)] for k, i in ues], cfg.bs_ant(j)
        )
        conditions.append((ch.rb[j], ur_all, target))
    T, diag = _solve_stacked(conditions, cfg.N_R, rel_tol, Scheme.IMAC_BOOST)
    return Beamformer(T, Scheme.IMAC_BOOST, diag, alpha=alpha)


def solve(ch: ChannelSet, rel_tol: float = DEFAULT_REL_TOL) -> Beamformer:
    """Dispatch to the solver matching ``ch.config.scheme``."""
    s = ch.config.scheme
    if s is Scheme.IMAC:
        return solve_imac(ch, rel_tol)
    if s is Scheme.IBC:
        return solve_ibc(ch, rel_tol)
    if s is Scheme.IMAC_BOOST:
        return solve_boost(ch, rel_tol=rel_tol)
    return solve_fd(ch, rel_tol)


# ---------------------------------------------------------------------------
# BS precoding
# ---------------------------------------------------------------------------


def cell_downlink_matrix(ch: ChannelSet, T: np.ndarray, j: int) -> np.ndarray:
    """Stack ``H_{(k,j),j} + H^RU_(k,j) T H^BR_j`` over the downlink UEs of cell `j`."""
    cfg = ch.config
    rows = [ch.bu[(k, j, j)] + ch.ru[(k, j)] @ T @ ch.br[j] for k in cfg.downlink_ues(j)]
    return np.vstack(rows) if rows else np.zeros((0, cfg.bs_ant(j)), dtype=np.complex128)


def bs_beamformers(ch: ChannelSet, T, d: int, rel_tol: float = DEFAULT_REL_TOL) -> list:
    """Per-cell BS precoders that separate the downlink UEs of each cell.

    With ``A_j`` the stacked effective downlink matrix of cell ``j``, the
    precoder is ``A_j^+`` restricted to the first `d` columns of each UE's
    ``M``-row block. UE ``k`` then sees an identity on its first `d` receive
    antennas and nothing from the other UEs there.

    When ``A_j`` has full row rank (``N >= K M``) the other ``M - d``
    antennas see nothing either. When it only has full column rank, ``A_j^+``
    is a left inverse and cannot zero the other users' rows. In that case the
    selected rows (a ``K d x N`` matrix with full row rank) are inverted
    directly, so the UE's first `d` antennas stay interference-free.

    Raises
    ------
    DimensionError
        If ``d > M`` or ``N < K d``.
    RankDeficient
        If ``A_j`` is neither full row nor full column rank.
    """
    cfg = ch.config
    T = T.relay if isinstance(T, Beamformer) else np.asarray(T)
    d = int(d)
    out = []
    for j in range(cfg.C):
        users = list(cfg.downlink_ues(j))
        if not users:
            out.append(np.zeros((cfg.bs_ant(j), 0), dtype=np.complex128))
            continue
        m = [cfg.ue_ant(k, j) for k in users]
        n = cfg.bs_ant(j)
        if d < 1 or d > min(m):
            raise DimensionError(f"streams per UE d = {d} must satisfy 1 <= d <= M = {min(m)}")
        if n < len(users) * d:
            raise DimensionError(f"N = {n} < K d = {len(users) * d}")
        A = cell_downlink_matrix(ch, T, j)
        rank = numeric_rank(A, rel_tol)
        offsets = np.cumsum([0] + m[:-1])
        cols = np.concatenate([np.arange(o, o + d) for o in offsets])
        if rank == A.shape[0]:
            V = pseudo_inverse(A, rel_tol)[:, cols]
        elif rank == A.shape[1]:
            V = pseudo_inverse(A[cols], rel_tol)
        else:
            raise RankDeficient(f"cell {j}: A_j has rank {rank}, shape {A.shape}")
        out.append(V)
    return out


# ---------------------------------------------------------------------------
# Measurements
# ---------------------------------------------------------------------------


def interference_residual(ch: ChannelSet, bf: Beamformer) -> ResidualReport:
    """Relative Frobenius residual of the alignment condition at each receiving node.

    For a node with interference ``Hbar``, relay-side interference ``Gbar``
    and relay-to-node channel ``F`` this is
    ``||Hbar + F T Gbar||_F / ||Hbar||_F``. Nodes that see no interference
    are omitted. For ``imac_boost`` the uplink alignment condition is used.
    """
    cfg = ch.config
    if cfg.scheme is Scheme.IMAC_BOOST:
        views = [_uplink_view(ch, j) for j in range(cfg.C)]
    else:
        views = _views(ch)
    T = bf.relay
    per_node = []
    for v in views:
        if v.interference.size == 0:
            continue
        num = np.linalg.norm(v.interference + v.relay_to_node @ T @ v.interference_relay)
        per_node.append((v.owner, float(num / np.linalg.norm(v.interference))))
    return ResidualReport(tuple(per_node), max((r for _, r in per_node), default=0.0))


def effective_channel(ch: ChannelSet, bf: Beamformer, node) -> np.ndarray:
    """Desired-signal channel after combining the direct and relayed paths.

    `node` is ``("bs", j)`` for an uplink receiver or ``("ue", k, j)`` for a
    downlink receiver. A BS gets the ``N x sum_k M`` matrix
    ``Hhat_j + H^RB_j T Hhat^UR_j`` over its own transmitting UEs. A UE gets
    the ``M x d`` matrix ``(H_{(k,j),j} + H^RU T H^BR_j) V_(k,j)`` of its own
    streams.
    """
    cfg = ch.config
    T = bf.relay
    kind = node[0]
    if kind == "bs":
        j = node[1]
        v = _uplink_view(ch, j) if cfg.scheme.is_uplink else next(
            b for b in fd_views(ch)[0] if b.owner == ("bs", j)
        )
        return v.desired + v.relay_to_node @ T @ v.desired_relay
    if kind == "ue":
        k, j = node[1], node[2]
        if bf.bs is None:
            raise SchemeError("downlink effective channel needs BS precoders")
        users = list(cfg.downlink_ues(j))
        pos = users.index(k)
        d = bf.streams
        V = bf.bs[j][:, pos * d:(pos + 1) * d]
        return (ch.bu[(k, j, j)] + ch.ru[(k, j)] @ T @ ch.br[j]) @ V
    raise ValueError(f"unknown node {node!r}")
