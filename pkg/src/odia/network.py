"""
Cellular network description, channel realizations and augmented views.

Indices are zero-based throughout: cell ``j`` in ``0..C-1``, user ``k`` in
``0..K_j-1``. A UE is identified by the pair ``(k, j)``.

Channel families stored in :class:`ChannelSet` (keys in brackets):

==========  =======================  ==================================
family      key                      shape / meaning
==========  =======================  ==================================
``ub``      ``(j, k, i)``            N_j x M_(k,i), UE (k,i) -> BS j
``ur``      ``(k, j)``               N_R x M_(k,j), UE (k,j) -> relay
``rb``      ``j``                    N_j x N_R, relay -> BS j
``bu``      ``(k, i, j)``            M x N, BS j -> UE (k,i)
``br``      ``j``                    N_R x N, BS j -> relay
``ru``      ``(k, j)``               M x N_R, relay -> UE (k,j)
``bb``      ``(j, i)``               N x N, BS i -> BS j (i != j)
``uu``      ``(k2, j, k1, i)``       M x M, UE (k1,i) -> UE (k2,j)
==========  =======================  ==================================

The uplink direct channel and the full-duplex UE-to-BS channel are the same
physical link and share the ``ub`` family (likewise ``bu``), so the same
seed yields the same uplink channels under every scheme.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .exceptions import ConfigError, SchemeError
from .linalg import hstack

__all__ = [
    "Scheme",
    "NetworkConfig",
    "ChannelSet",
    "AugmentedView",
    "DofSummary",
    "sample_channels",
    "uplink_view",
    "downlink_view",
    "fd_views",
    "required_relay_antennas",
    "closed_form_dof",
]


class Scheme(str, enum.Enum):
    IMAC = "imac"
    IBC = "ibc"
    FD = "fd"
    FD_INSTANTANEOUS = "fd_instantaneous"
    HD_UE_FD_BS = "hd_ue_fd_bs"
    IMAC_BOOST = "imac_boost"

    def __str__(self):
        return self.value

    @property
    def is_uplink(self) -> bool:
        return self in (Scheme.IMAC, Scheme.IMAC_BOOST)

    @property
    def is_full_duplex(self) -> bool:
        return self in (Scheme.FD, Scheme.FD_INSTANTANEOUS, Scheme.HD_UE_FD_BS)


def parse_scheme(value) -> Scheme:
    """Scheme from its name, ignoring case and surrounding blanks."""
    if isinstance(value, Scheme):
        return value
    try:
        return Scheme(str(value).strip().lower())
    except ValueError:
        names = ", ".join(s.value for s in Scheme)
        raise ConfigError(f"unknown scheme {value!r}; expected one of: {names}") from None


def _count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


@dataclass(frozen=True)
class NetworkConfig:
    """Cell, user and antenna counts plus the alignment scheme.

    `users_per_cell`, `ue_antennas` and `bs_antennas` accept either a single
    integer (symmetric network) or per-cell values: a list of ``K_j``, a list
    of per-user antenna lists ``[[M_(0,0), ...], ...]`` and a list of ``N_j``.
    Per-cell values are only accepted for ``Scheme.IMAC``.

    `streams_per_ue` defaults to ``min(M, N // K)`` (``K`` being the number
    of downlink UEs per cell) for schemes with BS precoding.
    """

    cells: int
    users_per_cell: object
    ue_antennas: object
    bs_antennas: object
    relay_antennas: int
    scheme: Scheme = Scheme.IMAC
    streams_per_ue: Optional[int] = None
    alpha: float = 0.0
    uplink_users: Optional[int] = None
    downlink_users: Optional[int] = None

    _K: tuple = field(init=False, repr=False, compare=False)
    _M: tuple = field(init=False, repr=False, compare=False)
    _N: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        setattr_ = object.__setattr__
        setattr_(self, "scheme", parse_scheme(self.scheme))
        C = _count(self.cells, "cells")

        if isinstance(self.users_per_cell, (list, tuple)):
            K = tuple(_count(k, "users_per_cell") for k in self.users_per_cell)
            if len(K) != C:
                raise ConfigError(f"users_per_cell lists {len(K)} cells, expected {C}")
        else:
            K = (_count(self.users_per_cell, "users_per_cell"),) * C

        if isinstance(self.ue_antennas, (list, tuple)):
            if len(self.ue_antennas) != C or not all(
                isinstance(row, (list, tuple)) for row in self.ue_antennas
            ):
                raise ConfigError("ue_antennas must be an integer or one list of per-user counts per cell")
            M = tuple(tuple(_count(m, "ue_antennas") for m in row) for row in self.ue_antennas)
            for j, row in enumerate(M):
                if len(row) != K[j]:
                    raise ConfigError(f"ue_antennas for cell {j} lists {len(row)} users, expected {K[j]}")
        else:
            m = _count(self.ue_antennas, "ue_antennas")
            M = tuple((m,) * k for k in K)

        if isinstance(self.bs_antennas, (list, tuple)):
            N = tuple(_count(n, "bs_antennas") for n in self.bs_antennas)
            if len(N) != C:
                raise ConfigError(f"bs_antennas lists {len(N)} cells, expected {C}")
        else:
            N = (_count(self.bs_antennas, "bs_antennas"),) * C

        setattr_(self, "_K", K)
        setattr_(self, "_M", M)
        setattr_(self, "_N", N)
        _count(self.relay_antennas, "relay_antennas")

        symmetric = len(set(K)) == 1 and len({m for row in M for m in row}) == 1 and len(set(N)) == 1
        if not symmetric and self.scheme is not Scheme.IMAC:
            raise ConfigError(f"asymmetric configurations are only supported for scheme imac, not {self.scheme}")

        alpha = float(self.alpha)
        if not np.isfinite(alpha) or alpha < 0:
            raise ConfigError(f"alpha must be a finite nonnegative number, got {self.alpha!r}")
        setattr_(self, "alpha", alpha)

        if self.scheme is Scheme.HD_UE_FD_BS:
            if self.uplink_users is None or self.downlink_users is None:
                raise ConfigError("hd_ue_fd_bs needs uplink_users and downlink_users")
            k1 = _count(self.uplink_users, "uplink_users", 0)
            k2 = _count(self.downlink_users, "downlink_users", 0)
            if k1 + k2 != K[0]:
                raise ConfigError(f"uplink_users + downlink_users = {k1 + k2} must equal users_per_cell = {K[0]}")

        if self.has_bs_precoding:
            m, n, kd = M[0][0], N[0], self.downlink_per_cell
            d = self.streams_per_ue
            if d is None:
                d = min(m, n // kd) if kd else 0
                setattr_(self, "streams_per_ue", d)
            elif kd:
                d = _count(d, "streams_per_ue")
                if d > m:
                    raise ConfigError(f"streams_per_ue = {d} exceeds ue_antennas = {m} (d <= M required)")
                if n < kd * d:
                    raise ConfigError(f"bs_antennas = {n} < users x streams = {kd * d} (N >= K d required)")
            if kd and d < 1:
                raise ConfigError(f"bs_antennas = {n} cannot carry one stream to each of {kd} users")

    # -- derived quantities -------------------------------------------------

    @property
    def C(self) -> int:
        return self.cells

    @property
    def N_R(self) -> int:
        return self.relay_antennas

    @property
    def is_symmetric(self) -> bool:
        return (
            len(set(self._K)) == 1
            and len({m for row in self._M for m in row}) == 1
            and len(set(self._N)) == 1
        )

    def users(self, j: int) -> int:
        return self._K[j]

    def ue_ant(self, k: int, j: int) -> int:
        return self._M[j][k]

    def bs_ant(self, j: int) -> int:
        return self._N[j]

    def _uniform(self, values, name):
        if len(set(values)) != 1:
            raise ConfigError(f"{name} differs between nodes; use the per-node accessor")
        return values[0]

    @property
    def K(self) -> int:
        return self._uniform(self._K, "users_per_cell")

    @property
    def M(self) -> int:
        return self._uniform([m for row in self._M for m in row], "ue_antennas")

    @property
    def N(self) -> int:
        return self._uniform(self._N, "bs_antennas")

    @property
    def d(self) -> Optional[int]:
        return self.streams_per_ue

    @property
    def has_bs_precoding(self) -> bool:
        return self.scheme in (Scheme.IBC, Scheme.FD, Scheme.FD_INSTANTANEOUS, Scheme.HD_UE_FD_BS)

    @property
    def uplink_per_cell(self) -> int:
        """Number of transmitting UEs per cell."""
        if self.scheme is Scheme.IBC:
            return 0
        if self.scheme is Scheme.HD_UE_FD_BS:
            return self.uplink_users
        return self._K[0]

    @property
    def downlink_per_cell(self) -> int:
        """Number of receiving UEs per cell."""
        if self.scheme.is_uplink:
            return 0
        if self.scheme is Scheme.HD_UE_FD_BS:
            return self.downlink_users
        return self._K[0]

    def uplink_ues(self, j: int) -> range:
        """User indices in cell `j` that transmit."""
        return range(self.users(j)) if self.scheme.is_uplink else range(self.uplink_per_cell)

    def downlink_ues(self, j: int) -> range:
        """User indices in cell `j` that receive."""
        if self.scheme is Scheme.HD_UE_FD_BS:
            return range(self.uplink_users, self.uplink_users + self.downlink_users)
        return range(self.downlink_per_cell)

    @property
    def bs_transmits(self) -> bool:
        return self.downlink_per_cell > 0

    @property
    def bs_receives(self) -> bool:
        return self.uplink_per_cell > 0

    def with_relay_antennas(self, n_r: int) -> "NetworkConfig":
        return _replace(self, relay_antennas=n_r)


def _replace(cfg: NetworkConfig, **changes) -> NetworkConfig:
    kwargs = dict(
        cells=cfg.cells,
        users_per_cell=cfg.users_per_cell,
        ue_antennas=cfg.ue_antennas,
        bs_antennas=cfg.bs_antennas,
        relay_antennas=cfg.relay_antennas,
        scheme=cfg.scheme,
        streams_per_ue=cfg.streams_per_ue,
        alpha=cfg.alpha,
        uplink_users=cfg.uplink_users,
        downlink_users=cfg.downlink_users,
    )
    kwargs.update(changes)
    return NetworkConfig(**kwargs)


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------

_FAMILY_CODES = {"ub": 1, "ur": 2, "rb": 3, "bu": 4, "br": 5, "ru": 6, "bb": 7, "uu": 8}


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every channel present for ``config.scheme``.

    Each family is a dict from index key to matrix; see the module docstring.
    Families that the scheme does not use are empty dicts.
    """

    config: NetworkConfig
    seed: int
    ub: dict = field(default_factory=dict)
    ur: dict = field(default_factory=dict)
    rb: dict = field(default_factory=dict)
    bu: dict = field(default_factory=dict)
    br: dict = field(default_factory=dict)
    ru: dict = field(default_factory=dict)
    bb: dict = field(default_factory=dict)
    uu: dict = field(default_factory=dict)

    def families(self):
        return {name: getattr(self, name) for name in _FAMILY_CODES}

    def scaled(self, factor: complex) -> "ChannelSet":
        """Copy with every channel matrix multiplied by `factor`."""
        fams = {
            name: {key: factor * mat for key, mat in fam.items()}
            for name, fam in self.families().items()
        }
        return ChannelSet(self.config, self.seed, **fams)


def _cn(seed: int, family: str, key, shape) -> np.ndarray:
    """CN(0, 1) matrix from a stream keyed by (seed, family, key)."""
    key = key if isinstance(key, tuple) else (key,)
    rng = np.random.default_rng([seed, _FAMILY_CODES[family], *key])
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def sample_channels(config: NetworkConfig, seed: int) -> ChannelSet:
    """Draw an i.i.d. Rayleigh realization of every channel the scheme uses.

    Each matrix is drawn from its own generator keyed by ``(seed, family,
    indices)``, so a link has the same realization under every scheme and
    for every network size that contains it.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    cfg = config
    C, NR = cfg.C, cfg.N_R
    fam = {name: {} for name in _FAMILY_CODES}
    tx_ues = [(k, i) for i in range(C) for k in cfg.uplink_ues(i)]
    rx_ues = [(k, i) for i in range(C) for k in cfg.downlink_ues(i)]

    def draw(name, key, shape):
        fam[name][key] = _cn(seed, name, key, shape)

    if cfg.bs_receives:
        for j in range(C):
            for k, i in tx_ues:
                draw("ub", (j, k, i), (cfg.bs_ant(j), cfg.ue_ant(k, i)))
            draw("rb", j, (cfg.bs_ant(j), NR))
    for k, i in tx_ues:
        draw("ur", (k, i), (NR, cfg.ue_ant(k, i)))

    if cfg.bs_transmits:
        for j in range(C):
            draw("br", j, (NR, cfg.bs_ant(j)))
            for k, i in rx_ues:
                draw("bu", (k, i, j), (cfg.ue_ant(k, i), cfg.bs_ant(j)))
        for k, i in rx_ues:
            draw("ru", (k, i), (cfg.ue_ant(k, i), NR))

    if cfg.scheme.is_full_duplex:
        if cfg.bs_transmits and cfg.bs_receives:
            for j in range(C):
                for i in range(C):
                    if i != j:
                        draw("bb", (j, i), (cfg.bs_ant(j), cfg.bs_ant(i)))
        for k2, j in rx_ues:
            for k1, i in tx_ues:
                if (k1, i) != (k2, j):
                    draw("uu", (k2, j, k1, i), (cfg.ue_ant(k2, j), cfg.ue_ant(k1, i)))

    return ChannelSet(cfg, seed, **fam)


# ---------------------------------------------------------------------------
# Augmented views
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentedView:
    """Stacked channels seen by one receiving node.

    The alignment condition at this node reads
    ``interference + relay_to_node @ T @ interference_relay == 0`` and the
    desired signal arrives through ``desired + relay_to_node @ T @ desired_relay``.
    """

    owner: tuple
    interference: np.ndarray
    interference_relay: np.ndarray
    desired: np.ndarray
    desired_relay: np.ndarray
    relay_to_node: np.ndarray


def _check_cell(cfg: NetworkConfig, j: int):
    if not 0 <= j < cfg.C:
        raise IndexError(f"cell index {j} out of range for {cfg.C} cells")


def _require(cfg: NetworkConfig, allowed, op: str):
    if cfg.scheme not in allowed:
        names = ", ".join(s.value for s in allowed)
        raise SchemeError(f"{op} requires scheme {names}, got {cfg.scheme}")


def _uplink_view(ch: ChannelSet, j: int) -> AugmentedView:
    cfg = ch.config
    n, nr = cfg.bs_ant(j), cfg.N_R
    others = [(k, i) for i in range(cfg.C) if i != j for k in cfg.uplink_ues(i)]
    own = [(k, j) for k in cfg.uplink_ues(j)]
    return AugmentedView(
        owner=("bs", j),
        interference=hstack([ch.ub[(j, k, i)] for k, i in others], n),
        interference_relay=hstack([ch.ur[key] for key in others], nr),
        desired=hstack([ch.ub[(j, k, i)] for k, i in own], n),
        desired_relay=hstack([ch.ur[key] for key in own], nr),
        relay_to_node=ch.rb[j],
    )


def uplink_view(ch: ChannelSet, j: int) -> AugmentedView:
    """Uplink view of BS `j`: other-cell UEs interfere, own-cell UEs are desired."""
    _require(ch.config, (Scheme.IMAC, Scheme.IMAC_BOOST), "uplink_view")
    _check_cell(ch.config, j)
    return _uplink_view(ch, j)


def downlink_view(ch: ChannelSet, k: int, j: int) -> AugmentedView:
    """Downlink view of UE ``(k, j)``: other-cell BSs interfere."""
    cfg = ch.config
    _require(cfg, (Scheme.IBC,), "downlink_view")
    _check_cell(cfg, j)
    if not 0 <= k < cfg.users(j):
        raise IndexError(f"user index {k} out of range for {cfg.users(j)} users")
    m, nr = cfg.ue_ant(k, j), cfg.N_R
    others = [i for i in range(cfg.C) if i != j]
    return AugmentedView(
        owner=("ue", k, j),
        interference=hstack([ch.bu[(k, j, i)] for i in others], m),
        interference_relay=hstack([ch.br[i] for i in others], nr),
        desired=ch.bu[(k, j, j)],
        desired_relay=ch.br[j],
        relay_to_node=ch.ru[(k, j)],
    )


def fd_views(ch: ChannelSet):
    """Full-duplex views for every receiving BS and every receiving UE.

    Inter-cell BSs and all other transmitting UEs (including intra-cell ones,
    at a UE receiver) interfere. For ``hd_ue_fd_bs`` only links that exist
    between uplink UEs, downlink UEs and the BSs appear.

    Returns
    -------
    bs_views : list of AugmentedView
        One per cell when BSs receive, else empty.
    ue_views : list of AugmentedView
        One per receiving UE, cells ascending then users ascending.
    """
    cfg = ch.config
    _require(cfg, (Scheme.FD, Scheme.FD_INSTANTANEOUS, Scheme.HD_UE_FD_BS), "fd_views")
    nr = cfg.N_R
    tx_ues = [(k, i) for i in range(cfg.C) for k in cfg.uplink_ues(i)]
    tx_bs = cfg.bs_transmits

    bs_views = []
    if cfg.bs_receives:
        for j in range(cfg.C):
            others_bs = [i for i in range(cfg.C) if i != j] if tx_bs else []
            others_ue = [(k, i) for k, i in tx_ues if i != j]
            own_ue = [(k, i) for k, i in tx_ues if i == j]
            n = cfg.bs_ant(j)
            bs_views.append(AugmentedView(
                owner=("bs", j),
                interference=hstack(
                    [ch.bb[(j, i)] for i in others_bs] + [ch.ub[(j, k, i)] for k, i in others_ue], n
                ),
                interference_relay=hstack(
                    [ch.br[i] for i in others_bs] + [ch.ur[key] for key in others_ue], nr
                ),
                desired=hstack([ch.ub[(j, k, i)] for k, i in own_ue], n),
                desired_relay=hstack([ch.ur[key] for key in own_ue], nr),
                relay_to_node=ch.rb[j],
            ))

    ue_views = []
    for j in range(cfg.C):
        for k in cfg.downlink_ues(j):
            m = cfg.ue_ant(k, j)
            others_bs = [i for i in range(cfg.C) if i != j]
            others_ue = [key for key in tx_ues if key != (k, j)]
            ue_views.append(AugmentedView(
                owner=("ue", k, j),
                interference=hstack(
                    [ch.bu[(k, j, i)] for i in others_bs] + [ch.uu[(k, j, k1, i)] for k1, i in others_ue], m
                ),
                interference_relay=hstack(
                    [ch.br[i] for i in others_bs] + [ch.ur[key] for key in others_ue], nr
                ),
                desired=ch.bu[(k, j, j)],
                desired_relay=ch.br[j],
                relay_to_node=ch.ru[(k, j)],
            ))
    return bs_views, ue_views


# ---------------------------------------------------------------------------
# Feasibility bounds and closed-form DoF
# ---------------------------------------------------------------------------


def required_relay_antennas(config: NetworkConfig) -> int:
    """Relay antenna count sufficient for a beamformer to exist (w.p. 1)."""
    cfg = config
    C = cfg.C
    s = cfg.scheme
    if s is Scheme.IMAC:
        ue_total = [sum(cfg.ue_ant(k, i) for k in range(cfg.users(i))) for i in range(C)]
        interferers = max(sum(ue_total) - ue_total[j] for j in range(C))
        return max(interferers, sum(cfg.bs_ant(j) for j in range(C)))
    K, M, N = cfg.K, cfg.M, cfg.N
    if s is Scheme.IMAC_BOOST:
        return max(C * K * M, C * N)
    if s is Scheme.IBC:
        return max((C - 1) * N, C * K * M)
    if s in (Scheme.FD, Scheme.FD_INSTANTANEOUS):
        return C * (K * M + N)
    # Half-duplex UEs with full-duplex BSs: same Khatri-Rao argument with the
    # non-existing links removed from both factors.
    k1, k2 = cfg.uplink_users, cfg.downlink_users
    # receiver-side factor: one block per receiving node
    terms = [(C * N if k1 else 0) + C * k2 * M]
    # relay-side factor: each receiver's interference width
    if k1:
        terms.append((C - 1) * (k1 * M + (N if k2 else 0)))
    if k2:
        terms.append((C - 1) * N + C * k1 * M)
    return max(terms)


@dataclass(frozen=True)
class DofSummary:
    """Closed-form degrees of freedom.

    `per_cell_each` always lists one value per cell. For asymmetric networks
    `per_cell` is the mean over cells and the two reference bounds are None.
    """

    per_cell: Fraction
    per_bs: Fraction
    per_ue: Fraction
    network_total: Fraction
    per_cell_each: tuple
    linear_coop_bound: Optional[Fraction] = None
    imac_info_bound: Optional[Fraction] = None


def closed_form_dof(config: NetworkConfig) -> DofSummary:
    """Achievable DoF of the configured scheme, with the two reference bounds."""
    cfg = config
    C = cfg.C
    F = Fraction
    s = cfg.scheme

    if not cfg.is_symmetric:
        each = tuple(
            F(min(cfg.bs_ant(j), sum(cfg.ue_ant(k, j) for k in range(cfg.users(j)))), 2)
            for j in range(C)
        )
        total = sum(each, F(0))
        return DofSummary(
            per_cell=total / C,
            per_bs=total / C,
            per_ue=total / sum(cfg.users(j) for j in range(C)),
            network_total=total,
            per_cell_each=each,
        )

    K, M, N = cfg.K, cfg.M, cfg.N
    if s in (Scheme.IMAC, Scheme.IMAC_BOOST):
        cell = F(min(N, K * M), 2)
        bs, ue = cell, cell / K
    elif s is Scheme.IBC:
        cell = F(min(K * cfg.d, N), 2)
        bs, ue = cell, cell / K
    elif s in (Scheme.FD, Scheme.FD_INSTANTANEOUS):
        bs = F(min(K * M, N), 2)
        ue = min(F(M), F(N, K)) / 2
        if s is Scheme.FD_INSTANTANEOUS:
            bs, ue = 2 * bs, 2 * ue
        cell = bs + K * ue
    else:
        k1, k2 = cfg.uplink_users, cfg.downlink_users
        bs = F(min(k1 * M, N), 2)
        ue = min(F(M), F(N, k2)) / 2 if k2 else F(0)
        cell = bs + k2 * ue

    return DofSummary(
        per_cell=cell,
        per_bs=bs,
        per_ue=ue,
        network_total=C * cell,
        per_cell_each=(cell,) * C,
        linear_coop_bound=F(K * M + N),
        imac_info_bound=F(K * M * N, K * M + N),
    )
