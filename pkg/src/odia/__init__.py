"""Relay-aided opposite-directional interference alignment for MIMO cellular networks."""

from .exceptions import (
    AllTrialsInfeasible,
    ConfigError,
    DimensionError,
    DomainError,
    Inconsistent,
    Infeasible,
    OdiaError,
    PartitionMismatch,
    RankDeficient,
    SchemeError,
    ShapeError,
)
from .linalg import (
    PartitionedMatrix,
    devectorize,
    generalized_kruskal_rank,
    khatri_rao,
    kron,
    kruskal_rank,
    min_norm_solve,
    numeric_rank,
    pseudo_inverse,
    solve_consistent,
    vectorize,
)
from .network import (
    ChannelSet,
    DofSummary,
    NetworkConfig,
    Scheme,
    closed_form_dof,
    downlink_view,
    fd_views,
    required_relay_antennas,
    sample_channels,
    uplink_view,
)
from .solver import (
    Beamformer,
    bs_beamformers,
    effective_channel,
    interference_residual,
    solve,
    solve_boost,
    solve_fd,
    solve_ibc,
    solve_imac,
)
from .simulate import (
    decorrelate,
    dof_slope,
    link_rates,
    make_payload,
    monte_carlo,
    per_cell_rate,
    run_trial,
    transmit_two_slots,
)

__version__ = "0.1.0"
