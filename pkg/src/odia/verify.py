"""Quick invariant checks at desk sizes, used by ``odia verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import Infeasible
from .linalg import (
    PartitionedMatrix,
    generalized_kruskal_rank,
    kron,
    kruskal_rank,
    numeric_rank,
    vectorize,
)
from .network import NetworkConfig, Scheme, sample_channels, required_relay_antennas
from .solver import cell_downlink_matrix, effective_channel, interference_residual, solve

TOL = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _tensor_identities(rng, n=50):
    worst = 0.0
    for _ in range(n):
        p, q, r, s = rng.integers(2, 5, size=4)
        A, X, B = _crandn(rng, p, q), _crandn(rng, q, r), _crandn(rng, r, s)
        worst = max(worst, np.linalg.norm(vectorize(A @ X @ B) - kron(B.T, A) @ vectorize(X)))
        worst = max(worst, np.linalg.norm(kron(A, B).T - kron(A.T, B.T)))
        alpha = complex(*rng.standard_normal(2))
        worst = max(worst, np.linalg.norm(kron(alpha * A, B) - alpha * kron(A, B)))
    return Check("kronecker identities", worst <= 1e-12, f"max error {worst:.2e}")


def _kruskal(rng, n=40):
    bad = 0
    for _ in range(n):
        i, l, d = int(rng.integers(1, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 5))
        A = PartitionedMatrix([_crandn(rng, i, l) for _ in range(d)])
        if generalized_kruskal_rank(A) != min(i // l, d):
            bad += 1
        M = A.to_matrix()
        if not kruskal_rank(M) <= numeric_rank(M) <= min(M.shape):
            bad += 1
    return Check("Kruskal rank formulas", bad == 0, f"{bad} violations in {n} draws")


def _khatri_rao_bound(rng, n=100):
    bad = 0
    for _ in range(n):
        d = int(rng.integers(1, 5))
        i, j = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        A = PartitionedMatrix([_crandn(rng, i, int(rng.integers(1, 3))) for _ in range(d)])
        B = PartitionedMatrix([_crandn(rng, j, int(rng.integers(1, 3))) for _ in range(d)])
        ka, kb = generalized_kruskal_rank(A), generalized_kruskal_rank(B)
        kab = generalized_kruskal_rank(PartitionedMatrix([np.kron(a, b) for a, b in zip(A.blocks, B.blocks)]))
        if ka == 0 or kb == 0:
            bad += kab != 0
        else:
            bad += kab < min(ka + kb - 1, d)
    return Check("Khatri-Rao generalized Kruskal bound", bad == 0, f"{bad} violations in {n} draws")


def _scheme_residuals(seeds):
    cases = [
        NetworkConfig(3, 2, 2, 4, 12, "imac"),
        NetworkConfig(2, 2, 2, 4, 8, "ibc"),
        NetworkConfig(2, 2, 2, 4, 16, "fd"),
        NetworkConfig(2, 2, 2, 4, 12, "hd_ue_fd_bs", uplink_users=1, downlink_users=1),
        NetworkConfig(3, 2, 2, 4, 12, "imac_boost", alpha=1.0),
    ]
    out = []
    for cfg in cases:
        worst, rank_ok = 0.0, True
        for seed in seeds:
            ch = sample_channels(cfg, seed)
            bf = solve(ch)
            worst = max(worst, interference_residual(ch, bf).max_residual)
            if cfg.scheme.is_uplink:
                for j in range(cfg.C):
                    H = effective_channel(ch, bf, ("bs", j))
                    rank_ok &= numeric_rank(H) == min(cfg.N, cfg.K * cfg.M)
                    if cfg.scheme is Scheme.IMAC_BOOST:
                        own = np.hstack([ch.ub[(j, k, j)] for k in range(cfg.K)])
                        err = np.linalg.norm(H - (1 + cfg.alpha) * own) / np.linalg.norm(own)
                        worst = max(worst, err)
            if bf.bs is not None:
                for j in range(cfg.C):
                    AV = cell_downlink_matrix(ch, bf.relay, j) @ bf.bs[j]
                    target = _block_identity(cfg, bf.streams)
                    worst = max(worst, float(np.max(np.abs(AV - target))))
        out.append(Check(
            f"{cfg.scheme} alignment at N_R={cfg.N_R}",
            worst <= TOL and rank_ok,
            f"max residual {worst:.2e}" + ("" if rank_ok else ", effective rank deficient"),
        ))
    return out


def _block_identity(cfg, d):
    users = cfg.downlink_per_cell
    m = cfg.M
    E = np.zeros((users * m, users * d))
    for k in range(users):
        E[k * m:k * m + d, k * d:(k + 1) * d] = np.eye(d)
    return E


def _infeasible(seeds):
    out = []
    for cfg in (NetworkConfig(3, 2, 2, 4, 9, "imac"), NetworkConfig(2, 1, 1, 1, 1, "imac"),
                NetworkConfig(2, 1, 1, 1, 3, "fd")):
        failures = 0
        for seed in seeds:
            try:
                solve(sample_channels(cfg, seed))
            except Infeasible:
                failures += 1
        out.append(Check(
            f"{cfg.scheme} infeasible at N_R={cfg.N_R} (< {required_relay_antennas(cfg)})",
            failures == len(seeds),
            f"{failures}/{len(seeds)} realizations rejected",
        ))
    return out


def _reduction(seeds):
    worst = 0.0
    for seed in seeds:
        hd = NetworkConfig(3, 2, 2, 4, 12, "hd_ue_fd_bs", uplink_users=2, downlink_users=0)
        im = NetworkConfig(3, 2, 2, 4, 12, "imac")
        T1 = solve(sample_channels(hd, seed)).relay
        T2 = solve(sample_channels(im, seed)).relay
        worst = max(worst, float(np.max(np.abs(T1 - T2))))
    return Check("hd_ue_fd_bs with no downlink UEs equals imac", worst <= 1e-10, f"max |dT| {worst:.2e}")


def run_checks(seed: int = 0, seeds: int = 5) -> list:
    """Run every check and return the list of :class:`Check` results."""
    rng = np.random.default_rng(seed)
    seed_list = [seed + s for s in range(seeds)]
    checks = [_tensor_identities(rng), _kruskal(rng), _khatri_rao_bound(rng)]
    checks += _scheme_residuals(seed_list)
    checks += _infeasible(seed_list)
    checks.append(_reduction(seed_list))
    return checks


__all__ = ["Check", "run_checks"]
