"""
Dense complex linear algebra used by the alignment solvers.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; every
public function converts its inputs with :func:`as_matrix`, which rejects
NaN/Inf entries. Ranks are numeric: a singular value counts when it exceeds
``rel_tol * sigma_max``.

The Kruskal-type ranks are computed by exhaustive subset enumeration. Keep
the number of columns (or blocks) at or below about 12.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import Inconsistent, PartitionMismatch, ShapeError

__all__ = [
    "DEFAULT_REL_TOL",
    "PartitionedMatrix",
    "as_matrix",
    "check_tol",
    "kron",
    "khatri_rao",
    "vectorize",
    "devectorize",
    "numeric_rank",
    "kruskal_rank",
    "generalized_kruskal_rank",
    "pseudo_inverse",
    "solve_consistent",
    "min_norm_solve",
    "hstack",
]

DEFAULT_REL_TOL = 1e-10


def check_tol(rel_tol: float) -> float:
    rel_tol = float(rel_tol)
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol!r}")
    return rel_tol


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return `a` as a 2-D complex128 array, rejecting non-finite entries."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def _as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.complex128)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def hstack(blocks: Sequence[np.ndarray], rows: int) -> np.ndarray:
    """Concatenate blocks column-wise; an empty list gives a ``rows x 0`` matrix."""
    if not blocks:
        return np.zeros((rows, 0), dtype=np.complex128)
    return np.hstack(blocks).astype(np.complex128, copy=False)


@dataclass(frozen=True)
class PartitionedMatrix:
    """Column-partitioned matrix ``[A_1 ... A_D]``.

    All blocks share the same row count. Block widths may differ.
    """

    blocks: tuple

    def __init__(self, blocks):
        blocks = tuple(as_matrix(b, "block") for b in blocks)
        if not blocks:
            raise ShapeError("a partitioned matrix needs at least one block")
        rows = blocks[0].shape[0]
        if any(b.shape[0] != rows for b in blocks):
            raise ShapeError("all blocks must have the same number of rows")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def uniform(cls, a, width: int) -> "PartitionedMatrix":
        """Split `a` into consecutive blocks of `width` columns."""
        a = as_matrix(a)
        if width < 1 or a.shape[1] % width:
            raise ShapeError(f"{a.shape[1]} columns cannot be split into blocks of {width}")
        return cls([a[:, s:s + width] for s in range(0, a.shape[1], width)])

    @property
    def D(self) -> int:
        return len(self.blocks)

    @property
    def rows(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def widths(self) -> tuple:
        return tuple(b.shape[1] for b in self.blocks)

    def to_matrix(self) -> np.ndarray:
        return hstack(list(self.blocks), self.rows)


def kron(a, b) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    return np.kron(as_matrix(a, "A"), as_matrix(b, "B"))


def khatri_rao(a: PartitionedMatrix, b: PartitionedMatrix) -> np.ndarray:
    """Partition-wise Kronecker product ``[A_1 (x) B_1, ..., A_D (x) B_D]``."""
    if a.D != b.D:
        raise PartitionMismatch(f"partition counts differ: {a.D} vs {b.D}")
    rows = a.rows * b.rows
    return hstack([np.kron(x, y) for x, y in zip(a.blocks, b.blocks)], rows)


def vectorize(a) -> np.ndarray:
    """Stack the columns of `a` into a single vector."""
    return as_matrix(a).reshape(-1, order="F")


def devectorize(v, rows: int) -> np.ndarray:
    """Inverse of :func:`vectorize` for a matrix with `rows` rows."""
    v = _as_vector(v)
    if rows < 1 or v.size % rows:
        raise ShapeError(f"vector of length {v.size} cannot be reshaped to {rows} rows")
    return v.reshape((rows, v.size // rows), order="F")


def _rank_from_singular_values(s: np.ndarray, rel_tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def numeric_rank(a, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Number of singular values above ``rel_tol * sigma_max``."""
    rel_tol = check_tol(rel_tol)
    a = as_matrix(a)
    if a.size == 0:
        return 0
    return _rank_from_singular_values(np.linalg.svd(a, compute_uv=False), rel_tol)


def _full_column_rank(a: np.ndarray, rel_tol: float) -> bool:
    if a.shape[1] == 0:
        return True
    if a.shape[1] > a.shape[0]:
        return False
    return _rank_from_singular_values(np.linalg.svd(a, compute_uv=False), rel_tol) == a.shape[1]


def kruskal_rank(a, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Largest ``r`` such that every set of ``r`` columns is linearly independent."""
    rel_tol = check_tol(rel_tol)
    a = as_matrix(a)
    rows, cols = a.shape
    for r in range(1, min(rows, cols) + 1):
        for idx in itertools.combinations(range(cols), r):
            if not _full_column_rank(a[:, idx], rel_tol):
                return r - 1
    return min(rows, cols)


def generalized_kruskal_rank(a: PartitionedMatrix, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Largest ``r`` such that any ``r`` blocks, concatenated, have full column rank."""
    rel_tol = check_tol(rel_tol)
    for r in range(1, a.D + 1):
        for idx in itertools.combinations(range(a.D), r):
            sub = hstack([a.blocks[i] for i in idx], a.rows)
            if not _full_column_rank(sub, rel_tol):
                return r - 1
    return a.D


def pseudo_inverse(a, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with singular values below the cutoff dropped."""
    rel_tol = check_tol(rel_tol)
    a = as_matrix(a)
    if a.size == 0:
        return np.zeros((a.shape[1], a.shape[0]), dtype=np.complex128)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    r = _rank_from_singular_values(s, rel_tol)
    return (vh[:r].conj().T / s[:r]) @ u[:, :r].conj().T


def min_norm_solve(h_mat, h_vec, rel_tol: float = DEFAULT_REL_TOL):
    """Minimum-norm least-squares solve that also reports both ranks.

    Returns
    -------
    x : ndarray
        ``pinv(H) @ h``.
    rank : int
        Numeric rank of ``H``.
    rank_augmented : int
        Numeric rank of ``[H | h]``.
    """
    rel_tol = check_tol(rel_tol)
    h_mat = as_matrix(h_mat, "H")
    h_vec = _as_vector(h_vec, "h")
    if h_vec.size != h_mat.shape[0]:
        raise ShapeError(f"h has length {h_vec.size}, H has {h_mat.shape[0]} rows")
    if h_mat.size == 0:
        x = np.zeros(h_mat.shape[1], dtype=np.complex128)
        rank_aug = 1 if np.any(h_vec != 0) else 0
        return x, 0, rank_aug
    u, s, vh = np.linalg.svd(h_mat, full_matrices=False)
    rank = _rank_from_singular_values(s, rel_tol)
    x = vh[:rank].conj().T @ ((u[:, :rank].conj().T @ h_vec) / s[:rank])
    aug = np.column_stack([h_mat, h_vec])
    rank_aug = _rank_from_singular_values(np.linalg.svd(aug, compute_uv=False), rel_tol)
    return x, rank, rank_aug


def solve_consistent(h_mat, h_vec, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Minimum-norm exact solution of ``H x = h``.

    Raises
    ------
    Inconsistent
        If ``rank([H | h]) > rank(H)`` at the given tolerance.
    """
    x, rank, rank_aug = min_norm_solve(h_mat, h_vec, rel_tol)
    if rank_aug > rank:
        raise Inconsistent(
            f"rank([H|h]) = {rank_aug} exceeds rank(H) = {rank}", rank, rank_aug
        )
    return x
