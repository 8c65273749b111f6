"""Exception hierarchy shared by all odia modules."""


class OdiaError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(OdiaError, ValueError):
    """Operand dimensions are incompatible with the requested operation."""


class PartitionMismatch(ShapeError):
    """Two partitioned matrices do not have the same number of blocks."""


class Inconsistent(OdiaError):
    """The linear system ``H x = h`` has no exact solution.

    Attributes
    ----------
    rank : int
        Numeric rank of ``H``.
    rank_augmented : int
        Numeric rank of ``[H | h]``.
    """

    def __init__(self, message, rank=None, rank_augmented=None):
        super().__init__(message)
        self.rank = rank
        self.rank_augmented = rank_augmented


class Infeasible(Inconsistent):
    """No relay beamformer satisfies the alignment conditions for this realization."""

    def __init__(self, message, diagnostics=None):
        rank = getattr(diagnostics, "rank", None)
        rank_aug = getattr(diagnostics, "rank_augmented", None)
        super().__init__(message, rank, rank_aug)
        self.diagnostics = diagnostics


class ConfigError(OdiaError, ValueError):
    """A network or experiment configuration violates its invariants."""


class SchemeError(ConfigError):
    """The operation is not defined for the configured scheme."""


class DimensionError(ShapeError):
    """Stream or antenna counts violate a beamformer precondition."""


class RankDeficient(OdiaError):
    """A matrix that must have full row or column rank does not."""


class DomainError(OdiaError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class AllTrialsInfeasible(OdiaError):
    """Every Monte-Carlo trial failed the solvability test."""
