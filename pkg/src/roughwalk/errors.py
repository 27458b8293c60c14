"""Exception types shared across the package."""


class RoughwalkError(Exception):
    """Base class for all package-specific errors."""


class NotStochastic(RoughwalkError):
    """A transition row does not sum to one."""

    def __init__(self, cell, row_sum):
        self.cell = cell
        self.row_sum = row_sum
        super().__init__(f"transition probabilities from cell {cell} sum to {row_sum!r}, not 1")


class NotIrreducible(RoughwalkError):
    """The projected chain on the fundamental cell is not irreducible."""

    def __init__(self, components):
        self.components = components
        super().__init__(f"projected chain splits into {len(components)} communicating classes: {components}")


class DegenerateCovariance(RoughwalkError):
    """Covariance matrix is singular (or numerically so)."""

    def __init__(self, rank, dim=None):
        self.rank = rank
        self.dim = dim
        extra = f" (dim {dim})" if dim is not None else ""
        super().__init__(f"covariance matrix has numerical rank {rank}{extra}; cannot whiten")


class InsufficientData(RoughwalkError):
    """Not enough samples to form the requested estimate."""


class InsufficientCount(RoughwalkError):
    """Accumulator holds too few samples for the requested statistic."""


class OutOfRange(RoughwalkError):
    """Evaluation time outside the data range of an embedded path."""


class NonFinite(RoughwalkError):
    """A simulated state overflowed or became NaN."""

    def __init__(self, step, value=None):
        self.step = step
        self.value = value
        super().__init__(f"state became non-finite at step {step}")


class SingularStep(RoughwalkError):
    """Cayley denominator is singular for the requested increment."""
