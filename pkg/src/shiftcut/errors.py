"""Exception types raised across the toolkit."""


class ValidationError(ValueError):
    """Input failed a precondition check (shape, symmetry, finiteness, labels)."""


class DegeneratePartitionError(ValidationError):
    """A cost with a per-cluster denominator saw an empty or zero-degree cluster."""


class DegenerateStateError(ValidationError):
    """An iterative update hit a zero denominator."""


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same quantity disagreed."""
