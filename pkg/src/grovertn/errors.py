"""Exception types shared across the simulator."""


class ValidationError(ValueError):
    """Malformed input: parameter out of domain, bad bitstring, non-unitary mixing."""


class ResourceError(RuntimeError):
    """Requested problem size exceeds the configured memory guards."""


class StateError(RuntimeError):
    """A state invariant (norm, trace, positivity proxy) drifted beyond tolerance."""


class NumericalError(RuntimeError):
    """An internal numerical consistency check failed."""


class ImpossibleOutcomeError(NumericalError):
    """A zero-probability Kraus branch was selected for application."""


class FitError(ValueError):
    """Scaling fit rejected: empty window, too few points, or non-positive excess."""
