"""Exception hierarchy."""


class NtcaError(Exception):
    """Base class for errors raised by this package."""


class CircuitError(NtcaError, ValueError):
    """Malformed gate, register or width mismatch."""


class DenseCapError(NtcaError):
    """Circuit too wide for dense extraction."""


class ProjectionError(NtcaError):
    """Projection onto an outcome of (numerically) zero probability."""


class NormalizationError(NtcaError, ValueError):
    pass


class PolynomialError(NtcaError, ValueError):
    pass


class PhaseFactorError(NtcaError):
    """Phase-factor solver failed to reach tolerance."""

    def __init__(self, msg, best_residual=None):
        super().__init__(msg)
        self.best_residual = best_residual


class BlockEncodingError(NtcaError, ValueError):
    pass


class UnamplifiableError(NtcaError):
    """Post-selection success probability below the amplification floor."""


class BudgetError(NtcaError, ValueError):
    """Polynomial approximation error exceeds the per-point budget."""


class ConfigError(NtcaError, ValueError):
    pass
