"""Exception types shared across the toolkit."""


class DriftLabError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(DriftLabError):
    """Invalid or under-resolved geometry specification."""


class AssemblyError(DriftLabError):
    """Operator assembly failed (degenerate weight, mismatched grids, ...)."""


class SolveError(DriftLabError):
    """Eigensolver failure. Carries the best available Ritz data."""

    def __init__(self, message, ritz_values=None, residuals=None):
        super().__init__(message)
        self.ritz_values = ritz_values
        self.residuals = residuals


class TruncationError(DriftLabError):
    """Requested evaluation outside the certified truncation range."""


class ConfigError(DriftLabError):
    """Experiment configuration is malformed or has unknown keys."""
