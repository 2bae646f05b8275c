"""Exception hierarchy for the simulator.

Every failure mode that callers are expected to handle gets its own class so
the CLI can map error categories to exit codes without string matching.
"""


class JJAQEDError(Exception):
    """Base class for all simulator errors."""


class DomainError(JJAQEDError):
    """Input outside the mathematical/physical domain of an operation."""


class ConfigError(JJAQEDError):
    """Malformed configuration: unknown keys, bad units, missing fields."""


class SolverError(JJAQEDError):
    """Eigensolver or factorization failure."""


class TrackingAmbiguityError(JJAQEDError):
    """Adiabatic mode tracking lost the atomic branch.

    Carries the coupling value at which the overlap criterion failed.
    """

    def __init__(self, message, chi=None, overlap=None):
        super().__init__(message)
        self.chi = chi
        self.overlap = overlap


class RenormalizationError(JJAQEDError):
    """Renormalized atomic capacitance became non-positive."""

    def __init__(self, message, mode_weight=None):
        super().__init__(message)
        self.mode_weight = mode_weight


class InstabilityError(JJAQEDError):
    """Quadratic-form Hamiltonian not positive definite, or a trajectory blew up."""


class ImpedanceSingularityError(DomainError):
    """Impedance evaluated at (or too close to) the LC resonance pole."""


class AtomDecoupledError(DomainError):
    """Effective impedance requested at zero coupling: the atom sees an open circuit."""


class ResonanceError(DomainError):
    """Perturbative denominator too close to zero; names the resonant mode."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class DivergenceError(JJAQEDError):
    """A pole-pair sum has a vanishing denominator with non-negligible weight."""


class IntegrationError(JJAQEDError):
    """Adaptive ODE integration failed; carries a suggested step bound if known."""

    def __init__(self, message, suggested_max_step=None):
        super().__init__(message)
        self.suggested_max_step = suggested_max_step


class ResolutionError(DomainError):
    """Time grid too short or too coarse for the requested spectral analysis."""
