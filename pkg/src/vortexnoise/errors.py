"""Exception types shared across the package."""


class VortexNoiseError(Exception):
    """Base class for package errors."""


class ContractViolation(VortexNoiseError, ValueError):
    """An input field violates a structural contract (reality, solenoidality,
    conjugate symmetry of noise increments, lattice mismatch)."""


class ConfigError(VortexNoiseError, ValueError):
    """A configuration file or parameter set violates a documented constraint."""


class BlowUpError(VortexNoiseError, RuntimeError):
    """Raised internally when a trajectory leaves the admissible set.

    Carries the detection time ``t_star``; ``simulate`` converts it into
    trajectory status rather than letting it escape.
    """

    def __init__(self, t_star: float, message: str = ""):
        self.t_star = t_star
        super().__init__(message or f"solution blew up at t = {t_star:.6g}")
