"""Exception types raised by viscokit.

All viscokit errors derive from :class:`ViscokitError` so callers can catch
the whole family at once.  Solver failures carry enough context (iteration
counts, residual norms) to diagnose a run from the message alone.
"""


class ViscokitError(Exception):
    """Base class for all viscokit errors."""


class InvalidParameters(ViscokitError):
    """Material / scale-function parameters outside the admissible set."""


class NotPositiveDefinite(ViscokitError):
    """A tensor that must be symmetric positive definite is not."""


class NonPositiveJacobian(ViscokitError):
    """det F <= 0: the deformation gradient is not orientation preserving."""


class NoVolumetricRoot(ViscokitError):
    """The scalar pressure-volume solve left its bracket."""


class LocalNewtonDiverged(ViscokitError):
    """The per-branch internal-variable Newton did not converge in i_max."""


class StateNotSPD(ViscokitError):
    """An internal state tensor left the symmetric positive definite cone."""


class GlobalNewtonDiverged(ViscokitError):
    """The driver-level equilibrium Newton did not converge in l_max."""


class StepRejected(ViscokitError):
    """A time step failed; retry with the suggested smaller step."""

    def __init__(self, message, dt_suggested=None):
        super().__init__(message)
        self.dt_suggested = dt_suggested


class EmptyDataset(ViscokitError):
    """A calibration dataset contains no usable rows."""


class FitDiverged(ViscokitError):
    """No calibration start point produced a converged fit."""
