"""Exception hierarchy shared by all workbench modules."""


class NeuroDobError(Exception):
    """Base class for every error raised by this package."""


class SingularSpeed(NeuroDobError, ValueError):
    pass


class InvalidParameters(NeuroDobError, ValueError):
    pass


class NonFiniteState(NeuroDobError, FloatingPointError):
    pass


class CurvatureBoundExceeded(NeuroDobError, ValueError):
    pass


class OutOfRange(NeuroDobError, ValueError):
    pass


class NotConverged(NeuroDobError, RuntimeError):
    pass


class UnstableClosedLoop(NeuroDobError, RuntimeError):
    pass


class NotSchur(NeuroDobError, ValueError):
    pass


class NonFiniteActivation(NeuroDobError, FloatingPointError):
    pass


class NonFiniteGradient(NeuroDobError, FloatingPointError):
    pass


class EmptyDataset(NeuroDobError, ValueError):
    pass


class DegenerateFeature(NeuroDobError, ValueError):
    pass


class MisalignedLog(NeuroDobError, ValueError):
    pass


class EmptyAfterFiltering(NeuroDobError, ValueError):
    pass


class LengthMismatch(NeuroDobError, ValueError):
    pass


class ConfigError(NeuroDobError, ValueError):
    pass


class DivergedState(NeuroDobError, RuntimeError):
    """Closed-loop run left the admissible envelope.

    The partial log recorded up to the abort is attached as ``log``.
    """

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log
