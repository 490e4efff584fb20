"""Exception types raised by the library."""


class BosonCLTError(Exception):
    """Base class for every error raised by this package."""


class CutoffViolationError(BosonCLTError, ValueError):
    pass


class DegenerateInputError(BosonCLTError, ValueError):
    pass


class DimensionCeilingError(BosonCLTError, ValueError):
    pass


class CutoffMismatchError(BosonCLTError, ValueError):
    pass


class TailBudgetExceeded(BosonCLTError, RuntimeError):
    """A pipeline discarded more Fock weight than its budget allows."""

    def __init__(self, message, step=None, tail_mass=None):
        super().__init__(message)
        self.step = step
        self.tail_mass = tail_mass


class GridTooSmallError(BosonCLTError, ValueError):
    """The characteristic function has not decayed at the grid boundary."""


class SpectralError(BosonCLTError, ValueError):
    pass


class UnsupportedFrameError(BosonCLTError, ValueError):
    """Operation needs a state in Williamson form (diagonal per-mode covariance)."""


class RankDeficiencyError(BosonCLTError, ArithmeticError):
    def __init__(self, message, deficient_dim=None):
        super().__init__(message)
        self.deficient_dim = deficient_dim


class InsufficientDataError(BosonCLTError, ValueError):
    pass


class ConfigError(BosonCLTError, ValueError):
    pass
