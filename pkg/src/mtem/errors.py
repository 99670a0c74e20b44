"""Exception hierarchy shared by all mtem modules."""


class MTEMError(Exception):
    """Base class for every error raised by mtem."""

    #: short machine-readable tag used in CLI error records
    code = "mtem-error"


class NonFiniteStateError(MTEMError, ValueError):
    code = "non-finite state"


class CoefficientOverflowError(MTEMError, ArithmeticError):
    code = "coefficient overflow"


class StateOverflowError(MTEMError, ArithmeticError):
    """A simulated state left the finite range.

    ``step`` is the index k of the step whose output overflowed and
    ``path_index`` identifies the path when raised from an ensemble.
    """

    code = "state overflow"

    def __init__(self, message, step=None, path_index=None):
        super().__init__(message)
        self.step = step
        self.path_index = path_index


class EnsembleOverflowError(MTEMError, ArithmeticError):
    code = "ensemble overflow"

    def __init__(self, failures):
        # failures: list of (path_index, step)
        self.failures = list(failures)
        desc = ", ".join(f"path {p} at step {k}" for p, k in self.failures[:10])
        more = "" if len(self.failures) <= 10 else f" (+{len(self.failures) - 10} more)"
        super().__init__(f"state overflow in {len(self.failures)} path(s): {desc}{more}")


class GridError(MTEMError, ValueError):
    code = "grid"


class NegativeDelayError(MTEMError, ValueError):
    code = "negative delay"


class IndexBeforeHistoryError(MTEMError, IndexError):
    code = "index before history"


class CoincidentInputsError(MTEMError, ValueError):
    code = "coincident inputs"


class PolicyInverseUnavailableError(MTEMError, ValueError):
    code = "policy inverse unavailable"


class EpsilonWindowError(MTEMError, ValueError):
    code = "epsilon outside admissible window"


class NoPositiveRootError(MTEMError, ValueError):
    code = "no positive root"


class StabilityMarginError(MTEMError, ValueError):
    code = "stability margin non-positive"


class InconsistentEnsembleError(MTEMError, ValueError):
    code = "inconsistent ensemble"


class ConfigError(MTEMError, ValueError):
    code = "config"
