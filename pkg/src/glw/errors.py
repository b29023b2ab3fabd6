"""Exception hierarchy shared by every subpackage.

The CLI maps these onto exit codes, so each class carries the code it
should surface as.
"""


class GlwError(Exception):
    exit_code = 1


class ConfigError(GlwError, ValueError):
    exit_code = 2


class DimensionError(GlwError, ValueError):
    exit_code = 2


class ContractError(GlwError, RuntimeError):
    """An operation was called outside its documented preconditions."""


class EmptyBatchError(GlwError, ValueError):
    pass


class NonFiniteError(GlwError, FloatingPointError):
    """A NaN or Inf appeared in a tensor or gradient."""

    exit_code = 3

    def __init__(self, message, op=None, step=None):
        super().__init__(message)
        self.op = op
        self.step = step


class TrainingFailureError(GlwError, RuntimeError):
    exit_code = 3

    def __init__(self, message, loss_curve=None, checkpoint=None):
        super().__init__(message)
        self.loss_curve = list(loss_curve or [])
        self.checkpoint = checkpoint


class SeparationInfeasibleError(GlwError, RuntimeError):
    exit_code = 2


class DegenerateLabelsError(GlwError, ValueError):
    pass


class CovarianceUndefinedError(GlwError, ValueError):
    pass


class ModuleLookupError(GlwError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown module"


class WithheldError(GlwError, RuntimeError):
    """Readout requested from a module that is not connected to the workspace."""


class CheckpointError(GlwError, ValueError):
    exit_code = 2


class EvaluationError(GlwError, RuntimeError):
    exit_code = 4
