"""Exception hierarchy shared by every module.

Each error names the module operation that raised it so the CLI can report
``operation=...`` without parsing messages.
"""


class LvrtPinnError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, operation: str = "") -> None:
        super().__init__(message)
        self.operation = operation


class ConfigError(LvrtPinnError, ValueError):
    """Run configuration is missing a field or violates an invariant."""


class ModelValidityError(LvrtPinnError, ArithmeticError):
    """The converter model left its validity region (V_meas below the floor)."""


class IntegrationDivergedError(LvrtPinnError, ArithmeticError):
    """A state became non-finite during time integration."""


class EquilibriumNotFoundError(LvrtPinnError, RuntimeError):
    """Newton iteration did not converge to a pre-fault equilibrium."""


class DatasetFormatError(LvrtPinnError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message: str, operation: str = "", line: int | None = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}", operation)
        self.line = line


class ManifestMismatchError(LvrtPinnError, ValueError):
    """Manifest contents disagree with the data files they describe."""


class TrainingDivergedError(LvrtPinnError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, operation: str = "", epoch: int = -1) -> None:
        super().__init__(message, operation)
        self.epoch = epoch


class ModelFormatError(LvrtPinnError, ValueError):
    """A model file has the wrong schema version or inconsistent dimensions."""


class UnboundedNeuronError(LvrtPinnError, ValueError):
    """A neuron has non-finite pre-activation bounds and cannot be big-M encoded."""


class BoundTighteningError(LvrtPinnError, RuntimeError):
    """An LP solved during bound tightening did not reach optimality."""

    def __init__(
        self, message: str, operation: str = "", layer: int = -1, neuron: int = -1
    ) -> None:
        super().__init__(f"{message} (layer={layer}, neuron={neuron})", operation)
        self.layer = layer
        self.neuron = neuron


class NodeLimitError(LvrtPinnError, RuntimeError):
    """Branch-and-bound exhausted its node budget before proving optimality."""

    def __init__(
        self, message: str, operation: str = "", incumbent=None, bound: float = float("nan")
    ) -> None:
        super().__init__(message, operation)
        self.incumbent = incumbent
        self.bound = bound


class CurveComparisonError(LvrtPinnError, ValueError):
    """Two boundary curves share no comparable points."""


class SimplexError(LvrtPinnError, RuntimeError):
    """The simplex method hit its pivot limit or lost primal feasibility numerically."""


class NonMonotoneCriterionError(LvrtPinnError, ArithmeticError):
    """A critical-duration search found the criterion critical at the short end only."""
