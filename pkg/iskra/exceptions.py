"""
Custom exceptions for iskra.

This module defines all custom exceptions used throughout the iskra package.
All exceptions inherit from IskraError for easy catching of package-specific
errors.
"""


class IskraError(Exception):
    """
    Base exception for all iskra errors.

    All custom exceptions in this package inherit from this class,
    allowing users to catch all iskra-specific errors with a single except
    clause.

    Examples
    --------
    >>> try:
    ...     # some iskra operation
    ...     pass
    ... except IskraError as e:
    ...     print(f"iskra error: {e}")
    """

    pass


class DimensionError(IskraError):
    """
    Tensor shape does not match what an operation expects.

    Attributes
    ----------
    expected : tuple or int, optional
        Shape (or extent) the operation required.
    actual : tuple or int, optional
        Shape (or extent) that was passed in.

    Examples
    --------
    >>> raise DimensionError("keep mask length 3 != 4 tokens", expected=4, actual=3)
    """

    def __init__(self, message: str, expected=None, actual=None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class EmptyTokenSetError(DimensionError):
    """Raised when a classification pool would contain no kept tokens."""

    pass


class ConfigurationError(IskraError):
    """
    Invalid configuration value or configuration file.

    Attributes
    ----------
    field : str, optional
        Name of the offending configuration field.

    Examples
    --------
    >>> raise ConfigurationError("rho must be in (0, 1], got 1.5", field="rho")
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class UsageError(IskraError):
    """
    API called in a state where it cannot do anything meaningful.

    Examples
    --------
    >>> raise UsageError("backward() called on a tensor with no recorded graph")
    """

    pass


class SaturationError(IskraError):
    """Raised when pruning is requested but no prunable weight is alive."""

    pass


class CheckpointError(IskraError):
    """
    Checkpoint manifest and payload disagree, or do not fit the model.

    Examples
    --------
    >>> raise CheckpointError("shape drift for 'blocks.0.mlp.fc1.weight'")
    """

    pass


class FormatError(IskraError):
    """
    Dataset file does not follow its documented binary layout.

    Attributes
    ----------
    offset : int, optional
        Byte offset of the first offending byte.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class DivergenceError(IskraError):
    """
    Training produced a non-finite loss.

    Attributes
    ----------
    epoch : int, optional
        Epoch in which the loss diverged.
    learning_rate : float, optional
        Learning rate at the failing step.
    grad_norm : float, optional
        Global gradient norm of the last finite step.
    history : list, optional
        Records collected before the failure (filled in by callers that
        run several rounds, e.g. the lottery ticket loop).
    """

    def __init__(
        self,
        message: str,
        epoch: int | None = None,
        learning_rate: float | None = None,
        grad_norm: float | None = None,
    ):
        super().__init__(message)
        self.epoch = epoch
        self.learning_rate = learning_rate
        self.grad_norm = grad_norm
        self.history: list = []
