"""Exception hierarchy. The CLI maps these onto exit codes."""


class UsageError(ValueError):
    """An argument is out of range for the object it indexes."""


class ConfigurationError(ValueError):
    """A parameter set violates a model invariant."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where = f"[{key}"
            if line is not None:
                where += f", line {line}"
            where += "] "
        super().__init__(where + message)


class GridSizeError(MemoryError):
    """The belief grid would exceed the configured memory cap."""


class SetupError(RuntimeError):
    """An episode was requested without the artifacts it needs."""


class BeliefDegeneracyError(ArithmeticError):
    """The Bayes normalizer vanished: the observation is impossible under the model.

    ``predicted`` holds the pre-observation belief callers should fall back to.
    """

    def __init__(self, message, predicted=None):
        super().__init__(message)
        self.predicted = predicted
