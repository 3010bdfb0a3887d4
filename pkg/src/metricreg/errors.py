"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    pass


class DegenerateInputError(ValueError):
    """Input is well-formed but has no variance / no structure to work with."""


class InvalidStateError(RuntimeError):
    pass


class NonFiniteGradientError(FloatingPointError):
    """Raised by the optimizer before touching any parameter."""

    def __init__(self, layer_index, message=None):
        self.layer_index = layer_index
        super().__init__(message or f"non-finite gradient in parameter group {layer_index}")


class GraphDegeneracyError(RuntimeError):
    pass


class TrainingDivergedError(FloatingPointError):
    """Loss became NaN/Inf; ``record`` holds the diagnostic (iteration, batch indices)."""

    def __init__(self, record):
        self.record = record
        super().__init__(f"non-finite loss at iteration {record.get('iteration')}")
