"""Exception types shared across the package."""


class FedPromptError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(FedPromptError, ValueError):
    """Operand shapes are inconsistent."""


class DomainError(FedPromptError, ValueError):
    """A scalar argument is outside its mathematical domain (e.g. tau <= 0)."""


class InvalidInputError(FedPromptError, ValueError):
    """An input value violates a precondition (non-finite, empty, off-simplex...)."""


class MissingClassError(FedPromptError, ValueError):
    """No client reported any sample for a class; aggregation cannot proceed."""

    def __init__(self, class_index: int):
        self.class_index = class_index
        super().__init__(f"no client holds any sample of class {class_index}")


class InfeasiblePartitionError(FedPromptError, ValueError):
    """More clients than samples: every client must receive at least one sample."""


class DegeneratePromptError(FedPromptError, ValueError):
    """An encoded prompt has zero norm, so its cosine scores are undefined."""

    def __init__(self, class_index: int):
        self.class_index = class_index
        super().__init__(f"encoded prompt for class {class_index} has zero norm")


class DivergenceError(FedPromptError, RuntimeError):
    """Generator training produced a non-finite loss."""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite generator loss {loss!r} at step {step}")


class EmbeddingFormatError(FedPromptError, ValueError):
    """An embedding file failed to parse or validate; message carries context."""


class ConfigError(FedPromptError, ValueError):
    """An experiment config field is missing, unknown, or invalid."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class ProtocolViolation(FedPromptError, RuntimeError):
    """A round-barrier or communication-accounting invariant was broken."""
