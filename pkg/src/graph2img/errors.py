"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems exit 2, I/O
problems exit 3 (plain ``OSError``), numeric failures exit 4.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PipelineError):
    """An input value violates a documented contract."""


class ParseError(ValidationError):
    """A document could not be parsed.

    ``byte_offset`` locates the first offending byte in the UTF-8 input,
    or is None when the failure is not positional.
    """

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class ReferentialIntegrityError(ValidationError):
    """A relation references an entity id that was never declared."""

    def __init__(self, message: str, entity_id: str | None = None):
        super().__init__(message)
        self.entity_id = entity_id


class NotFoundError(ValidationError):
    """An edit operation targets a triplet or entity that does not exist."""


class CollisionError(ValidationError):
    """An edit operation would merge two distinct entities."""


class ConfigurationError(ValidationError):
    """A pipeline request is missing the model parameters it needs."""


class NumericDivergenceError(PipelineError):
    """An iterative numeric procedure produced non-finite values."""


class SingularityError(NumericDivergenceError):
    """A closed-form expression hit a division by zero."""
