class MarshmallowError(Exception):
    """Base class for all marshmallow errors."""


class ValidationError(MarshmallowError):
    """Raised when validation fails on a field or schema."""

    def __init__(self, message, field_name="_schema"):
        super().__init__(message)
        self.messages = [message] if isinstance(message, str) else message
        self.field_name = field_name
