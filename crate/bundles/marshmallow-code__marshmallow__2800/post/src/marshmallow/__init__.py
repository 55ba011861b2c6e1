from .exceptions import ValidationError
from .validate import validation

__all__ = ["ValidationError", "validation"]
