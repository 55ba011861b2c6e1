"""Validation of URL field values."""
import re

from .exceptions import ValidationError

SCHEMES = {"http", "https", "ftps"}
URL_ERROR = "Not a valid URL."

_HOST = re.compile(
    r"^(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?\.)+[a-z]{2,63}\.?$|^localhost$",
    re.IGNORECASE,
)


def _split(value):
    scheme, sep, rest = value.partition("://")
    if not sep:
        return None, value
    return scheme, rest


def validation(value):
    """Return ``value`` unchanged if it is a URL with a supported scheme."""
    if not value:
        raise ValidationError(URL_ERROR)
    scheme, rest = _split(value)
    if scheme is None or scheme.lower() not in SCHEMES:
        raise ValidationError(URL_ERROR)
    host = rest.split("/", 1)[0].split(":", 1)[0]
    if not _HOST.match(host):
        raise ValidationError(URL_ERROR)
    return value
