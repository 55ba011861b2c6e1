"""Slug helpers."""
import re
import unicodedata

_SEP = re.compile(r"[^a-z0-9]+")


def _ascii(text):
    return unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii")


def slugify(text, sep="-"):
    """Lower-case ``text`` and join its alphanumeric runs with ``sep``."""
    text = _ascii(text).lower()
    return _SEP.sub(sep, text).strip(sep)
