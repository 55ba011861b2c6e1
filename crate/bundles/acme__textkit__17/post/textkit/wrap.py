"""Line shortening."""

ELLIPSIS = "..."


def truncate(text, width, suffix=ELLIPSIS):
    """Shorten ``text`` to ``width`` characters, marking the cut with ``suffix``."""
    if len(text) <= width:
        return text
    return text[:width] + suffix
