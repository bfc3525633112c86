"""Integer calendar-month indices and their ISO ``YYYY-MM`` spelling."""
import re

_ISO = re.compile(r"^(\d{4})-(\d{2})$")


def parse_month(text) -> int:
    """``"2008-07"`` -> month index ``year * 12 + month - 1``.

    Integers pass through unchanged.
    """
    if isinstance(text, (int,)) and not isinstance(text, bool):
        return text
    m = _ISO.match(str(text).strip())
    if not m:
        raise ValueError(f"not a YYYY-MM month: {text!r}")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range: {text!r}")
    return year * 12 + month - 1


def format_month(index: int) -> str:
    year, month0 = divmod(int(index), 12)
    return f"{year:04d}-{month0 + 1:02d}"
