"""Instant helpers: integer UTC milliseconds and RFC 3339 text."""

from __future__ import annotations

import re
from datetime import datetime, timedelta, timezone

_RFC3339 = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt ](\d{2}):(\d{2}):(\d{2})(?:\.(\d+))?"
    r"(Z|z|[+-]\d{2}:\d{2})$"
)
_INTEGER = re.compile(r"^[+-]?\d+$")
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def is_integer_text(text: str) -> bool:
    return bool(_INTEGER.match(text.strip()))


def parse_rfc3339(text: str) -> int:
    """Parse an RFC 3339 timestamp into integer milliseconds since epoch.

    An explicit offset (``Z`` or ``+hh:mm``) is required. Sub-millisecond
    digits are truncated toward the earlier instant.
    """
    match = _RFC3339.match(text.strip())
    if match is None:
        raise ValueError(f"not an RFC 3339 timestamp: {text!r}")
    year, month, day, hour, minute, second, frac, offset = match.groups()
    dt = datetime(
        int(year), int(month), int(day), int(hour), int(minute), int(second),
        tzinfo=timezone.utc,
    )
    if offset not in ("Z", "z"):
        sign = 1 if offset[0] == "+" else -1
        dt -= sign * timedelta(hours=int(offset[1:3]), minutes=int(offset[4:6]))
    ms = (dt - _EPOCH) // timedelta(milliseconds=1)
    if frac:
        ms += int((frac + "000")[:3])
    return ms


def parse_instant(value: object) -> int:
    """Accept integer milliseconds (int or digit string) or RFC 3339 text."""
    if isinstance(value, bool):
        raise ValueError("boolean is not an instant")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        if is_integer_text(value):
            return int(value)
        return parse_rfc3339(value)
    raise ValueError(f"cannot interpret {value!r} as an instant")


def format_rfc3339(ms: int) -> str:
    dt = _EPOCH + timedelta(milliseconds=int(ms))
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"
