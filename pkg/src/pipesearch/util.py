"""Small shared helpers."""

from __future__ import annotations

from calendar import timegm
from datetime import datetime, timezone

__all__ = ["utc_now_iso", "parse_utc_iso"]

_FMT = "%Y-%m-%dT%H:%M:%S.%f"


def utc_now_iso() -> str:
    """UTC timestamp as ISO-8601 with millisecond precision, e.g.
    2024-05-01T12:34:56.789Z."""
    dt = datetime.now(timezone.utc)
    return dt.strftime(_FMT)[:-3] + "Z"


def parse_utc_iso(text: str) -> float:
    """Epoch seconds from a utc_now_iso timestamp.

    Computed as integer milliseconds divided once by 1000 so the result is
    bit-identical to Date.parse(text) / 1000 in JavaScript; report exports
    byte-compare across the dashboard and the CLI.
    """
    dt = datetime.strptime(text.rstrip("Z"), _FMT)
    ms = timegm(dt.timetuple()) * 1000 + dt.microsecond // 1000
    return ms / 1000.0
