"""Timestamp source honoring SOURCE_DATE_EPOCH.

Artifacts, reports and case journals embed creation times.  To keep
fixed-seed runs bit-identical, every timestamp in the package comes from
here; setting SOURCE_DATE_EPOCH (the reproducible-builds convention)
freezes it.
"""

from __future__ import annotations

import os
import time


def now_epoch() -> int:
    """Current UNIX time, or SOURCE_DATE_EPOCH when set."""
    fixed = os.environ.get("SOURCE_DATE_EPOCH")
    if fixed is not None:
        return int(fixed)
    return int(time.time())


def now_iso() -> str:
    """UTC ISO-8601 rendering of now_epoch()."""
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(now_epoch()))
