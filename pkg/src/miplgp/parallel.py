"""Worker-count policy. MIPLGP_THREADS caps parallelism process-wide."""

from __future__ import annotations

import os
import warnings

ENV_VAR = "MIPLGP_THREADS"


def worker_count(limit: int | None = None) -> int:
    """Number of parallel workers to use, at least 1.

    Takes the CPU count, capped by the MIPLGP_THREADS environment variable
    when set, and by `limit` when given. Results never depend on the worker
    count; it only affects scheduling.
    """
    workers = os.cpu_count() or 1
    raw = os.environ.get(ENV_VAR)
    if raw is not None:
        try:
            workers = min(workers, max(1, int(raw)))
        except ValueError:
            warnings.warn(f"{ENV_VAR}={raw!r} is not an integer; ignoring", stacklevel=2)
    if limit is not None:
        workers = min(workers, max(1, limit))
    return max(1, workers)
