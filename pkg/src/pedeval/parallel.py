"""Thread-pool sizing; PEDEVAL_THREADS caps per-frame parallelism."""

from __future__ import annotations

import os


def worker_count() -> int:
    env = os.environ.get("PEDEVAL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)
