"""Exception hierarchy shared across the package.

Every error carries a ``kind`` so front ends can map failures to exit
codes / HTTP statuses without string matching: ``data`` for malformed or
inconsistent input files, ``config`` for an unusable run configuration.
"""

from __future__ import annotations


class PedevalError(Exception):
    kind = "data"


class ParseError(PedevalError):
    """A file could not be parsed at all (syntax level)."""

    def __init__(self, reason: str, path: str | None = None,
                 line: int | None = None, offset: int | None = None):
        self.path = path
        self.line = line
        self.offset = offset
        where = path or "<input>"
        if line is not None:
            where += f":{line}"
            if offset is not None:
                where += f":{offset}"
        super().__init__(f"{where}: {reason}")


class SchemaError(PedevalError):
    """A file parsed but violates the documented record schema."""

    def __init__(self, reason: str, path: str | None = None,
                 frame_id: str | None = None):
        self.path = path
        self.frame_id = frame_id
        ctx = []
        if path:
            ctx.append(path)
        if frame_id:
            ctx.append(f"frame {frame_id!r}")
        prefix = " ".join(ctx)
        super().__init__(f"{prefix}: {reason}" if prefix else reason)


class DecodeError(PedevalError):
    """A mask file is missing or not decodable."""


class DimensionMismatch(PedevalError):
    """Mask grids disagree with each other or with the frame size."""


class EmptyDataset(PedevalError):
    """An operation that needs at least one frame got none."""


class ConfigError(PedevalError):
    kind = "config"
