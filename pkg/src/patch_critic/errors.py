"""Shared exception base for the package.

Every module-specific error derives from :class:`PatchCriticError` so the
CLI can map any expected failure to a one-line diagnostic plus a
machine-readable error record.
"""


class PatchCriticError(Exception):
    """Base class for all expected errors raised by this package."""
