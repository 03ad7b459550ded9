"""Utilities module."""

from ._logs import set_log_level  # noqa: F401
