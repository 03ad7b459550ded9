"""Version number."""

from importlib.metadata import version

__version__ = version(__package__)
