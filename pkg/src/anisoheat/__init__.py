"""Numerical verification of moment asymptotic expansions for heat flows."""
from importlib.metadata import version
from typing import Final

# Set version, it will use version from pyproject.toml if defined
__version__: Final[str] = version(__package__ or __name__)
