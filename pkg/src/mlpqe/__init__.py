"""Projective quantum eigensolver with a kernel-ridge surrogate for auxiliary parameters."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"

FIXTURES = ("h2", "h4_0.75", "h4_1.50", "h2o", "h2o_stretched")


def fixture_path(name: str) -> Path:
    """Path of a bundled FCIDUMP fixture, e.g. ``fixture_path("h4_0.75")``."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return Path(str(resources.files(__package__) / "data" / f"{name}.fcidump"))
