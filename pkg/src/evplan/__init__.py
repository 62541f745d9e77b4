"""Planning toolkit for siting and sizing EV chargers in MV grids."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled dataset file (grid JSON, demand CSV)."""
    return Path(resources.files(__package__) / "data" / name)
