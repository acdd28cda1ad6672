"""Bundled example configurations.

``one_qubit_high_flux.json`` and ``one_qubit_low_flux.json`` are the two
published single-qubit datasets with the measured instrument values;
``two_qubit_bell_sim.json`` is the Bell-singlet simulation study setup.
"""

from importlib import resources
from pathlib import Path

__all__ = ["config_path", "available"]


def available() -> tuple[str, ...]:
    """Names of the bundled config files."""
    return tuple(sorted(
        entry.name for entry in resources.files(__name__).iterdir()
        if entry.name.endswith(".json")))


def config_path(name: str) -> Path:
    """Filesystem path of a bundled config (e.g. ``one_qubit_high_flux.json``)."""
    path = resources.files(__name__) / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled config named {name!r}; "
                                f"available: {', '.join(available())}")
    return Path(str(path))
