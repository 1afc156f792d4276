"""Bundled example model files.

Shipped as package data so CLI examples and tests have stable inputs:

    pr-box.json      the nonlocal no-signalling box on 2 parties
    signalling.json  party 0 deterministically outputs party 1's input
    local-mix.json   a three-function hidden-variable mixture
    echo.json        each party outputs its own input (deterministic, local)
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .errors import ValidationError

NAMES = ("pr-box", "signalling", "local-mix", "echo")


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled model, by bare name or filename."""
    stem = name.removesuffix(".json")
    if stem not in NAMES:
        raise ValidationError(f"unknown fixture {name!r}; "
                              f"available: {', '.join(NAMES)}")
    return Path(resources.files(__package__) / "fixtures" / f"{stem}.json")
