"""Lookup of the bundled data documents."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

DATA_ENV = "PERMLAB_DATA_DIR"
PACKAGE_DATA = Path(__file__).parent / "data"


def data_path(name: str) -> Path:
    """Path of a bundled document, preferring ``$PERMLAB_DATA_DIR/<name>`` when it exists."""
    override = os.environ.get(DATA_ENV)
    if override:
        candidate = Path(override) / name
        if candidate.exists():
            return candidate
    return PACKAGE_DATA / name


def read_json(name: str) -> Any:
    with open(data_path(name), encoding="utf-8") as fh:
        return json.load(fh)
