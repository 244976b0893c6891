"""Default permission states per browser target.

The grid holds raw state codes (``g``, ``p``, ``d``, ``-``, ``g*``).  The
``g*`` code is only meaningful together with a :class:`QueryContext`: it is
granted inside an installed PWA and denied in a plain browser tab.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Mapping

from permlab._data import read_json
from permlab.registry import Registry, UnknownDescriptorError, default_registry


class MatrixError(ValueError):
    """Raised for malformed matrix documents."""


class UnknownTargetError(KeyError):
    def __init__(self, target: str):
        super().__init__(target)
        self.target = target

    def __str__(self) -> str:
        return f"unknown browser target: {self.target!r}"


class Platform(str, Enum):
    IOS = "iOS"
    ANDROID = "Android"
    DESKTOP = "Desktop"


class DefaultState(str, Enum):
    GRANTED = "g"
    PROMPTED = "p"
    DENIED = "d"
    UNSUPPORTED = "-"
    GRANTED_WHEN_INSTALLED = "g*"

    @property
    def label(self) -> str:
        return _STATE_LABELS[self]


_STATE_LABELS = {
    DefaultState.GRANTED: "granted",
    DefaultState.PROMPTED: "prompted",
    DefaultState.DENIED: "denied",
    DefaultState.UNSUPPORTED: "unsupported",
    DefaultState.GRANTED_WHEN_INSTALLED: "granted-when-installed",
}


class QueryContext(str, Enum):
    INSTALLED_PWA = "installed"
    BROWSER_TAB = "tab"


DEFAULT_CONTEXT = QueryContext.BROWSER_TAB


def resolve_state(state: DefaultState, context: QueryContext) -> DefaultState:
    """Collapse ``g*`` to what a probe in ``context`` would observe."""
    if state is DefaultState.GRANTED_WHEN_INSTALLED:
        return DefaultState.GRANTED if context is QueryContext.INSTALLED_PWA else DefaultState.DENIED
    return state


@dataclass(frozen=True)
class BrowserTarget:
    id: str
    platform: Platform
    browser_label: str
    pwa_install_supported: bool

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["platform"] = self.platform.value
        return d


@dataclass(frozen=True)
class PermissionMatrix:
    targets: tuple[BrowserTarget, ...]
    descriptors: tuple[str, ...]
    cells: Mapping[tuple[str, str], DefaultState]
    registry: Registry

    @property
    def target_ids(self) -> list[str]:
        return [t.id for t in self.targets]

    def target(self, target_id: str) -> BrowserTarget:
        for t in self.targets:
            if t.id == target_id:
                return t
        raise UnknownTargetError(target_id)

    def targets_on(self, platform: Platform | str) -> list[str]:
        platform = Platform(platform)
        return [t.id for t in self.targets if t.platform is platform]

    def raw(self, descriptor: str, target: str) -> DefaultState:
        descriptor = self.registry.canonical(descriptor)
        if (descriptor, target) not in self.cells:
            self.target(target)
        return self.cells[(descriptor, target)]

    def column(self, target: str, context: QueryContext | None = None) -> dict[str, DefaultState]:
        """All cells for one target, resolved through ``context`` when given."""
        self.target(target)
        col = {name: self.cells[(name, target)] for name in self.descriptors}
        if context is not None:
            col = {name: resolve_state(s, context) for name, s in col.items()}
        return col

    def __len__(self) -> int:
        return len(self.cells)

    def to_dict(self) -> dict[str, Any]:
        return {
            "targets": [t.to_dict() for t in self.targets],
            "cells": {
                name: {t.id: self.cells[(name, t.id)].value for t in self.targets}
                for name in self.descriptors
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def load_matrix(data: Mapping[str, Any] | str | None = None, registry: Registry | None = None) -> PermissionMatrix:
    """Validate a matrix document against ``registry`` and return the full grid.

    Every registry descriptor must have a cell for every target.
    """
    registry = registry or default_registry()
    if data is None:
        data = read_json("matrix.json")
    elif isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise MatrixError(f"matrix document does not parse: {exc}") from exc
    if not isinstance(data, Mapping):
        raise MatrixError("matrix document must be an object")

    targets: list[BrowserTarget] = []
    for raw in data.get("targets", []):
        try:
            targets.append(
                BrowserTarget(
                    id=str(raw["id"]),
                    platform=Platform(raw["platform"]),
                    browser_label=str(raw["browser_label"]),
                    pwa_install_supported=bool(raw["pwa_install_supported"]),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise MatrixError(f"invalid target entry {raw!r}: {exc}") from None
    ids = [t.id for t in targets]
    if not ids:
        raise MatrixError("matrix document declares no targets")
    if len(set(ids)) != len(ids):
        raise MatrixError("duplicate target ids")

    raw_cells = data.get("cells")
    if not isinstance(raw_cells, Mapping):
        raise MatrixError("matrix document needs a 'cells' object")

    cells: dict[tuple[str, str], DefaultState] = {}
    for name, row in raw_cells.items():
        if name not in registry.names:
            raise MatrixError(f"unknown descriptor in matrix: {name!r}")
        if not isinstance(row, Mapping):
            raise MatrixError(f"row {name}: expected an object keyed by target id")
        for target_id, code in row.items():
            if target_id not in ids:
                raise MatrixError(f"row {name}: unknown target {target_id!r}")
            try:
                cells[(name, target_id)] = DefaultState(code)
            except ValueError:
                raise MatrixError(f"cell ({name}, {target_id}): invalid state code {code!r}") from None

    for name in registry.names:
        for target_id in ids:
            if (name, target_id) not in cells:
                raise MatrixError(f"missing cell ({name}, {target_id})")

    return PermissionMatrix(tuple(targets), tuple(registry.names), cells, registry)


def default_state(
    matrix: PermissionMatrix,
    descriptor: str,
    target: str,
    context: QueryContext = DEFAULT_CONTEXT,
) -> DefaultState:
    return resolve_state(matrix.raw(descriptor, target), context)


def diff_targets(matrix: PermissionMatrix, a: str, b: str) -> list[tuple[str, DefaultState, DefaultState]]:
    """Descriptors whose raw cells differ between two targets, sorted by name."""
    col_a, col_b = matrix.column(a), matrix.column(b)
    return sorted((name, col_a[name], col_b[name]) for name in matrix.descriptors if col_a[name] != col_b[name])


_default: PermissionMatrix | None = None


def default_matrix() -> PermissionMatrix:
    global _default
    if _default is None:
        _default = load_matrix()
    return _default


__all__ = [
    "BrowserTarget",
    "DefaultState",
    "MatrixError",
    "PermissionMatrix",
    "Platform",
    "QueryContext",
    "UnknownDescriptorError",
    "UnknownTargetError",
    "default_matrix",
    "default_state",
    "diff_targets",
    "load_matrix",
    "resolve_state",
]
