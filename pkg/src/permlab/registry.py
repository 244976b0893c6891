"""Catalog of browser permission descriptors and their capability attributes."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Iterator, Mapping

from permlab._data import read_json

REGISTRY_SIZE = 33


class RegistryError(ValueError):
    """Raised when a registry document is malformed or violates an invariant."""


class UnknownDescriptorError(KeyError):
    """Raised when a descriptor name is not in the registry."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown permission descriptor: {self.name!r}"


class Category(str, Enum):
    SENSOR = "Sensor"
    HARDWARE_ACCESS = "HardwareAccess"
    CLIPBOARD_DATA_ACCESS = "ClipboardDataAccess"
    NOTIFICATIONS_BACKGROUND = "NotificationsBackground"
    LOCATION_ENVIRONMENT = "LocationEnvironment"
    WINDOW_UI = "WindowUI"
    PAYMENT_AUTH = "PaymentAuth"
    DESKTOP_RELATED = "DesktopRelated"
    LEGACY = "Legacy"

    @classmethod
    def parse(cls, token: str) -> Category:
        """Accept the canonical token or any case/separator variant of it."""
        key = token.replace("-", "").replace("_", "").replace(" ", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown category token: {token!r}")


class Prompted(str, Enum):
    YES = "yes"
    NO = "no"
    NA = "na"


@dataclass(frozen=True)
class PermissionDescriptor:
    name: str
    category: Category
    mobile_enhancing: bool
    web_api: str
    invocable: bool
    prompted: Prompted
    sw_queryable: bool
    reference_count: int

    def check(self) -> None:
        if self.prompted is Prompted.YES and not self.invocable:
            raise RegistryError(f"{self.name}: prompted=yes requires invocable=true")
        if not self.invocable and (self.prompted is not Prompted.NA or self.reference_count != 0):
            raise RegistryError(
                f"{self.name}: non-invocable descriptors must have prompted=na and reference_count=0"
            )
        if self.reference_count < 0:
            raise RegistryError(f"{self.name}: reference_count must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["category"] = self.category.value
        d["prompted"] = self.prompted.value
        return d


_FIELDS = (
    "name",
    "category",
    "mobile_enhancing",
    "web_api",
    "invocable",
    "prompted",
    "sw_queryable",
    "reference_count",
)


def _descriptor_from_dict(raw: Mapping[str, Any], index: int) -> PermissionDescriptor:
    label = raw.get("name", f"#{index}") if isinstance(raw, Mapping) else f"#{index}"
    if not isinstance(raw, Mapping):
        raise RegistryError(f"descriptor {label}: expected an object")
    missing = [f for f in _FIELDS if f not in raw]
    if missing:
        raise RegistryError(f"descriptor {label}: missing fields {missing}")
    try:
        category = Category(raw["category"])
    except ValueError:
        raise RegistryError(f"descriptor {label}: unknown category {raw['category']!r}") from None
    try:
        prompted = Prompted(raw["prompted"])
    except ValueError:
        raise RegistryError(f"descriptor {label}: invalid prompted value {raw['prompted']!r}") from None
    for flag in ("mobile_enhancing", "invocable", "sw_queryable"):
        if not isinstance(raw[flag], bool):
            raise RegistryError(f"descriptor {label}: {flag} must be a boolean")
    count = raw["reference_count"]
    if not isinstance(count, int) or isinstance(count, bool):
        raise RegistryError(f"descriptor {label}: reference_count must be an integer")
    desc = PermissionDescriptor(
        name=str(raw["name"]),
        category=category,
        mobile_enhancing=raw["mobile_enhancing"],
        web_api=str(raw["web_api"]),
        invocable=raw["invocable"],
        prompted=prompted,
        sw_queryable=raw["sw_queryable"],
        reference_count=count,
    )
    desc.check()
    return desc


@dataclass(frozen=True)
class Registry:
    """Immutable, ordered collection of descriptors.

    ``aliases`` maps retired descriptor names (for example ``window-placement``)
    onto the descriptor that absorbed them; aliases are not counted as entries.
    """

    descriptors: tuple[PermissionDescriptor, ...]
    aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        index = {d.name: d for d in self.descriptors}
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.descriptors)

    def __iter__(self) -> Iterator[PermissionDescriptor]:
        return iter(self.descriptors)

    def __contains__(self, name: object) -> bool:
        return name in self._index or name in self.aliases

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.descriptors]

    def canonical(self, name: str) -> str:
        """Resolve an alias to its canonical name; raises for unknown names."""
        name = self.aliases.get(name, name)
        if name not in self._index:
            raise UnknownDescriptorError(name)
        return name

    def get(self, name: str) -> PermissionDescriptor:
        return self._index[self.canonical(name)]

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"descriptors": [d.to_dict() for d in self.descriptors]}
        if self.aliases:
            out["aliases"] = dict(self.aliases)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def load_registry(data: Mapping[str, Any] | str | None = None, *, exact_size: bool = True) -> Registry:
    """Build a validated :class:`Registry` from a parsed or JSON-encoded document.

    With ``data=None`` the embedded snapshot is loaded (honouring
    ``PERMLAB_DATA_DIR``).  ``exact_size`` enforces the 33-entry cardinality;
    turn it off to validate partial documents in tests or tooling.
    """
    if data is None:
        data = read_json("registry.json")
    elif isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise RegistryError(f"registry document does not parse: {exc}") from exc
    if not isinstance(data, Mapping) or not isinstance(data.get("descriptors"), list):
        raise RegistryError("registry document needs a top-level 'descriptors' array")

    seen: dict[str, PermissionDescriptor] = {}
    for i, raw in enumerate(data["descriptors"]):
        desc = _descriptor_from_dict(raw, i)
        if desc.name in seen:
            raise RegistryError(f"descriptor {desc.name}: duplicate name")
        seen[desc.name] = desc

    aliases = dict(data.get("aliases") or {})
    for alias, target in aliases.items():
        if target not in seen:
            raise RegistryError(f"alias {alias}: target {target!r} is not a descriptor")
        if alias in seen:
            raise RegistryError(f"alias {alias}: shadows a descriptor")

    if exact_size and len(seen) != REGISTRY_SIZE:
        raise RegistryError(f"registry must contain exactly {REGISTRY_SIZE} descriptors, got {len(seen)}")
    return Registry(tuple(seen.values()), aliases)


def get_descriptor(registry: Registry, name: str) -> PermissionDescriptor:
    return registry.get(name)


def descriptors_by_category(registry: Registry, category: Category | str) -> list[PermissionDescriptor]:
    if not isinstance(category, Category):
        category = Category.parse(category)
    return [d for d in registry if d.category is category]


_default: Registry | None = None


def default_registry() -> Registry:
    """The embedded registry, loaded once per process."""
    global _default
    if _default is None:
        _default = load_registry()
    return _default
