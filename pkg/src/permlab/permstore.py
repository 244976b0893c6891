"""Simulated browser permission store.

Records are keyed by ``(scope, descriptor)``.  The scope is either the
requesting origin or, for HTTPS sites that ship a manifest and when the store
runs in per-app mode, the app id derived from that manifest.  A lifecycle
policy decides which records survive a session boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from itertools import combinations
from typing import Any, Iterable, Mapping, Sequence, Union

from permlab.matrix import (
    DEFAULT_CONTEXT,
    DefaultState,
    PermissionMatrix,
    QueryContext,
    default_matrix,
    resolve_state,
)
from permlab.urls import is_https, normalize_origin, resolve_url

DEFAULT_AUTO_DENY_THRESHOLD = 3
DEFAULT_EPHEMERAL_EXCEPTIONS = frozenset({"geolocation"})


class DerivationError(ValueError):
    """The manifest carries neither ``id`` nor ``start_url``."""


class ActionMismatchError(ValueError):
    """The supplied user action does not fit whether a prompt was shown."""


class ScenarioError(ValueError):
    """Raised for invalid scenario documents."""


# -- manifests and scopes ----------------------------------------------------


@dataclass(frozen=True)
class AppManifest:
    id: str | None = None
    start_url: str | None = None
    name: str | None = None
    display: str | None = None
    manifest_url: str | None = None
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], manifest_url: str | None = None) -> AppManifest:
        def text(key: str) -> str | None:
            value = doc.get(key)
            return value if isinstance(value, str) else None

        return cls(
            id=text("id"),
            start_url=text("start_url"),
            name=text("name"),
            display=text("display"),
            manifest_url=manifest_url,
            raw=dict(doc),
        )


def derive_app_id(manifest: AppManifest, manifest_url: str | None = None) -> str:
    """App identity: ``id`` if present, else ``start_url`` made absolute.

    ``start_url`` is resolved against the manifest's URL (``manifest_url`` or
    ``manifest.manifest_url``); the fragment is dropped, the query kept.
    """
    if manifest.id:
        return manifest.id
    if manifest.start_url is not None:
        base = manifest_url or manifest.manifest_url
        if base is None:
            raise DerivationError("start_url needs the manifest URL to resolve against")
        return resolve_url(base, manifest.start_url)
    raise DerivationError("manifest has neither 'id' nor 'start_url'")


@dataclass(frozen=True)
class OriginScope:
    origin: str

    def __str__(self) -> str:
        return f"origin:{self.origin}"


@dataclass(frozen=True)
class AppScope:
    app_id: str

    def __str__(self) -> str:
        return f"app:{self.app_id}"


Scope = Union[OriginScope, AppScope]


class ScopingMode(str, Enum):
    PER_ORIGIN = "per-origin"
    PER_APP = "per-app"


def resolve_scope(
    origin: str,
    manifest: AppManifest | None,
    manifest_url: str | None,
    mode: ScopingMode,
) -> Scope:
    origin = normalize_origin(origin)
    if mode is ScopingMode.PER_APP and manifest is not None and is_https(origin):
        return AppScope(derive_app_id(manifest, manifest_url))
    return OriginScope(origin)


@dataclass(frozen=True)
class Actor:
    """A page or installed app acting on the store."""

    label: str
    origin: str
    manifest: AppManifest | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", normalize_origin(self.origin))

    @property
    def manifest_url(self) -> str:
        if self.manifest is not None and self.manifest.manifest_url:
            return self.manifest.manifest_url
        return self.origin + "/manifest.json"

    def scope(self, mode: ScopingMode) -> Scope:
        # actors are immutable, so each mode resolves at most once
        cache = self.__dict__.setdefault("_scopes", {})
        if mode not in cache:
            cache[mode] = resolve_scope(self.origin, self.manifest, self.manifest_url, mode)
        return cache[mode]

    @cached_property
    def identity(self) -> str:
        """App id when one can be derived, otherwise the origin."""
        if self.manifest is not None:
            try:
                return derive_app_id(self.manifest, self.manifest_url)
            except DerivationError:
                pass
        return self.origin


# -- policies, actions, records ---------------------------------------------


class PolicyKind(str, Enum):
    PERSISTENT = "persistent"
    ADAPTIVE = "adaptive"
    EPHEMERAL = "ephemeral"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    exceptions: frozenset[str] = frozenset()

    @classmethod
    def persistent(cls) -> Policy:
        return cls(PolicyKind.PERSISTENT)

    @classmethod
    def adaptive(cls) -> Policy:
        return cls(PolicyKind.ADAPTIVE)

    @classmethod
    def ephemeral(cls, exceptions: Iterable[str] = DEFAULT_EPHEMERAL_EXCEPTIONS) -> Policy:
        return cls(PolicyKind.EPHEMERAL, frozenset(exceptions))


class ActionKind(str, Enum):
    ALLOW = "allow"
    DENY = "deny"
    IGNORE = "ignore"
    NO_PROMPT = "none"


@dataclass(frozen=True)
class UserAction:
    kind: ActionKind
    remember: bool = True

    @classmethod
    def allow(cls, remember: bool = True) -> UserAction:
        return cls(ActionKind.ALLOW, remember)

    @classmethod
    def deny(cls, remember: bool = True) -> UserAction:
        return cls(ActionKind.DENY, remember)

    @classmethod
    def ignore(cls) -> UserAction:
        return cls(ActionKind.IGNORE)

    @classmethod
    def no_prompt(cls) -> UserAction:
        return cls(ActionKind.NO_PROMPT)


class RecordState(str, Enum):
    DEFAULT = "default"
    GRANTED = "granted"
    DENIED = "denied"


@dataclass(frozen=True)
class GrantRecord:
    state: RecordState = RecordState.DEFAULT
    remembered: bool = False
    ignore_count: int = 0
    # identities whose own prompt response produced this state
    granted_by: frozenset[str] = frozenset()


class QueryOutcome(str, Enum):
    GRANTED = "granted"
    DENIED = "denied"
    PROMPT = "prompt"
    UNSUPPORTED = "unsupported"


_DEFAULT_OUTCOME = {
    DefaultState.GRANTED: QueryOutcome.GRANTED,
    DefaultState.DENIED: QueryOutcome.DENIED,
    DefaultState.PROMPTED: QueryOutcome.PROMPT,
    DefaultState.UNSUPPORTED: QueryOutcome.UNSUPPORTED,
}


# -- the store ----------------------------------------------------------------


@dataclass
class PermissionStore:
    target: str
    scoping_mode: ScopingMode = ScopingMode.PER_ORIGIN
    policy: Policy = field(default_factory=Policy.persistent)
    context: QueryContext = DEFAULT_CONTEXT
    auto_deny_threshold: int = DEFAULT_AUTO_DENY_THRESHOLD
    matrix: PermissionMatrix = field(default_factory=default_matrix, repr=False)
    records: dict[tuple[Scope, str], GrantRecord] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.matrix.target(self.target)
        if self.auto_deny_threshold < 1:
            raise ValueError("auto_deny_threshold must be positive")
        unknown = [n for n in self.policy.exceptions if n not in self.matrix.registry]
        if unknown:
            raise ValueError(f"ephemeral exceptions not in registry: {unknown}")

    def snapshot(self) -> dict[tuple[Scope, str], GrantRecord]:
        return dict(self.records)

    def _default(self, descriptor: str) -> DefaultState | None:
        """Resolved matrix default, or None for names outside the registry."""
        try:
            name = self.matrix.registry.canonical(descriptor)
        except KeyError:
            return None
        return resolve_state(self.matrix.cells[(name, self.target)], self.context)

    def record_for(self, actor: Actor, descriptor: str) -> GrantRecord | None:
        try:
            name = self.matrix.registry.canonical(descriptor)
        except KeyError:
            return None
        return self.records.get((actor.scope(self.scoping_mode), name))

    def query(self, actor: Actor, descriptor: str) -> QueryOutcome:
        """Current state as a page would see it; total and side-effect free."""
        default = self._default(descriptor)
        if default is None or default is DefaultState.UNSUPPORTED:
            return QueryOutcome.UNSUPPORTED
        rec = self.record_for(actor, descriptor)
        if rec is not None and rec.state is RecordState.GRANTED:
            return QueryOutcome.GRANTED
        if rec is not None and rec.state is RecordState.DENIED:
            return QueryOutcome.DENIED
        return _DEFAULT_OUTCOME[default]

    def _remember(self, action: UserAction) -> bool:
        if self.policy.kind is PolicyKind.PERSISTENT:
            return True
        if self.policy.kind is PolicyKind.ADAPTIVE:
            return action.remember and action.kind is not ActionKind.IGNORE
        return False

    def request(self, actor: Actor, descriptor: str, action: UserAction) -> QueryOutcome:
        default = self._default(descriptor)
        if default is None or default is DefaultState.UNSUPPORTED:
            return QueryOutcome.UNSUPPORTED
        name = self.matrix.registry.canonical(descriptor)
        key = (actor.scope(self.scoping_mode), name)
        rec = self.records.get(key, GrantRecord())

        decided = None
        if default is not DefaultState.PROMPTED:
            decided = _DEFAULT_OUTCOME[default]
        elif rec.state is RecordState.GRANTED:
            decided = QueryOutcome.GRANTED
        elif rec.state is RecordState.DENIED:
            decided = QueryOutcome.DENIED
        if decided is not None:
            if action.kind is not ActionKind.NO_PROMPT:
                raise ActionMismatchError(f"{name}: no prompt is shown ({decided.value}), got {action.kind.value}")
            return decided

        if action.kind is ActionKind.NO_PROMPT:
            raise ActionMismatchError(f"{name}: a prompt is shown and needs allow, deny or ignore")
        if action.kind is ActionKind.ALLOW:
            self.records[key] = GrantRecord(
                RecordState.GRANTED, self._remember(action), 0, frozenset({actor.identity})
            )
            return QueryOutcome.GRANTED
        if action.kind is ActionKind.DENY:
            self.records[key] = GrantRecord(
                RecordState.DENIED, self._remember(action), 0, frozenset({actor.identity})
            )
            return QueryOutcome.DENIED

        count = rec.ignore_count + 1
        if count >= self.auto_deny_threshold:
            self.records[key] = GrantRecord(
                RecordState.DENIED, self._remember(action), count, frozenset({actor.identity})
            )
            return QueryOutcome.DENIED
        self.records[key] = replace(rec, ignore_count=count, remembered=self._remember(action))
        return QueryOutcome.PROMPT

    def session_end(self, actor: Actor) -> None:
        kind = self.policy.kind
        if kind is PolicyKind.PERSISTENT:
            return
        scope = actor.scope(self.scoping_mode)
        for key in [k for k in self.records if k[0] == scope]:
            rec = self.records[key]
            if kind is PolicyKind.ADAPTIVE and not rec.remembered:
                del self.records[key]
            elif kind is PolicyKind.EPHEMERAL and key[1] not in self.policy.exceptions:
                del self.records[key]

    def close_pwa(self, actor: Actor) -> None:
        # closing an installed app is a session boundary for its scope
        self.session_end(actor)


def query(store: PermissionStore, actor: Actor, descriptor: str) -> QueryOutcome:
    return store.query(actor, descriptor)


def request(store: PermissionStore, actor: Actor, descriptor: str, action: UserAction) -> QueryOutcome:
    return store.request(actor, descriptor, action)


def session_end(store: PermissionStore, actor: Actor) -> None:
    store.session_end(actor)


def close_pwa(store: PermissionStore, actor: Actor) -> None:
    store.close_pwa(actor)


# -- leakage audit ------------------------------------------------------------


@dataclass(frozen=True)
class LeakageEntry:
    origin: str
    app_a: str
    app_b: str
    scope: str
    descriptors: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "origin": self.origin,
            "apps": [self.app_a, self.app_b],
            "scope": self.scope,
            "descriptors": list(self.descriptors),
        }


@dataclass(frozen=True)
class LeakageReport:
    entries: tuple[LeakageEntry, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.entries)

    @property
    def descriptors(self) -> set[str]:
        return {d for e in self.entries for d in e.descriptors}

    def to_dict(self) -> dict[str, Any]:
        return {"entries": [e.to_dict() for e in self.entries]}


def _as_actor(app: Actor | tuple[str, AppManifest]) -> Actor:
    if isinstance(app, Actor):
        return app
    origin, manifest = app
    actor = Actor(label="", origin=origin, manifest=manifest)
    return replace(actor, label=actor.identity)


def leakage_audit(store: PermissionStore, apps: Sequence[Actor | tuple[str, AppManifest]]) -> LeakageReport:
    """Grants one app silently inherits from another app on the same origin.

    For each pair of apps that share an origin but have distinct app ids and
    resolve to the same scope in this store, list the descriptors granted in
    that scope which were not granted by both apps themselves.  Per-app
    isolation would leave those at their default for at least one of the pair.
    """
    actors = [_as_actor(a) for a in apps]
    entries = []
    for a, b in combinations(actors, 2):
        if a.origin != b.origin or a.identity == b.identity:
            continue
        scope_a, scope_b = a.scope(store.scoping_mode), b.scope(store.scoping_mode)
        if scope_a != scope_b:
            continue
        pair = {a.identity, b.identity}
        leaked = sorted(
            name
            for (scope, name), rec in store.records.items()
            if scope == scope_a and rec.state is RecordState.GRANTED and not pair <= rec.granted_by
        )
        if leaked:
            first, second = sorted(pair)
            entries.append(LeakageEntry(a.origin, first, second, str(scope_a), tuple(leaked)))
    return LeakageReport(tuple(entries))


# -- scenarios ----------------------------------------------------------------


class EventKind(str, Enum):
    REQUEST = "request"
    QUERY = "query"
    SESSION_END = "session_end"
    CLOSE_PWA = "close_pwa"


@dataclass(frozen=True)
class StoreConfig:
    target: str
    scoping_mode: ScopingMode = ScopingMode.PER_ORIGIN
    policy: Policy = field(default_factory=Policy.persistent)
    context: QueryContext = DEFAULT_CONTEXT
    auto_deny_threshold: int = DEFAULT_AUTO_DENY_THRESHOLD

    def build(self, matrix: PermissionMatrix | None = None) -> PermissionStore:
        return PermissionStore(
            target=self.target,
            scoping_mode=self.scoping_mode,
            policy=self.policy,
            context=self.context,
            auto_deny_threshold=self.auto_deny_threshold,
            matrix=matrix or default_matrix(),
        )


@dataclass(frozen=True)
class Event:
    actor: str
    kind: EventKind
    descriptor: str | None = None
    action: UserAction | None = None
    expect: QueryOutcome | None = None


@dataclass(frozen=True)
class Scenario:
    config: StoreConfig
    actors: tuple[Actor, ...]
    events: tuple[Event, ...]
    name: str = ""

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> Scenario:
        try:
            return _parse_scenario(doc)
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ScenarioError(f"invalid scenario: {exc}") from exc

    @classmethod
    def loads(cls, text: str) -> Scenario:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario does not parse: {exc}") from exc
        return cls.from_dict(doc)


def _parse_scenario(doc: Mapping[str, Any]) -> Scenario:
    cfg = doc["config"]
    policy_kind = PolicyKind(cfg.get("policy", "persistent"))
    if policy_kind is PolicyKind.EPHEMERAL:
        policy = Policy.ephemeral(cfg.get("exceptions", DEFAULT_EPHEMERAL_EXCEPTIONS))
    else:
        policy = Policy(policy_kind)
    config = StoreConfig(
        target=cfg["target"],
        scoping_mode=ScopingMode(cfg.get("scoping_mode", "per-origin")),
        policy=policy,
        context=QueryContext(cfg.get("context", DEFAULT_CONTEXT.value)),
        auto_deny_threshold=int(cfg.get("auto_deny_threshold", DEFAULT_AUTO_DENY_THRESHOLD)),
    )

    actors = []
    for raw in doc.get("actors", []):
        manifest = None
        if raw.get("manifest") is not None:
            manifest = AppManifest.from_dict(raw["manifest"], raw.get("manifest_url"))
        actors.append(Actor(raw["label"], raw["origin"], manifest))
    labels = [a.label for a in actors]
    if len(set(labels)) != len(labels):
        raise ScenarioError("actor labels must be unique")

    events = []
    for i, raw in enumerate(doc.get("events", [])):
        kind = EventKind(raw["kind"])
        if raw["actor"] not in labels:
            raise ScenarioError(f"event {i}: unknown actor {raw['actor']!r}")
        descriptor = raw.get("descriptor")
        action = None
        if kind in (EventKind.REQUEST, EventKind.QUERY) and not descriptor:
            raise ScenarioError(f"event {i}: {kind.value} needs a descriptor")
        if kind is EventKind.REQUEST:
            action = UserAction(ActionKind(raw.get("action", "none")), bool(raw.get("remember", True)))
        expect = QueryOutcome(raw["expect"]) if raw.get("expect") is not None else None
        events.append(Event(raw["actor"], kind, descriptor, action, expect))

    scenario = Scenario(config, tuple(actors), tuple(events), str(doc.get("name", "")))
    for actor in scenario.actors:
        try:
            actor.scope(config.scoping_mode)
        except DerivationError as exc:
            raise ScenarioError(f"actor {actor.label}: {exc}") from exc
    return scenario


@dataclass(frozen=True)
class TraceRecord:
    index: int
    actor: str
    kind: EventKind
    descriptor: str | None
    outcome: QueryOutcome | None
    expected: QueryOutcome | None
    passed: bool
    inherited: bool = False
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "actor": self.actor,
            "kind": self.kind.value,
            "descriptor": self.descriptor,
            "outcome": self.outcome.value if self.outcome else None,
            "expected": self.expected.value if self.expected else None,
            "pass": self.passed,
            "inherited": self.inherited,
            "error": self.error,
        }


@dataclass(frozen=True)
class ScenarioTrace:
    records: tuple[TraceRecord, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def failures(self) -> list[int]:
        return [r.index for r in self.records if not r.passed]

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "failures": self.failures, "events": [r.to_dict() for r in self.records]}


def run_scenario(scenario: Scenario, matrix: PermissionMatrix | None = None) -> ScenarioTrace:
    store = scenario.config.build(matrix)
    actors = {a.label: a for a in scenario.actors}
    out = []
    for i, ev in enumerate(scenario.events):
        actor = actors[ev.actor]
        outcome = None
        error = None
        inherited = False
        try:
            if ev.kind is EventKind.QUERY:
                outcome = store.query(actor, ev.descriptor)
            elif ev.kind is EventKind.REQUEST:
                outcome = store.request(actor, ev.descriptor, ev.action)
            elif ev.kind is EventKind.SESSION_END:
                store.session_end(actor)
            else:
                store.close_pwa(actor)
        except ActionMismatchError as exc:
            error = str(exc)
        if outcome is QueryOutcome.GRANTED:
            rec = store.record_for(actor, ev.descriptor)
            inherited = rec is not None and actor.identity not in rec.granted_by
        passed = error is None and (ev.expect is None or ev.expect is outcome)
        out.append(TraceRecord(i, ev.actor, ev.kind, ev.descriptor, outcome, ev.expect, passed, inherited, error))
    return ScenarioTrace(tuple(out))
