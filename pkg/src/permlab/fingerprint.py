"""Identify the browser/platform from observed permission default states.

Each matrix column is a signature.  An observation (a partial map of
descriptor -> observed state) is compared against every column; targets with
zero mismatches are exact candidates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from permlab.matrix import DefaultState, PermissionMatrix, QueryContext, resolve_state


class ObservationError(ValueError):
    """Raised for malformed observation documents."""


class ObservedState(str, Enum):
    GRANTED = "granted"
    PROMPTED = "prompted"
    DENIED = "denied"
    UNSUPPORTED = "unsupported"

    @classmethod
    def from_default(cls, state: DefaultState) -> ObservedState:
        if state is DefaultState.GRANTED_WHEN_INSTALLED:
            raise ValueError("g* must be resolved through a QueryContext before observation")
        return _FROM_DEFAULT[state]


_FROM_DEFAULT = {
    DefaultState.GRANTED: ObservedState.GRANTED,
    DefaultState.PROMPTED: ObservedState.PROMPTED,
    DefaultState.DENIED: ObservedState.DENIED,
    DefaultState.UNSUPPORTED: ObservedState.UNSUPPORTED,
}


@dataclass(frozen=True)
class Observation:
    states: Mapping[str, ObservedState] = field(default_factory=dict)
    context: QueryContext = QueryContext.BROWSER_TAB

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> Observation:
        if not isinstance(doc, Mapping):
            raise ObservationError("observation must be an object")
        try:
            context = QueryContext(doc.get("context", QueryContext.BROWSER_TAB.value))
        except ValueError:
            raise ObservationError(f"invalid context {doc.get('context')!r}") from None
        raw = doc.get("states", {})
        if not isinstance(raw, Mapping):
            raise ObservationError("'states' must be an object")
        states = {}
        for name, value in raw.items():
            try:
                states[str(name)] = ObservedState(value)
            except ValueError:
                raise ObservationError(f"invalid observed state for {name}: {value!r}") from None
        return cls(states, context)

    @classmethod
    def loads(cls, text: str) -> Observation:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ObservationError(f"observation does not parse: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def of_target(
        cls,
        matrix: PermissionMatrix,
        target: str,
        context: QueryContext,
        descriptors: Iterable[str] | None = None,
    ) -> Observation:
        """What probing ``descriptors`` (default: all) on ``target`` would show."""
        col = matrix.column(target, context)
        names = matrix.descriptors if descriptors is None else descriptors
        return cls({n: ObservedState.from_default(col[n]) for n in names}, context)

    def to_dict(self) -> dict[str, Any]:
        return {"context": self.context.value, "states": {k: v.value for k, v in self.states.items()}}


@dataclass(frozen=True)
class ClassificationResult:
    exact: frozenset[str]
    ranked: tuple[tuple[str, int], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "exact": sorted(self.exact),
            "ranked": [{"target": t, "mismatches": n} for t, n in self.ranked],
        }


def classify(observation: Observation, matrix: PermissionMatrix) -> ClassificationResult:
    """Hamming distance between the observation and every target column.

    Only observed descriptors count.  Unknown descriptor names raise
    :class:`~permlab.registry.UnknownDescriptorError`.
    """
    observed = {matrix.registry.canonical(name): state for name, state in observation.states.items()}
    scores = []
    for target in matrix.target_ids:
        mismatches = 0
        for name, state in observed.items():
            expected = resolve_state(matrix.cells[(name, target)], observation.context)
            if _FROM_DEFAULT[expected] is not state:
                mismatches += 1
        scores.append((target, mismatches))
    ranked = tuple(sorted(scores, key=lambda item: (item[1], item[0])))
    return ClassificationResult(frozenset(t for t, n in ranked if n == 0), ranked)


def partition(
    targets: Iterable[str],
    probes: Iterable[str],
    matrix: PermissionMatrix,
    context: QueryContext,
) -> list[frozenset[str]]:
    """Group ``targets`` by their resolved states on ``probes``."""
    probes = list(probes)
    groups: dict[tuple[DefaultState, ...], set[str]] = {}
    for t in targets:
        key = tuple(resolve_state(matrix.cells[(p, t)], context) for p in probes)
        groups.setdefault(key, set()).add(t)
    return sorted((frozenset(g) for g in groups.values()), key=sorted)


def plan_probes(
    targets: Iterable[str],
    matrix: PermissionMatrix,
    max_probes: int,
    context: QueryContext = QueryContext.INSTALLED_PWA,
) -> list[str]:
    """Greedy probe selection that splits ``targets`` into singletons.

    Each round picks the descriptor producing the most groups when applied on
    top of the probes chosen so far; ties go to the lexicographically smallest
    name.  Stops on full separation, at ``max_probes``, or when no remaining
    descriptor refines the partition.
    """
    if max_probes < 1:
        raise ValueError("max_probes must be positive")
    targets = sorted(set(targets))
    if not targets:
        raise ValueError("targets must be non-empty")
    for t in targets:
        matrix.target(t)

    chosen: list[str] = []
    n_groups = 1
    candidates = sorted(matrix.descriptors)
    while n_groups < len(targets) and len(chosen) < max_probes:
        best_name, best_groups = None, n_groups
        for name in candidates:
            if name in chosen:
                continue
            k = len(partition(targets, [*chosen, name], matrix, context))
            if k > best_groups:
                best_name, best_groups = name, k
        if best_name is None:
            break
        chosen.append(best_name)
        n_groups = best_groups
    return chosen


def separates(
    targets: Iterable[str],
    probes: Iterable[str],
    matrix: PermissionMatrix,
    context: QueryContext = QueryContext.INSTALLED_PWA,
) -> bool:
    targets = list(targets)
    return len(partition(targets, probes, matrix, context)) == len(set(targets))
