"""Post-fetch analysis: installability, service workers, permission-API usage,
multi-PWA origins, and corpus-level counts.

All matching is textual.  Matches inside comments or string literals count.
"""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from permlab._data import read_json
from permlab.permstore import DerivationError, derive_app_id
from permlab.registry import Registry, default_registry
from permlab.scanner.snapshot import ScriptSource, SiteSnapshot
from permlab.urls import is_https, normalize_origin, resolve_url

SW_REGISTRATION = re.compile(r"\bserviceWorker\s*\.\s*register\s*\(")
UNKNOWN_QUERY_PATTERN = "permissions-query-unknown"

# Measured at crawl scale; kept as documentation only, never asserted against a scan.
REFERENCE_COUNTS = {
    "installable_pwas": 291_583,
    "multi_pwa_origins": 12_487,
    "top_descriptor_pwas": {"clipboard-write": 32_135, "clipboard-read": 24_753, "geolocation": 11_350},
    "origins_sharing": {
        "geolocation": 378,
        "notifications": 324,
        "clipboard-read": 12,
        "microphone+camera": 85,
        "nfc": 1,
    },
}


class PatternError(ValueError):
    """Raised for malformed pattern tables."""


@dataclass(frozen=True)
class UsagePattern:
    pattern_id: str
    regex: re.Pattern[str]
    descriptors: tuple[str, ...]
    # fixed | media-constraints | query-name
    attribution: str = "fixed"


_ATTRIBUTIONS = ("fixed", "media-constraints", "query-name")


def load_patterns(path: str | Path | None = None, registry: Registry | None = None) -> list[UsagePattern]:
    registry = registry or default_registry()
    if path is None:
        doc = read_json("patterns.json")
    else:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise PatternError(f"{path}: {exc}") from exc
    entries = doc.get("patterns") if isinstance(doc, dict) else None
    if not isinstance(entries, list):
        raise PatternError("pattern table needs a top-level 'patterns' array")
    out = []
    for raw in entries:
        try:
            pid = raw["pattern_id"]
            regex = re.compile(raw["expression"])
            descriptors = tuple(raw.get("descriptors", ()))
            attribution = raw.get("attribution", "fixed")
        except (KeyError, TypeError, re.error) as exc:
            raise PatternError(f"bad pattern entry {raw!r}: {exc}") from exc
        if attribution not in _ATTRIBUTIONS:
            raise PatternError(f"{pid}: unknown attribution {attribution!r}")
        for name in descriptors:
            if name not in registry:
                raise PatternError(f"{pid}: descriptor {name!r} not in registry")
        if attribution == "query-name" and regex.groups < 1:
            raise PatternError(f"{pid}: query-name patterns need a capture group for the name")
        out.append(UsagePattern(pid, regex, descriptors, attribution))
    return out


@dataclass(frozen=True)
class PwaCheck:
    document_url: str
    https: bool
    has_manifest: bool
    has_name: bool
    has_display: bool
    start_url_resolved: str | None
    sw_detected: bool
    installable: bool
    app_id: str | None

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def detect_sw(snapshot: SiteSnapshot) -> bool:
    return any(SW_REGISTRATION.search(s.body) for s in snapshot.scripts)


def check_installable(snapshot: SiteSnapshot) -> PwaCheck:
    m = snapshot.manifest
    https = is_https(snapshot.document_url)
    has_manifest = m is not None
    has_name = bool(m and m.name and m.name.strip())
    has_display = bool(m and m.display and m.display.strip())
    start_url = None
    app_id = None
    if m is not None:
        base = m.manifest_url or snapshot.manifest_url or snapshot.document_url
        if m.start_url is not None:
            start_url = resolve_url(base, m.start_url)
        try:
            app_id = derive_app_id(m, base)
        except DerivationError:
            pass
    check = PwaCheck(
        document_url=snapshot.document_url,
        https=https,
        has_manifest=has_manifest,
        has_name=has_name,
        has_display=has_display,
        start_url_resolved=start_url,
        sw_detected=detect_sw(snapshot),
        installable=https and has_manifest and has_name and has_display,
        app_id=app_id,
    )
    assert check.installable == (check.https and check.has_manifest and check.has_name and check.has_display)
    return check


@dataclass(frozen=True)
class UsageFinding:
    descriptor: str | None
    pattern_id: str
    source: ScriptSource
    line: int
    column: int
    excerpt: str
    # offset into the script body, for verbatim checks
    offset: int = field(default=0, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "descriptor": self.descriptor,
            "pattern_id": self.pattern_id,
            "source": self.source.to_dict(),
            "line": self.line,
            "column": self.column,
            "excerpt": self.excerpt,
        }


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    return line, offset - (text.rfind("\n", 0, offset) + 1) + 1


def _call_arguments(text: str, open_paren_end: int) -> str:
    """Text between an opening paren (ending at ``open_paren_end``) and its match."""
    depth = 1
    for i in range(open_paren_end, len(text)):
        c = text[i]
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return text[open_paren_end:i]
    return text[open_paren_end:]


_VIDEO = re.compile(r"\bvideo\b")
_AUDIO = re.compile(r"\baudio\b")


def _media_descriptors(args: str) -> list[str]:
    video, audio = bool(_VIDEO.search(args)), bool(_AUDIO.search(args))
    if video and not audio:
        return ["camera"]
    if audio and not video:
        return ["microphone"]
    # both requested, or constraints not visible in the text
    return ["camera", "microphone"]


def find_permission_usages(
    snapshot: SiteSnapshot,
    registry: Registry | None = None,
    patterns: Sequence[UsagePattern] | None = None,
) -> list[UsageFinding]:
    """Every pattern match in every script, attributed to descriptors."""
    registry = registry or default_registry()
    patterns = load_patterns(registry=registry) if patterns is None else patterns
    findings = []
    for script in snapshot.scripts:
        body = script.body
        for pat in patterns:
            for m in pat.regex.finditer(body):
                line, col = _line_col(body, m.start())

                def emit(descriptor: str | None, pattern_id: str = pat.pattern_id) -> None:
                    findings.append(
                        UsageFinding(descriptor, pattern_id, script.source, line, col, m.group(0), m.start())
                    )

                if pat.attribution == "query-name":
                    name = m.group(m.re.groups)
                    if name in registry:
                        emit(registry.canonical(name))
                    else:
                        emit(None, UNKNOWN_QUERY_PATTERN)
                elif pat.attribution == "media-constraints":
                    for name in _media_descriptors(_call_arguments(body, m.end())):
                        emit(name)
                else:
                    for name in pat.descriptors:
                        emit(name)
    return findings


@dataclass
class OriginReport:
    origin: str
    apps: list[PwaCheck]
    multi_pwa: bool
    usages: list[list[UsageFinding]]
    shared_risk_descriptors: set[str]
    failures: list[dict[str, Any]] = field(default_factory=list)

    def app_descriptors(self, index: int) -> set[str]:
        return {f.descriptor for f in self.usages[index] if f.descriptor}

    def to_dict(self) -> dict[str, Any]:
        return {
            "origin": self.origin,
            "apps": [a.to_dict() for a in self.apps],
            "multi_pwa": self.multi_pwa,
            "usages": [[f.to_dict() for f in u] for u in self.usages],
            "shared_risk_descriptors": sorted(self.shared_risk_descriptors),
            "failures": self.failures,
        }


def _snapshot_failures(snapshot: SiteSnapshot) -> list[dict[str, Any]]:
    out = []
    if snapshot.failure is not None:
        out.append({"document_url": snapshot.document_url, **snapshot.failure.to_dict()})
    for entry in snapshot.fetch_log:
        if entry.error and (snapshot.failure is None or entry.error != snapshot.failure.kind):
            out.append({"document_url": snapshot.document_url, "kind": entry.error, "message": entry.url})
    return out


def group_origin(
    snapshots: Iterable[SiteSnapshot],
    registry: Registry | None = None,
    patterns: Sequence[UsagePattern] | None = None,
) -> list[OriginReport]:
    """One report per normalized origin, ordered by origin."""
    registry = registry or default_registry()
    patterns = load_patterns(registry=registry) if patterns is None else patterns
    by_origin: dict[str, list[SiteSnapshot]] = defaultdict(list)
    for snap in snapshots:
        by_origin[normalize_origin(snap.document_url)].append(snap)

    reports = []
    for origin in sorted(by_origin):
        snaps = by_origin[origin]
        apps = [check_installable(s) for s in snaps]
        usages = [find_permission_usages(s, registry, patterns) for s in snaps]
        installable_ids = {a.app_id for a in apps if a.installable and a.app_id}
        users: dict[str, set[str]] = defaultdict(set)
        for app, found in zip(apps, usages):
            if app.app_id is None:
                continue
            for f in found:
                if f.descriptor:
                    users[f.descriptor].add(app.app_id)
        failures = [f for s in snaps for f in _snapshot_failures(s)]
        reports.append(
            OriginReport(
                origin=origin,
                apps=apps,
                multi_pwa=len(installable_ids) >= 2,
                usages=usages,
                shared_risk_descriptors={d for d, ids in users.items() if len(ids) >= 2},
                failures=failures,
            )
        )
    return reports


@dataclass
class AggregateStats:
    apps_scanned: int = 0
    origins: int = 0
    multi_pwa_origins: int = 0
    descriptor_apps: Counter = field(default_factory=Counter)
    shared_origins: Counter = field(default_factory=Counter)

    def __add__(self, other: AggregateStats) -> AggregateStats:
        return AggregateStats(
            self.apps_scanned + other.apps_scanned,
            self.origins + other.origins,
            self.multi_pwa_origins + other.multi_pwa_origins,
            self.descriptor_apps + other.descriptor_apps,
            self.shared_origins + other.shared_origins,
        )

    def ranking(self, registry: Registry | None = None) -> list[dict[str, Any]]:
        """Descriptors by number of apps using them, most used first."""
        return _ranked(self.descriptor_apps, registry or default_registry())

    def to_dict(self, registry: Registry | None = None) -> dict[str, Any]:
        registry = registry or default_registry()
        return {
            "apps_scanned": self.apps_scanned,
            "origins": self.origins,
            "multi_pwa_origins": self.multi_pwa_origins,
            "descriptor_ranking": _ranked(self.descriptor_apps, registry),
            "shared_origin_ranking": _ranked(self.shared_origins, registry),
        }


def _ranked(counts: Counter, registry: Registry) -> list[dict[str, Any]]:
    rows = []
    for name, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if n <= 0:
            continue
        d = registry.get(name)
        rows.append({"descriptor": name, "count": n, "invocable": d.invocable, "prompted": d.prompted.value})
    return rows


def aggregate(reports: Iterable[OriginReport]) -> AggregateStats:
    stats = AggregateStats()
    for rep in reports:
        stats.origins += 1
        stats.apps_scanned += len(rep.apps)
        stats.multi_pwa_origins += int(rep.multi_pwa)
        for i in range(len(rep.apps)):
            stats.descriptor_apps.update(rep.app_descriptors(i))
        stats.shared_origins.update(rep.shared_risk_descriptors)
    return stats


def scan_report(reports: Sequence[OriginReport], registry: Registry | None = None) -> dict[str, Any]:
    """The JSON scan-report document."""
    return {
        "origin_reports": [r.to_dict() for r in reports],
        "aggregate": aggregate(reports).to_dict(registry),
    }
