"""Static PWA scanner: fetch or load a site, then analyse it offline."""

from permlab.scanner.analysis import (
    AggregateStats,
    OriginReport,
    PwaCheck,
    UsageFinding,
    UsagePattern,
    aggregate,
    check_installable,
    detect_sw,
    find_permission_usages,
    group_origin,
    load_patterns,
    scan_report,
)
from permlab.scanner.fetch import FetchLimits, fetch_site, fetch_sites
from permlab.scanner.fixture import FixtureError, load_corpus, load_fixture
from permlab.scanner.snapshot import FetchFailure, FetchLogEntry, Script, ScriptSource, SiteSnapshot

__all__ = [
    "AggregateStats",
    "FetchFailure",
    "FetchLimits",
    "FetchLogEntry",
    "FixtureError",
    "OriginReport",
    "PwaCheck",
    "Script",
    "ScriptSource",
    "SiteSnapshot",
    "UsageFinding",
    "UsagePattern",
    "aggregate",
    "check_installable",
    "detect_sw",
    "fetch_site",
    "fetch_sites",
    "find_permission_usages",
    "group_origin",
    "load_corpus",
    "load_fixture",
    "load_patterns",
    "scan_report",
]
