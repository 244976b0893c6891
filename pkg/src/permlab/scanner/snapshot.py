"""Site snapshot types and static HTML extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Any

from permlab.permstore import AppManifest


@dataclass(frozen=True)
class ScriptSource:
    """Where a script body came from: the n-th inline block or an external URL."""

    inline_index: int | None = None
    url: str | None = None

    @classmethod
    def inline(cls, index: int) -> ScriptSource:
        return cls(inline_index=index)

    @classmethod
    def external(cls, url: str) -> ScriptSource:
        return cls(url=url)

    @property
    def is_inline(self) -> bool:
        return self.inline_index is not None

    def __str__(self) -> str:
        return f"inline:{self.inline_index}" if self.is_inline else str(self.url)

    def to_dict(self) -> dict[str, Any]:
        return {"inline": self.inline_index} if self.is_inline else {"external": self.url}


@dataclass(frozen=True)
class Script:
    source: ScriptSource
    body: str


@dataclass(frozen=True)
class FetchLogEntry:
    url: str
    status: int | None
    bytes: int
    duration: float
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "url": self.url,
            "status": self.status,
            "bytes": self.bytes,
            "duration": round(self.duration, 6),
            "error": self.error,
        }


@dataclass(frozen=True)
class FetchFailure:
    """Site-level failure. ``kind`` is one of unreachable, timeout,
    redirect-limit, http-status, too-large."""

    kind: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"kind": self.kind, "message": self.message}


@dataclass
class SiteSnapshot:
    document_url: str
    html: str = ""
    scripts: list[Script] = field(default_factory=list)
    manifest_url: str | None = None
    manifest: AppManifest | None = None
    fetch_log: list[FetchLogEntry] = field(default_factory=list)
    failure: FetchFailure | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None


@dataclass
class ExtractedRefs:
    manifest_href: str | None = None
    # document order; each item is ("inline", body) or ("external", src)
    scripts: list[tuple[str, str]] = field(default_factory=list)


_NON_JS_TYPES = ("json", "template", "text/html", "text/x-")


class _RefParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.refs = ExtractedRefs()
        self._inline: list[str] | None = None

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        a = {k.lower(): (v or "") for k, v in attrs}
        if tag == "link":
            rels = a.get("rel", "").lower().split()
            if "manifest" in rels and a.get("href") and self.refs.manifest_href is None:
                self.refs.manifest_href = a["href"].strip()
        elif tag == "script":
            stype = a.get("type", "").lower()
            if any(t in stype for t in _NON_JS_TYPES):
                return
            src = a.get("src", "").strip()
            if src:
                self.refs.scripts.append(("external", src))
            else:
                self._inline = []

    def handle_data(self, data: str) -> None:
        if self._inline is not None:
            self._inline.append(data)

    def handle_endtag(self, tag: str) -> None:
        if tag == "script" and self._inline is not None:
            self.refs.scripts.append(("inline", "".join(self._inline)))
            self._inline = None


def extract_refs(html: str) -> ExtractedRefs:
    """Find ``<link rel="manifest">``, external ``<script src>`` and inline scripts."""
    parser = _RefParser()
    parser.feed(html)
    parser.close()
    if parser._inline is not None:
        parser.refs.scripts.append(("inline", "".join(parser._inline)))
    return parser.refs
