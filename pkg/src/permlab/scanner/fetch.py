"""Bounded fetching of a site's document, manifest and external scripts."""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable
from urllib.parse import urljoin, urlsplit

import requests

from permlab.permstore import AppManifest
from permlab.scanner.snapshot import (
    FetchFailure,
    FetchLogEntry,
    Script,
    ScriptSource,
    SiteSnapshot,
    extract_refs,
)

logger = logging.getLogger(__name__)

USER_AGENT = "permlab-scanner/0.1"
REQUESTS_PER_SITE = 2
DEFAULT_SITE_CONCURRENCY = 8
_REDIRECT_CODES = {301, 302, 303, 307, 308}


@dataclass(frozen=True)
class FetchLimits:
    per_site_timeout: float = 30.0
    max_redirects: int = 5
    max_body_bytes: int = 5 * 1024 * 1024
    max_scripts: int = 64

    def __post_init__(self) -> None:
        for name in ("per_site_timeout", "max_redirects", "max_body_bytes", "max_scripts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class _ResourceError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _SiteFetcher:
    """One site's worth of requests sharing a deadline and a fetch log."""

    def __init__(self, limits: FetchLimits, session: requests.Session):
        self.limits = limits
        self.session = session
        self.deadline = time.monotonic() + limits.per_site_timeout
        self.log: list[FetchLogEntry] = []
        self._lock = threading.Lock()
        self._seen: set[str] = set()

    def remaining(self) -> float:
        return self.deadline - time.monotonic()

    def _record(self, entry: FetchLogEntry) -> None:
        with self._lock:
            self.log.append(entry)

    def _single(self, url: str) -> tuple[requests.Response, bytes]:
        with self._lock:
            if url in self._seen:
                raise _ResourceError("duplicate", f"already requested {url}")
            self._seen.add(url)
        remaining = self.remaining()
        if remaining <= 0:
            raise _ResourceError("timeout", "per-site timeout exceeded")
        started = time.monotonic()
        status = None
        size = 0
        try:
            resp = self.session.get(
                url,
                allow_redirects=False,
                stream=True,
                timeout=(remaining, remaining),
                headers={"User-Agent": USER_AGENT},
            )
            status = resp.status_code
            chunks = []
            with resp:
                for chunk in resp.iter_content(64 * 1024):
                    size += len(chunk)
                    if size > self.limits.max_body_bytes:
                        raise _ResourceError("too-large", f"body exceeds {self.limits.max_body_bytes} bytes")
                    if self.remaining() <= 0:
                        raise _ResourceError("timeout", "per-site timeout exceeded")
                    chunks.append(chunk)
        except _ResourceError as exc:
            self._record(FetchLogEntry(url, status, size, time.monotonic() - started, exc.kind))
            raise
        except requests.Timeout as exc:
            self._record(FetchLogEntry(url, status, size, time.monotonic() - started, "timeout"))
            raise _ResourceError("timeout", str(exc)) from exc
        except requests.RequestException as exc:
            self._record(FetchLogEntry(url, status, size, time.monotonic() - started, "unreachable"))
            raise _ResourceError("unreachable", str(exc)) from exc
        self._record(FetchLogEntry(url, status, size, time.monotonic() - started))
        return resp, b"".join(chunks)

    def get(self, url: str) -> tuple[str, requests.Response, bytes]:
        """GET following at most ``max_redirects`` redirects; returns the final URL too."""
        for hop in range(self.limits.max_redirects + 1):
            resp, body = self._single(url)
            if resp.status_code in _REDIRECT_CODES and resp.headers.get("Location"):
                if hop == self.limits.max_redirects:
                    raise _ResourceError(
                        "redirect-limit", f"more than {self.limits.max_redirects} redirects"
                    )
                url = urljoin(url, resp.headers["Location"])
                if url in self._seen:
                    raise _ResourceError("redirect-limit", f"redirect loop at {url}")
                continue
            if resp.status_code >= 400:
                raise _ResourceError("http-status", f"HTTP {resp.status_code} for {url}")
            return url, resp, body
        raise AssertionError("unreachable")


def _decode(resp: requests.Response, body: bytes) -> str:
    return body.decode(resp.encoding or "utf-8", errors="replace")


def fetch_site(
    url: str,
    limits: FetchLimits | None = None,
    session: requests.Session | None = None,
) -> SiteSnapshot:
    """Fetch one site without raising.

    Network problems end up in ``fetch_log`` (per resource) and in
    ``snapshot.failure`` (site level).  The snapshot keeps whatever was
    retrieved before a failure.
    """
    limits = limits or FetchLimits()
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise ValueError(f"not an absolute http(s) URL: {url!r}")
    own_session = session is None
    session = session or requests.Session()
    fetcher = _SiteFetcher(limits, session)
    snapshot = SiteSnapshot(document_url=url)
    try:
        _fill_snapshot(snapshot, fetcher)
    finally:
        snapshot.fetch_log = list(fetcher.log)
        if own_session:
            session.close()
    return snapshot


def _fill_snapshot(snapshot: SiteSnapshot, fetcher: _SiteFetcher) -> None:
    try:
        final_url, resp, body = fetcher.get(snapshot.document_url)
    except _ResourceError as exc:
        snapshot.failure = FetchFailure(exc.kind, str(exc))
        return
    snapshot.document_url = final_url
    snapshot.html = _decode(resp, body)
    refs = extract_refs(snapshot.html)

    slots: list[Script | str] = []
    inline_n = 0
    for kind, value in refs.scripts[: fetcher.limits.max_scripts]:
        if kind == "inline":
            slots.append(Script(ScriptSource.inline(inline_n), value))
            inline_n += 1
        else:
            slots.append(urljoin(final_url, value))
    if refs.manifest_href:
        snapshot.manifest_url = urljoin(final_url, refs.manifest_href)

    wanted = list(dict.fromkeys(s for s in slots if isinstance(s, str)))
    if snapshot.manifest_url:
        wanted = [snapshot.manifest_url] + [u for u in wanted if u != snapshot.manifest_url]

    def fetch_one(u: str):
        try:
            return fetcher.get(u)
        except _ResourceError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=REQUESTS_PER_SITE) as pool:
        results = dict(zip(wanted, pool.map(fetch_one, wanted)))

    timed_out = [u for u, r in results.items() if isinstance(r, _ResourceError) and r.kind == "timeout"]

    if snapshot.manifest_url:
        got = results[snapshot.manifest_url]
        if not isinstance(got, _ResourceError):
            try:
                doc = json.loads(_decode(got[1], got[2]))
            except json.JSONDecodeError:
                logger.info("manifest at %s is not JSON", snapshot.manifest_url)
            else:
                if isinstance(doc, dict):
                    snapshot.manifest = AppManifest.from_dict(doc, got[0])

    for slot in slots:
        if isinstance(slot, Script):
            snapshot.scripts.append(slot)
            continue
        got = results[slot]
        if not isinstance(got, _ResourceError):
            snapshot.scripts.append(Script(ScriptSource.external(slot), _decode(got[1], got[2])))

    if timed_out:
        snapshot.failure = FetchFailure("timeout", f"per-site timeout exceeded ({len(timed_out)} resources)")


def fetch_sites(
    urls: Iterable[str],
    limits: FetchLimits | None = None,
    concurrency: int = DEFAULT_SITE_CONCURRENCY,
) -> list[SiteSnapshot]:
    """Fetch several sites in parallel; results follow the input order."""
    urls = list(urls)
    if concurrency < 1:
        raise ValueError("concurrency must be positive")
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(lambda u: fetch_site(u, limits), urls))
