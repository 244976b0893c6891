"""Load a site snapshot from an on-disk fixture directory.

Layout::

    site.json   {"document_url": ..., "files": [{"role": "document"|"manifest"|"script",
                                                 "path": ..., "url": ...}, ...]}

The document's inline scripts are extracted from its HTML; each ``script``
file becomes an external script entry.  The fetch log is synthesized with
status 200 for every file.
"""

from __future__ import annotations

import json
from pathlib import Path

from permlab.permstore import AppManifest
from permlab.scanner.snapshot import FetchLogEntry, Script, ScriptSource, SiteSnapshot, extract_refs

ROLES = ("document", "manifest", "script")


class FixtureError(ValueError):
    """Raised for malformed fixture directories."""


def load_fixture(directory: str | Path) -> SiteSnapshot:
    directory = Path(directory)
    meta_path = directory / "site.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FixtureError(f"{directory}: missing site.json") from None
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{meta_path}: {exc}") from exc

    if not isinstance(meta, dict) or not isinstance(meta.get("document_url"), str):
        raise FixtureError(f"{meta_path}: needs a 'document_url' string")
    files = meta.get("files")
    if not isinstance(files, list):
        raise FixtureError(f"{meta_path}: needs a 'files' array")

    def read(entry: dict) -> str:
        if not isinstance(entry, dict) or entry.get("role") not in ROLES or "path" not in entry:
            raise FixtureError(f"{meta_path}: bad file entry {entry!r}")
        path = directory / entry["path"]
        try:
            return path.read_text(encoding="utf-8")
        except OSError as exc:
            raise FixtureError(f"{path}: {exc}") from exc

    documents = [f for f in files if isinstance(f, dict) and f.get("role") == "document"]
    if len(documents) != 1:
        raise FixtureError(f"{meta_path}: expected exactly one document file, found {len(documents)}")

    document_url = meta["document_url"]
    html = read(documents[0])
    snapshot = SiteSnapshot(document_url=document_url, html=html)
    snapshot.fetch_log.append(FetchLogEntry(document_url, 200, len(html.encode()), 0.0))

    inline_n = 0
    for kind, body in extract_refs(html).scripts:
        if kind == "inline":
            snapshot.scripts.append(Script(ScriptSource.inline(inline_n), body))
            inline_n += 1

    for entry in files:
        role = entry.get("role") if isinstance(entry, dict) else None
        if role == "document":
            continue
        text = read(entry)
        url = entry.get("url")
        if not isinstance(url, str):
            raise FixtureError(f"{meta_path}: {role} file {entry.get('path')} needs a 'url'")
        snapshot.fetch_log.append(FetchLogEntry(url, 200, len(text.encode()), 0.0))
        if role == "manifest":
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise FixtureError(f"{entry['path']}: manifest is not JSON: {exc}") from exc
            snapshot.manifest_url = url
            snapshot.manifest = AppManifest.from_dict(doc, url)
        else:
            snapshot.scripts.append(Script(ScriptSource.external(url), text))
    return snapshot


def load_corpus(root: str | Path) -> list[SiteSnapshot]:
    """Every fixture directory directly under ``root``, in name order."""
    root = Path(root)
    return [load_fixture(d) for d in sorted(root.iterdir()) if (d / "site.json").is_file()]
