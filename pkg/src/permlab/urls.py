"""Origin normalization helpers shared by the store and the scanner."""

from __future__ import annotations

from urllib.parse import urljoin, urlsplit, urlunsplit

DEFAULT_PORTS = {"http": 80, "https": 443}


def normalize_origin(url_or_origin: str) -> str:
    """Return ``scheme://host[:port]`` with a lowercase host and default ports elided.

    Accepts either a bare origin or any absolute URL.
    """
    parts = urlsplit(url_or_origin.strip())
    scheme = parts.scheme.lower()
    if scheme not in DEFAULT_PORTS or not parts.hostname:
        raise ValueError(f"not an absolute http(s) URL: {url_or_origin!r}")
    host = parts.hostname.lower()
    if ":" in host:
        host = f"[{host}]"
    port = parts.port
    if port is None or port == DEFAULT_PORTS[scheme]:
        return f"{scheme}://{host}"
    return f"{scheme}://{host}:{port}"


def is_https(url_or_origin: str) -> bool:
    return urlsplit(url_or_origin).scheme.lower() == "https"


def resolve_url(base: str, ref: str) -> str:
    """Resolve ``ref`` against ``base``; drop the fragment, keep the query."""
    parts = urlsplit(urljoin(base, ref))
    return urlunsplit((parts.scheme, parts.netloc, parts.path or "/", parts.query, ""))
