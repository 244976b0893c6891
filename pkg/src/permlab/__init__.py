"""Browser permission model toolkit for progressive web apps.

Modules: ``registry`` (descriptor catalog), ``matrix`` (default states per
browser), ``fingerprint`` (browser identification from default states),
``permstore`` (scoped permission store simulator) and ``scanner`` (static
PWA/permission-usage scanner).
"""

__version__ = "0.1.0"
