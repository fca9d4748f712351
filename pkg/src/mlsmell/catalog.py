"""Versioned catalog of ML library names used by the semantic predicates.

The catalog maps group keys (e.g. ``estimator_constructors``) to lists of
fully qualified dotted names. Entries ending in ``.*`` match any name under
that prefix. The default catalog ships with the package; users may override
groups with ``--catalog`` (overriding is wholesale per group key).
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

CATALOG_SCHEMA_VERSION = 1


class CatalogError(ValueError):
    """Raised for malformed catalog files."""


class Catalog:
    """Immutable lookup over name groups and per-constructor hyperparameter sets."""

    def __init__(self, data: dict):
        if not isinstance(data, dict) or "names" not in data:
            raise CatalogError("catalog must be an object with a 'names' table")
        self.version: str = str(data.get("version", "0"))
        self._groups: dict[str, tuple[frozenset[str], tuple[str, ...]]] = {}
        names = data["names"]
        if not isinstance(names, dict):
            raise CatalogError("'names' must map group keys to name lists")
        for key, entries in names.items():
            if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
                raise CatalogError(f"group {key!r} must be a list of strings")
            exact = frozenset(e for e in entries if not e.endswith(".*"))
            prefixes = tuple(e[:-2] + "." for e in entries if e.endswith(".*"))
            self._groups[key] = (exact, prefixes)
        hp = data.get("hyperparameters", {})
        if not isinstance(hp, dict):
            raise CatalogError("'hyperparameters' must map constructor names to lists")
        self.hyperparameters: dict[str, tuple[str, ...]] = {
            k: tuple(v) for k, v in hp.items()
        }

    def group(self, key: str) -> frozenset[str]:
        exact, _ = self._groups.get(key, (frozenset(), ()))
        return exact

    def matches(self, qualified_name: str | None, key: str) -> bool:
        """True when the dotted name is in the group, exactly or by prefix."""
        if not qualified_name:
            return False
        exact, prefixes = self._groups.get(key, (frozenset(), ()))
        if qualified_name in exact:
            return True
        return any(qualified_name.startswith(p) for p in prefixes)

    def hyperparameter_names(self, qualified_name: str | None) -> tuple[str, ...] | None:
        """Catalogued hyperparameter keywords for a constructor, None if unlisted."""
        if not qualified_name:
            return None
        return self.hyperparameters.get(qualified_name)


def load_catalog(path: str | Path | None = None) -> Catalog:
    """Load the default catalog, with per-group overrides from ``path`` if given."""
    base = json.loads(_default_catalog_text())
    if path is not None:
        override = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(override, dict):
            raise CatalogError("catalog override must be a JSON object")
        base["names"].update(override.get("names", {}))
        base.setdefault("hyperparameters", {}).update(override.get("hyperparameters", {}))
        if "version" in override:
            base["version"] = override["version"]
    return Catalog(base)


@lru_cache(maxsize=1)
def default_catalog() -> Catalog:
    return Catalog(json.loads(_default_catalog_text()))


def _default_catalog_text() -> str:
    return (
        resources.files("mlsmell").joinpath("data/catalog.json").read_text(encoding="utf-8")
    )
