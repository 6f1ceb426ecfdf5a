"""Versioned JSON schemas for every emitted document."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema
from referencing import Registry, Resource

SCHEMA_VERSION = "1.0"
KINDS = ("check", "run-report", "suite-report", "exponents", "localtime", "field", "moments", "fit")


@lru_cache(maxsize=None)
def load_schema(kind: str) -> dict:
    if kind not in KINDS:
        raise KeyError(f"no schema named {kind!r}")
    text = resources.files("fbsheet.harness").joinpath("schema_files", f"{kind}.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def _registry() -> Registry:
    return Registry().with_resources((f"{k}.json", Resource.from_contents(load_schema(k))) for k in KINDS)


def validate(document: dict, kind: str) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``document`` matches schema ``kind``."""
    jsonschema.Draft202012Validator(load_schema(kind), registry=_registry()).validate(document)
