"""Shared JSON configuration document.

One top-level object with optional sections ``attack``, ``backward``,
``channel``, ``session`` and ``sweep``. A run manifest is also accepted: its
``config`` member is a document of the same shape.
"""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from .errors import InvalidParameterError

CONFIG_ENV = "PINGPONG_QKD_CONFIG"
SECTIONS = ("attack", "backward", "channel", "session", "sweep")


def load_schema(name: str) -> dict:
    text = resources.files("pingpong_qkd").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(document, schema_name: str) -> None:
    try:
        jsonschema.validate(document, load_schema(schema_name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidParameterError(f"{schema_name} document invalid at {where}: {exc.message}") from None


def resolve_path(path: Optional[str]) -> Optional[Path]:
    """Explicit path, else the environment default, else nothing."""
    if path:
        return Path(path)
    env = os.environ.get(CONFIG_ENV)
    return Path(env) if env else None


def load_config(path: Optional[str] = None) -> dict:
    """Read and validate a config document; missing path gives ``{}``.

    Raises ``OSError`` for unreadable files and
    :class:`InvalidParameterError` for malformed content.
    """
    p = resolve_path(path)
    if p is None:
        return {}
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"{p}: not valid JSON ({exc})") from None
    if isinstance(doc, dict) and "manifest_version" in doc:
        validate(doc, "manifest")
        doc = doc["config"]
    validate(doc, "config")
    return {k: doc[k] for k in SECTIONS if k in doc}
