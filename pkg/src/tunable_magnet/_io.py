"""
Output plumbing shared by the command-line tools: metadata headers and deterministic JSON/CSV emission.

Every file written by the tools starts with a metadata line naming the tool version and a hash of the effective
configuration. CSV files carry it as a ``#`` comment; JSON documents carry it as a ``meta`` member printed alone
on the first line, so the whole file is still plain JSON.
"""

from __future__ import annotations
import hashlib
import json
from pathlib import Path
from typing import Any

from . import __version__

TOOL = "tunable-magnet"


def config_hash(config: Any) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def meta(config: Any) -> dict[str, str]:
    return {"tool": TOOL, "version": __version__, "config_sha256": config_hash(config)}


def csv_preamble(config: Any) -> str:
    m = meta(config)
    return f"# {m['tool']} {m['version']} config_sha256={m['config_sha256']}"


def dumps_json(doc: dict[str, Any], config: Any) -> str:
    head = json.dumps({"meta": meta(config)}, separators=(", ", ": "))
    body = json.dumps(doc, indent=2, allow_nan=False)
    if body == "{}":
        return head + "\n"
    return head[:-1] + ",\n" + body[1:].lstrip("\n") + "\n"


def loads_json(text: str) -> dict[str, Any]:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("expected a JSON object")
    doc.pop("meta", None)
    return doc


def write_text(path: Path, text: str) -> None:
    with path.open("w", newline="") as f:
        f.write(text)
