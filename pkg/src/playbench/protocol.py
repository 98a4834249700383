"""Wire protocol: newline-delimited JSON records over a duplex stream.

One record per line (or per WebSocket text message), every record carries
``v`` (protocol version) and ``kind``. Unknown or malformed input never
kills a session; the server answers with an error record. State records
stay within the 1 kB envelope so a session can stream at full tick rate
over thin links.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

PROTOCOL_VERSION = 1

KINDS = (
    "reset",
    "step",
    "state",
    "override",
    "demo-start",
    "demo-end",
    "competence",
    "save",
    "load",
    "saved",
    "loaded",
    "error",
)

MAX_STATE_BYTES = 1024


class ProtocolError(ValueError):
    pass


def make_message(kind: str, **payload: Any) -> dict:
    if kind not in KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}")
    msg = {"v": PROTOCOL_VERSION, "kind": kind}
    msg.update(payload)
    return msg


def encode_message(msg: Mapping) -> str:
    """One compact line, newline-terminated."""
    return json.dumps(msg, separators=(",", ":")) + "\n"


def decode_line(line: str | bytes) -> dict:
    """Parse one record; malformed input raises ProtocolError."""
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    line = line.strip()
    if not line:
        raise ProtocolError("empty message")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON at offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError(f"message must be an object, got {type(msg).__name__}")
    if msg.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {msg.get('v')!r}")
    if not isinstance(msg.get("kind"), str):
        raise ProtocolError("message has no kind")
    return msg


def error_message(reason: str) -> dict:
    return make_message("error", reason=reason)
