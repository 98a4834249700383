"""Artifact persistence: save/restore for every document kind.

All artifacts are text documents (UTF-8 JSON, newline-delimited for
episodes) with a format tag and an integer version. Restoring dispatches
on the tag; a version the reader does not support raises VersionError and
corrupted files raise PersistError carrying the byte offset the parser
stopped at. Round-trips are lossless: JSON float repr preserves doubles
bit-exactly and counts are integers.
"""

from __future__ import annotations

import json
import os
from typing import Any

from . import arena, core, distill, markov, progression, quantize, style


class PersistError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} (offset {offset})")


class VersionError(PersistError):
    pass


KINDS = ("episode", "ensemble", "net", "scheme", "report", "dataset", "model", "arena-config")

_EXTENSIONS = {
    "episode": ".episode.jsonl",
    "ensemble": ".ensemble.json",
    "net": ".net.json",
    "scheme": ".scheme.json",
    "report": ".report.json",
    "dataset": ".dataset.json",
    "model": ".model.json",
    "arena-config": ".arena.json",
}

_TO_DOC = {
    "ensemble": markov.ensemble_to_doc,
    "net": distill.policy_net_to_doc,
    "scheme": quantize.scheme_to_doc,
    "report": lambda report: report.to_doc(),
    "dataset": distill.dataset_to_doc,
    "model": progression.model_to_doc,
    "arena-config": arena.config_to_doc,
}

_FROM_DOC = {
    markov.ENSEMBLE_FORMAT: markov.ensemble_from_doc,
    distill.POLICY_NET_FORMAT: distill.policy_net_from_doc,
    quantize.SCHEME_FORMAT: quantize.scheme_from_doc,
    style.REPORT_FORMAT: style.StyleDistanceReport.from_doc,
    distill.DATASET_FORMAT: distill.dataset_from_doc,
    progression.MODEL_FORMAT: progression.model_from_doc,
    arena.CONFIG_FORMAT: arena.config_from_doc,
}


def save(kind: str, artifact: Any, root: str, name: str) -> str:
    """Write the artifact under root; returns the path."""
    if kind not in KINDS:
        raise ValueError(f"unknown artifact kind {kind!r}; choose from {KINDS}")
    os.makedirs(root, exist_ok=True)
    path = os.path.join(root, name + _EXTENSIONS[kind])
    if kind == "episode":
        core.save_episode(artifact, path)
        return path
    doc = _TO_DOC[kind](artifact)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        json.dump(doc, fp)
        fp.write("\n")
    os.replace(tmp, path)
    return path


def restore(path: str) -> Any:
    """Load any artifact, dispatching on its format tag."""
    with open(path, "r", encoding="utf-8") as fp:
        first = fp.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise PersistError(f"cannot parse {path}: {exc.msg}", offset=exc.pos) from exc
        if not isinstance(header, dict):
            raise PersistError(f"{path}: document is not a record", offset=0)
        fmt = header.get("format")
        if fmt == core.EPISODE_FORMAT:
            fp.seek(0)
            try:
                return core.read_episode(fp)
            except json.JSONDecodeError as exc:
                raise PersistError(f"cannot parse {path}: {exc.msg}", offset=exc.pos) from exc
            except ValueError as exc:
                if "version" in str(exc):
                    raise VersionError(str(exc)) from exc
                raise PersistError(str(exc)) from exc
    # single-document kinds: parse whole file
    with open(path, "r", encoding="utf-8") as fp:
        raw = fp.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise PersistError(f"cannot parse {path}: {exc.msg}", offset=exc.pos) from exc
    fmt = doc.get("format")
    loader = _FROM_DOC.get(fmt)
    if loader is None:
        raise PersistError(f"{path}: unknown artifact format {fmt!r}")
    try:
        return loader(doc)
    except ValueError as exc:
        if "version mismatch" in str(exc):
            raise VersionError(str(exc)) from exc
        raise PersistError(str(exc)) from exc
