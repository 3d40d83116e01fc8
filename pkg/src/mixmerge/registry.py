"""Append-only JSONL run registry keyed by content hash, with binary checkpoints alongside."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

from mixmerge.errors import StructuralError
from mixmerge.evalx import RunRecord
from mixmerge.params import ParamVector, load_params, save_params

log = logging.getLogger(__name__)


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_key(*parts) -> str:
    return hashlib.sha256(canonical(list(parts)).encode("utf-8")).hexdigest()[:24]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary JSON-able labels."""
    digest = hashlib.sha256(canonical(list(parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass(frozen=True)
class Entry:
    key: str
    kind: str
    record: Optional[RunRecord]
    checkpoint: Optional[str]
    meta: dict

    def to_json(self) -> str:
        return canonical(
            {
                "key": self.key,
                "kind": self.kind,
                "record": self.record.to_dict() if self.record else None,
                "checkpoint": self.checkpoint,
                "meta": self.meta,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "Entry":
        d = json.loads(line)
        rec = RunRecord.from_dict(d["record"]) if d.get("record") else None
        return cls(d["key"], d["kind"], rec, d.get("checkpoint"), d.get("meta", {}))


class Registry:
    """Single-writer log. Readers only ever see whole lines, so a torn final
    line from an interrupted write is ignored on load."""

    def __init__(self, root):
        self.root = Path(root)
        self.path = self.root / "registry.jsonl"
        self.ckpt_dir = self.root / "checkpoints"
        self._entries: dict[str, Entry] = {}
        self._order: list[str] = []
        self._load()

    def _load(self):
        if not self.path.exists():
            return
        text = self.path.read_text()
        lines = text.split("\n")
        if not text.endswith("\n"):
            if lines[-1]:
                log.warning("ignoring torn trailing registry line")
            lines = lines[:-1]
        for line in lines:
            if not line:
                continue
            e = Entry.from_json(line)
            if e.key in self._entries:
                raise StructuralError(f"duplicate registry key {e.key}")
            self._entries[e.key] = e
            self._order.append(e.key)

    def __len__(self):
        return len(self._order)

    def __contains__(self, key):
        return key in self._entries

    def __iter__(self) -> Iterator[Entry]:
        return (self._entries[k] for k in self._order)

    def get(self, key) -> Optional[Entry]:
        return self._entries.get(key)

    def checkpoint_path(self, key: str) -> Path:
        return self.ckpt_dir / f"{key}.bin"

    def append(self, key: str, kind: str, record: Optional[RunRecord] = None,
               params: Optional[ParamVector] = None, meta: Optional[dict] = None) -> Entry:
        if key in self._entries:
            raise StructuralError(f"registry key {key} already written")
        ckpt = None
        if params is not None:
            path = self.checkpoint_path(key)
            save_params(path, params, provenance={"key": key, "kind": kind, **(meta or {})})
            ckpt = str(path.relative_to(self.root))
        entry = Entry(key, kind, record, ckpt, meta or {})
        self.root.mkdir(parents=True, exist_ok=True)
        # a torn line left by an interrupted writer must not swallow this one
        if self.path.exists() and self.path.stat().st_size:
            with self.path.open("rb") as fh:
                fh.seek(-1, os.SEEK_END)
                if fh.read(1) != b"\n":
                    self._truncate_torn_tail()
        with self.path.open("a") as fh:
            fh.write(entry.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._entries[key] = entry
        self._order.append(key)
        return entry

    def _truncate_torn_tail(self):
        data = self.path.read_bytes()
        cut = data.rfind(b"\n") + 1
        with self.path.open("r+b") as fh:
            fh.truncate(cut)

    def load_checkpoint(self, key: str) -> Optional[ParamVector]:
        e = self._entries.get(key)
        if e is None or e.checkpoint is None:
            return None
        path = self.root / e.checkpoint
        if not path.exists():
            return None
        return load_params(path)

    def entries(self, kind: Optional[str] = None) -> list[Entry]:
        return [e for e in self if kind is None or e.kind == kind]

    def prune(self, kinds=("oracle", "reference")) -> int:
        """Delete checkpoint files of the given kinds; registry records stay."""
        removed = 0
        for e in self:
            if e.kind in kinds and e.checkpoint:
                for p in (self.root / e.checkpoint, self.root / (e.checkpoint + ".json")):
                    if p.exists():
                        p.unlink()
                        removed += 1
        return removed
