"""Append-only completion cache keyed by request hash.

One JSONL line per entry: {"key": ..., "value": ...}. The whole file is
indexed into memory at open; writes append under a lock. A cache opened with
path=None is memory-only (used by tests and scripted runs).
"""

from __future__ import annotations

import json
import threading
from pathlib import Path


class CompletionCache:
    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path else None
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            with self._path.open(encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self._entries.setdefault(rec["key"], rec["value"])

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, value: str) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = value
            if self._path:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with self._path.open("a", encoding="utf-8") as f:
                    f.write(json.dumps({"key": key, "value": value}) + "\n")
