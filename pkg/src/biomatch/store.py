"""Directory-backed template storage: one hash-named file per user id plus
a JSON index.  Kept deliberately simple so tests can audit storage directly."""

from __future__ import annotations

import hashlib
import json
import os
import threading

__all__ = ["TemplateStore", "UnknownUserError"]


class UnknownUserError(KeyError):
    """The user id has no stored template (distinct from I/O failure)."""


class TemplateStore:
    def __init__(self, directory: str) -> None:
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self._index_path = os.path.join(directory, "index.json")
        self._lock = threading.Lock()
        if os.path.exists(self._index_path):
            with open(self._index_path, "r", encoding="utf-8") as f:
                self._index = json.load(f)
        else:
            self._index = {}

    @staticmethod
    def _filename(user_id: str) -> str:
        return hashlib.sha256(user_id.encode("utf-8")).hexdigest() + ".tpl"

    def store(self, user_id: str, blob: bytes) -> None:
        """Store (or overwrite: last write wins) the serialized template."""
        name = self._filename(user_id)
        path = os.path.join(self.directory, name)
        with self._lock:
            tmp = path + ".tmp"
            with open(tmp, "wb") as f:
                f.write(blob)
            os.replace(tmp, path)
            self._index[user_id] = name
            with open(self._index_path, "w", encoding="utf-8") as f:
                json.dump(self._index, f, indent=0, sort_keys=True)

    def fetch(self, user_id: str) -> bytes:
        with self._lock:
            name = self._index.get(user_id)
        if name is None:
            raise UnknownUserError(user_id)
        with open(os.path.join(self.directory, name), "rb") as f:
            return f.read()

    def known_users(self) -> list:
        with self._lock:
            return sorted(self._index)
