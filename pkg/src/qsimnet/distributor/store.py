"""Object stores used as the hub between the agent and its workers.

Objects are write-once.  ``put`` refuses to overwrite and ``put_if_absent``
reports whether the caller created the object, which is what workers use to
claim units.
"""

from __future__ import annotations

import abc
import os
import threading
import uuid
from pathlib import Path

__all__ = ["DirectoryStore", "InMemoryStore", "ObjectExistsError", "ObjectStore", "StoreUnavailable"]

STORE_DIR_ENV = "QSIMNET_STORE_DIR"


class ObjectExistsError(KeyError):
    pass


class StoreUnavailable(OSError):
    pass


class ObjectStore(abc.ABC):
    @abc.abstractmethod
    def put_if_absent(self, key: str, data: bytes) -> bool:
        """Create ``key`` atomically; False if it already existed."""

    @abc.abstractmethod
    def get(self, key: str) -> bytes | None:
        ...

    @abc.abstractmethod
    def list(self, prefix: str = "") -> list[str]:
        """Keys starting with ``prefix``, sorted."""

    def put(self, key: str, data: bytes) -> None:
        if not self.put_if_absent(key, data):
            raise ObjectExistsError(key)

    def exists(self, key: str) -> bool:
        return self.get(key) is not None


class InMemoryStore(ObjectStore):
    def __init__(self):
        self._objects: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put_if_absent(self, key, data):
        with self._lock:
            if key in self._objects:
                return False
            self._objects[key] = bytes(data)
            return True

    def get(self, key):
        with self._lock:
            return self._objects.get(key)

    def list(self, prefix=""):
        with self._lock:
            return sorted(k for k in self._objects if k.startswith(prefix))


class DirectoryStore(ObjectStore):
    """One file per key under ``root``; safe across processes on a local filesystem.

    Content is written to a temporary file and hard-linked into place, so a
    key either does not exist or holds its complete content.
    """

    _TMP = ".tmp-"

    def __init__(self, root: str | os.PathLike | None = None):
        root = root if root is not None else os.environ.get(STORE_DIR_ENV)
        if not root:
            raise StoreUnavailable(f"no store root given and {STORE_DIR_ENV} is unset")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        parts = key.split("/")
        if not key or any(p in ("", ".", "..") or p.startswith(self._TMP) for p in parts):
            raise ValueError(f"invalid key {key!r}")
        return self.root.joinpath(*parts)

    def put_if_absent(self, key, data):
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.parent / f"{self._TMP}{uuid.uuid4().hex}"
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        try:
            os.link(tmp, path)
            return True
        except FileExistsError:
            return False
        finally:
            os.unlink(tmp)

    def get(self, key):
        try:
            return self._path(key).read_bytes()
        except (FileNotFoundError, NotADirectoryError, IsADirectoryError):
            return None

    def list(self, prefix=""):
        base = prefix.rsplit("/", 1)[0] if "/" in prefix else ""
        start = self.root.joinpath(*base.split("/")) if base else self.root
        if not start.is_dir():
            return []
        out = []
        for dirpath, _, files in os.walk(start):
            rel = Path(dirpath).relative_to(self.root).as_posix()
            for f in files:
                if f.startswith(self._TMP):
                    continue
                key = f if rel == "." else f"{rel}/{f}"
                if key.startswith(prefix):
                    out.append(key)
        return sorted(out)
