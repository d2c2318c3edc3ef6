from __future__ import annotations

import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from ..errors import ConfigError


def jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null so documents stay strict JSON."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def to_json(value: Any) -> str:
    return json.dumps(jsonable(value), indent=2, allow_nan=False) + "\n"


class AbstractOutputStore:
    """Where commands put their files.

    Paths are relative and use forward slashes. Implementations can write to
    local disk or keep everything in memory (tests).
    """

    def write_text(self, path: str, text: str) -> None:
        raise NotImplementedError

    def read_text(self, path: str) -> str:
        raise NotImplementedError

    def exists(self, path: str) -> bool:
        raise NotImplementedError

    def listdir(self, path: str = "") -> Iterable[str]:
        raise NotImplementedError

    def write_json(self, path: str, value: Any) -> None:
        self.write_text(path, to_json(value))


class LocalOutputStore(AbstractOutputStore):
    """Local disk under a base directory."""

    def __init__(self, base_dir: Optional[str] = None) -> None:
        self._base_dir = base_dir if base_dir is not None else os.getcwd()

    @property
    def base_dir(self) -> str:
        return self._base_dir

    def _resolve(self, path: str) -> str:
        # join under base_dir, absolute paths are re-rooted; nothing may leave base_dir
        if os.path.isabs(path):
            path = path.lstrip("/\\")
        base = os.path.realpath(self._base_dir)
        resolved = os.path.realpath(os.path.join(base, path))
        if os.path.commonpath([base, resolved]) != base:
            raise ConfigError(f"output path {path!r} escapes {self._base_dir}")
        return resolved

    def write_text(self, path: str, text: str) -> None:
        p = self._resolve(path)
        parent = os.path.dirname(p)
        if parent:
            os.makedirs(parent, exist_ok=True)
        # newline="" keeps files byte-identical across platforms
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def read_text(self, path: str) -> str:
        with open(self._resolve(path), "r", encoding="utf-8", newline="") as fh:
            return fh.read()

    def exists(self, path: str) -> bool:
        return os.path.exists(self._resolve(path))

    def listdir(self, path: str = "") -> Iterable[str]:
        p = self._resolve(path)
        if not os.path.isdir(p):
            return []
        return sorted(os.listdir(p))


class MemoryOutputStore(AbstractOutputStore):
    """In-memory store keyed by normalized relative path. Suitable for tests."""

    def __init__(self) -> None:
        self.files: Dict[str, str] = {}

    @staticmethod
    def _key(path: str) -> str:
        parts = [part for part in path.replace("\\", "/").split("/") if part and part != "."]
        if ".." in parts:
            raise ConfigError(f"output path {path!r} escapes the store")
        return "/".join(parts)

    def write_text(self, path: str, text: str) -> None:
        self.files[self._key(path)] = text

    def read_text(self, path: str) -> str:
        try:
            return self.files[self._key(path)]
        except KeyError:
            raise FileNotFoundError(path) from None

    def exists(self, path: str) -> bool:
        key = self._key(path)
        return key in self.files or any(k.startswith(key + "/") for k in self.files)

    def listdir(self, path: str = "") -> Iterable[str]:
        key = self._key(path)
        prefix = key + "/" if key else ""
        names: List[str] = sorted({k[len(prefix):].split("/", 1)[0] for k in self.files if k.startswith(prefix)})
        return names
