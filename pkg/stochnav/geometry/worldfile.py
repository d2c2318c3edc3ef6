"""World files: JSON with workspace, obstacles and objective."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from ..errors import ConfigError, StochNavError
from .obstacles import OBSTACLE_KINDS
from .world import QuadraticObjective, WorkspaceSphere, World

logger = logging.getLogger(__name__)


def _require(data: Dict[str, Any], key: str, path: str) -> Any:
    if not isinstance(data, dict) or key not in data:
        raise ConfigError("missing required entry", field=f"{path}.{key}" if path else key)
    return data[key]


def world_from_dict(data: Dict[str, Any], *, name: str = "world") -> World:
    try:
        ws = _require(data, "workspace", "")
        workspace = WorkspaceSphere(center=_require(ws, "center", "workspace"), radius=_require(ws, "radius", "workspace"))
        obstacles = []
        for idx, entry in enumerate(_require(data, "obstacles", "")):
            kind = _require(entry, "kind", f"obstacles[{idx}]")
            cls = OBSTACLE_KINDS.get(kind)
            if cls is None:
                raise ConfigError(f"unknown obstacle kind {kind!r}", field=f"obstacles[{idx}].kind")
            try:
                obstacles.append(cls.from_dict(entry))
            except KeyError as exc:
                raise ConfigError("missing required entry", field=f"obstacles[{idx}].{exc.args[0]}") from None
            except StochNavError as exc:
                raise ConfigError(str(exc), field=f"obstacles[{idx}]") from None
        obj = _require(data, "objective", "")
        objective = QuadraticObjective(
            minimizer=_require(obj, "xstar", "objective"),
            matrix=_require(obj, "Q", "objective"),
            offset=obj.get("fmin", 0.0),
        )
        return World(workspace=workspace, obstacles=tuple(obstacles), objective=objective, name=data.get("name", name))
    except ConfigError:
        raise
    except (StochNavError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid world: {exc}") from None


def world_to_dict(world: World) -> Dict[str, Any]:
    return world.to_dict()


def dumps_world(world: World) -> str:
    return json.dumps(world_to_dict(world), indent=2) + "\n"


def loads_world(text: str, *, name: str = "world") -> World:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed world file: {exc.msg}", line=exc.lineno) from None
    return world_from_dict(data, name=name)


def load_world(path: Union[str, Path]) -> World:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read world file {path}: {exc.strerror}") from None
    world = loads_world(text, name=path.stem)
    logger.debug("loaded world %s with %d obstacles", world.name, world.m)
    return world
