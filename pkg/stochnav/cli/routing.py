from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable, Dict, List, Optional, TextIO, Tuple

from ..errors import ConfigError, StochNavError, UnsupportedEstimatorError
from .store import to_json


class ExitCode(IntEnum):
    OK = 0
    FAIL = 1
    USAGE = 2


@dataclass
class Response:
    code: ExitCode
    message: str = ""
    report: Dict[str, Any] = field(default_factory=dict)


logger = logging.getLogger(__name__)
Handler = Callable[..., Optional[Response]]


@dataclass
class Route:
    name: str
    handler: Handler
    help: str = ""


def OK(report: Optional[Dict[str, Any]] = None, message: str = "") -> Response:
    """
    Reports success with an optional report document.
    """
    return Response(ExitCode.OK, message, report or {})


def FAIL(reason: str, report: Optional[Dict[str, Any]] = None) -> Response:
    """
    Reports a property violation: collision, failed condition, failed validation.
    """
    return Response(ExitCode.FAIL, reason, report or {})


def USAGE(reason: str, report: Optional[Dict[str, Any]] = None) -> Response:
    """
    Reports a usage or configuration error.
    """
    return Response(ExitCode.USAGE, reason, report or {})


class Router:
    def __init__(self) -> None:
        self._routes: Dict[str, Route] = {}

    def add_route(self, name: str, handler: Handler, help: str = "") -> None:
        if name in self._routes:
            raise ValueError(f"command {name!r} registered twice")
        self._routes[name] = Route(name, handler, help)

    def match(self, name: str) -> Optional[Route]:
        return self._routes.get(name)

    def names(self) -> List[str]:
        return sorted(self._routes)

    def routes(self) -> List[Route]:
        return [self._routes[n] for n in self.names()]


class App:
    def __init__(self, *, out: Optional[TextIO] = None) -> None:
        self._router = Router()
        self._out = out

    @property
    def commands(self) -> List[Tuple[str, str]]:
        return [(r.name, r.help) for r in self._router.routes()]

    def command(self, name: str, help: str = "") -> Callable[[Handler], Handler]:
        """
        Register a handler for a subcommand.

        :param name: The subcommand name.
        :return: The decorator function.
        """
        def _decorator(func: Handler) -> Handler:
            self._router.add_route(name, func, help)
            return func
        return _decorator

    def register(self, obj: Any) -> None:
        """
        Register all methods of an object decorated with @command.

        :param obj: The object to register the methods for.
        """
        for attr in dir(obj):
            fn = getattr(obj, attr)
            source = getattr(fn, "__func__", fn)
            name = getattr(source, "__command_name__", None)
            if name is not None:
                self._router.add_route(name, fn, getattr(source, "__command_help__", ""))

    def write_report(self, name: str, response: Response) -> None:
        out = self._out if self._out is not None else sys.stdout
        document = {"command": name, "exit": int(response.code)}
        if response.message:
            document["message"] = response.message
        document.update(response.report)
        out.write(to_json(document))

    def dispatch(self, name: str, *args: Any, **kwargs: Any) -> int:
        """
        Run a subcommand and map its outcome to an exit status.

        :param name: The subcommand to run.
        :return: 0 on success, 1 on a property violation, 2 on usage errors.
        """
        route = self._router.match(name)
        if route is None:
            result: Optional[Response] = USAGE(f"unknown command {name!r}")
        else:
            try:
                result = route.handler(*args, **kwargs)
            except (ConfigError, UnsupportedEstimatorError) as e:
                logger.error("%s: %s", name, e)
                result = USAGE(str(e))
            except StochNavError as e:
                logger.error("%s: %s", name, e)
                result = FAIL(str(e))
            except Exception:
                logger.exception("Error when running command %s", name)
                result = FAIL("internal error")

        if result is None:
            # default to OK without a report
            result = OK()
        self.write_report(name, result)
        return int(result.code)


def command(name: str, help: str = "") -> Callable[[Handler], Handler]:
    def _decorator(func: Handler) -> Handler:
        setattr(func, "__command_name__", name)
        setattr(func, "__command_help__", help)
        return func
    return _decorator
