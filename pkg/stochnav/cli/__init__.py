from .routing import App, ExitCode, Response, command, OK, FAIL, USAGE
from .store import AbstractOutputStore, LocalOutputStore, MemoryOutputStore, to_json
from .config import RunConfig, config_from_dict, load_config, loads_config
from .svg import render_svg
from .commands import NavigationCommands

__all__ = [
    "App",
    "ExitCode",
    "Response",
    "command",
    "OK",
    "FAIL",
    "USAGE",
    "AbstractOutputStore",
    "LocalOutputStore",
    "MemoryOutputStore",
    "to_json",
    "RunConfig",
    "config_from_dict",
    "load_config",
    "loads_config",
    "render_svg",
    "NavigationCommands",
]
