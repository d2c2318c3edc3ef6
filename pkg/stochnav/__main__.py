import os
import sys
import logging
import argparse
from typing import Any, Dict, List, Optional

from .errors import ConfigError
from .cli import App, LocalOutputStore, NavigationCommands, USAGE, load_config

logger = logging.getLogger(__name__)


def _env_workers() -> Optional[int]:
    value = os.environ.get("STOCHNAV_WORKERS")
    if not value:
        return None
    try:
        return int(value)
    except ValueError:
        logger.warning("ignoring STOCHNAV_WORKERS=%r, expected an integer", value)
        return None


def build_parser(app: App) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochnav",
        description="stochnav - stochastic navigation with artificial potentials",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, help_text in app.commands:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("config", help="run configuration (JSON)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--k", type=float, help="order parameter of the potential")
        p.add_argument("--max-steps", type=int, help="step budget per run")
        p.add_argument("--output", help="output directory")
        p.add_argument(
            "--workers",
            type=int,
            help="worker processes for campaigns (default: the config, then $STOCHNAV_WORKERS, then 1)",
        )
        if name == "plot":
            p.add_argument("--trajectory", action="append", default=None, help="trajectory CSV, repeatable")
        verbosity = p.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        "seed": args.seed,
        "potential.k": args.k,
        "max_steps": args.max_steps,
        "output": args.output,
        "workers": args.workers,
    }
    trajectories: Optional[List[str]] = getattr(args, "trajectory", None)
    if trajectories:
        overrides["plot.trajectories"] = [os.path.abspath(p) for p in trajectories]
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    app = App()
    app.register(NavigationCommands())
    args = build_parser(app).parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='[%(asctime)s][%(levelname)s] %(message)s')

    try:
        config = load_config(args.config, _overrides(args), defaults={"workers": _env_workers()})
    except ConfigError as e:
        logger.error("%s: %s", args.command, e)
        response = USAGE(str(e))
        app.write_report(args.command, response)
        return int(response.code)

    logger.info("%s: writing to %s", args.command, config.output)
    return app.dispatch(args.command, config, LocalOutputStore(config.output))


if __name__ == "__main__":
    sys.exit(main())
