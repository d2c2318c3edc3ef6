"""Run configuration: a JSON document, optionally overridden by command-line flags."""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..descent.schedule import StepSchedule
from ..errors import ConfigError, StochNavError
from ..experiments.generators import EggWorldParams, EllipticalWorldParams, generate_egg_world, generate_elliptical_world
from ..geometry.world import World
from ..geometry.worldfile import load_world
from ..potentials.potential import PotentialSpec
from ..sensors.noise import NoiseModel
from ..sensors.calibration import BOUND_SAMPLES, GAMMA_DRAWS, GAMMA_PROBES
from ..sensors.rig import SensorRig

logger = logging.getLogger(__name__)

GENERATORS = {
    "elliptical": (EllipticalWorldParams, generate_elliptical_world),
    "egg": (EggWorldParams, generate_egg_world),
}
MONTECARLO_MODES = ("campaign", "k-sweep", "clearance")

TOP_LEVEL_KEYS = {
    "world", "potential", "rig", "schedule", "starts", "seeds", "seed", "max_steps", "stop_radius",
    "output", "baseline", "workers", "validate", "montecarlo", "bias", "plot", "calibration",
}


def _section(data: Mapping[str, Any], key: str, allowed: Sequence[str]) -> Dict[str, Any]:
    value = data.get(key, {})
    if value is None:
        value = {}
    if not isinstance(value, dict):
        raise ConfigError("expected an object", field=key)
    unknown = sorted(set(value) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown entries {unknown}", field=key)
    return value


def _int(value: Any, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"expected an integer >= {minimum}, got {value!r}", field=name)
    return value


def _float(value: Any, name: str, positive: bool = False, allow_none: bool = False) -> Optional[float]:
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {value!r}", field=name)
    if positive and not value > 0:
        raise ConfigError(f"expected a positive number, got {value!r}", field=name)
    return float(value)


def _floats(value: Any, name: str) -> Tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError("expected a list of numbers", field=name)
    return tuple(_float(v, f"{name}[{i}]", positive=True) for i, v in enumerate(value))


@dataclass(frozen=True)
class WorldSource:
    path: Optional[str] = None
    generator: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)
    # generated worlds use seeds params.seed, params.seed + 1, ...
    count: int = 1

    def load(self) -> List[World]:
        if self.path is not None:
            return [load_world(self.path)]
        cls, generate = GENERATORS[self.generator]
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in self.params.items()}
        base = params.pop("seed", 0)
        try:
            return [generate(cls(seed=base + i, **params)) for i in range(self.count)]
        except TypeError as e:
            raise ConfigError(f"bad generator parameters: {e}", field="world.params") from None

    def to_dict(self) -> Dict[str, Any]:
        if self.path is not None:
            return {"file": self.path}
        return {"generator": self.generator, "params": dict(self.params), "count": self.count}


@dataclass(frozen=True)
class MonteCarloOptions:
    mode: str = "campaign"
    k_values: Tuple[float, ...] = (7.0, 12.0)
    compare: Optional[PotentialSpec] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "k_values": list(self.k_values),
            "compare": self.compare.to_dict() if self.compare is not None else None,
        }


@dataclass(frozen=True)
class BiasOptions:
    grid: int = 5
    draws: int = 0
    k_values: Tuple[float, ...] = (8.0, 16.0, 32.0, 64.0)
    points: Tuple[Tuple[float, ...], ...] = ()
    closed_form: bool = True
    quotients: bool = True
    # free-space samples for the bracket bound; 0 skips it
    bracket_samples: int = 10_000

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid,
            "draws": self.draws,
            "k_values": list(self.k_values),
            "points": [list(p) for p in self.points],
            "closed_form": self.closed_form,
            "quotients": self.quotients,
            "bracket_samples": self.bracket_samples,
        }


@dataclass(frozen=True)
class PlotOptions:
    trajectories: Tuple[str, ...] = ()
    contour: bool = False
    levels: int = 12

    def to_dict(self) -> Dict[str, Any]:
        return {"trajectories": list(self.trajectories), "contour": self.contour, "levels": self.levels}


@dataclass(frozen=True)
class CalibrationOptions:
    samples: int = BOUND_SAMPLES
    probes: int = GAMMA_PROBES
    draws: int = GAMMA_DRAWS

    def to_dict(self) -> Dict[str, Any]:
        return {"samples": self.samples, "probes": self.probes, "draws": self.draws}


@dataclass(frozen=True)
class RunConfig:
    world: WorldSource
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    rig: SensorRig = field(default_factory=SensorRig)
    schedule: StepSchedule = field(default_factory=StepSchedule)
    starts: Union[int, Tuple[Tuple[float, ...], ...]] = 5
    seeds: int = 1
    seed: int = 0
    max_steps: int = 100
    stop_radius: Optional[float] = None
    output: str = "out"
    baseline: bool = True
    workers: int = 1
    search_order: bool = False
    montecarlo: MonteCarloOptions = field(default_factory=MonteCarloOptions)
    bias: BiasOptions = field(default_factory=BiasOptions)
    plot: PlotOptions = field(default_factory=PlotOptions)
    # None skips calibration
    calibration: Optional[CalibrationOptions] = None

    def worlds(self) -> List[World]:
        return self.world.load()

    def start_points(self, world_count: int) -> Union[int, List[np.ndarray]]:
        """A count of random starts, or the explicit starts repeated for every world."""
        if isinstance(self.starts, int):
            return self.starts
        return [np.asarray(self.starts, dtype=float)] * world_count

    def to_dict(self) -> Dict[str, Any]:
        # same layout the parser reads, so a recorded config loads back
        rig = {
            "range_c": self.rig.range_c,
            "estimator": self.rig.estimator.value,
            "noise": self.rig.noise.to_dict(),
            "bound": self.rig.bound if math.isfinite(self.rig.bound) else None,
            "beta_scale": self.rig.beta_scale,
            "objective_scale": self.rig.objective_scale,
        }
        return {
            "world": self.world.to_dict(),
            "potential": self.potential.to_dict(),
            "rig": rig,
            "schedule": self.schedule.to_dict(),
            "starts": self.starts if isinstance(self.starts, int) else [list(p) for p in self.starts],
            "seeds": self.seeds,
            "seed": self.seed,
            "max_steps": self.max_steps,
            "stop_radius": self.stop_radius,
            "baseline": self.baseline,
            "montecarlo": self.montecarlo.to_dict(),
            "bias": self.bias.to_dict(),
            "plot": self.plot.to_dict(),
            "calibration": self.calibration.to_dict() if self.calibration is not None else None,
        }


def _parse_world(data: Mapping[str, Any], base_dir: Path) -> WorldSource:
    if "world" not in data:
        raise ConfigError("missing required entry", field="world")
    ws = _section(data, "world", ("file", "generator", "params", "count"))
    if ("file" in ws) == ("generator" in ws):
        raise ConfigError("give exactly one of 'file' or 'generator'", field="world")
    if "file" in ws:
        path = base_dir / str(ws["file"])
        if not path.is_file():
            raise ConfigError(f"world file {path} does not exist", field="world.file")
        return WorldSource(path=str(path))
    generator = ws["generator"]
    if generator not in GENERATORS:
        raise ConfigError(f"unknown generator {generator!r}, expected one of {sorted(GENERATORS)}", field="world.generator")
    params = ws.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("expected an object", field="world.params")
    return WorldSource(generator=generator, params=dict(params), count=_int(ws.get("count", 1), "world.count", 1))


def _parse_potential(raw: Mapping[str, Any], name: str) -> PotentialSpec:
    try:
        return PotentialSpec(kind=raw.get("kind", "rk"), k=_float(raw.get("k", 7.0), f"{name}.k", positive=True))
    except StochNavError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field=name) from None


def _parse_rig(data: Mapping[str, Any]) -> SensorRig:
    raw = _section(data, "rig", ("range_c", "estimator", "noise", "bound", "beta_scale", "objective_scale"))
    noise_raw = raw.get("noise", {}) or {}
    if not isinstance(noise_raw, dict):
        raise ConfigError("expected an object", field="rig.noise")
    names = {
        "sigma_f0": "sigma_f0",
        "sigma_gradf0": "sigma_grad_f0",
        "eta": "eta",
        "distance_noise_exponent": "distance_exponent",
        "eta_normal": "eta_normal",
        "eta_curvature": "eta_curvature",
    }
    unknown = sorted(set(noise_raw) - set(names))
    if unknown:
        raise ConfigError(f"unknown entries {unknown}", field="rig.noise")
    try:
        noise = NoiseModel(**{names[k]: v for k, v in noise_raw.items()})
        bound = _float(raw.get("bound"), "rig.bound", positive=True, allow_none=True)
        return SensorRig(
            range_c=_float(raw.get("range_c", 7.0), "rig.range_c", positive=True),
            noise=noise,
            estimator=raw.get("estimator", "circle"),
            bound=math.inf if bound is None else bound,
            beta_scale=_float(raw.get("beta_scale", 1.0), "rig.beta_scale", positive=True),
            objective_scale=_float(raw.get("objective_scale", 1.0), "rig.objective_scale", positive=True),
        )
    except ConfigError:
        raise
    except (StochNavError, TypeError) as e:
        raise ConfigError(str(e), field="rig") from None


def _parse_schedule(data: Mapping[str, Any]) -> StepSchedule:
    raw = _section(data, "schedule", ("eps0", "zeta"))
    try:
        return StepSchedule(
            eps0=_float(raw.get("eps0", 5e-2), "schedule.eps0", positive=True),
            zeta=_float(raw.get("zeta", 5e-3), "schedule.zeta", positive=True),
        )
    except ConfigError:
        raise
    except StochNavError as e:
        raise ConfigError(str(e), field="schedule") from None


def _parse_starts(value: Any) -> Union[int, Tuple[Tuple[float, ...], ...]]:
    if isinstance(value, int) and not isinstance(value, bool):
        return _int(value, "starts", 1)
    if isinstance(value, list) and value and all(isinstance(p, list) for p in value):
        points = []
        for i, p in enumerate(value):
            points.append(tuple(_float(c, f"starts[{i}]") for c in p))
        if len({len(p) for p in points}) != 1:
            raise ConfigError("start points differ in dimension", field="starts")
        return tuple(points)
    raise ConfigError("expected a positive count or a list of points", field="starts")


def config_from_dict(data: Mapping[str, Any], base_dir: Union[str, Path] = ".") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("run configuration must be a JSON object")
    unknown = sorted(set(data) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown entries {unknown}", field=unknown[0])
    base = Path(base_dir)

    mc = _section(data, "montecarlo", ("mode", "k_values", "compare"))
    mode = mc.get("mode", "campaign")
    if mode not in MONTECARLO_MODES:
        raise ConfigError(f"unknown mode {mode!r}, expected one of {MONTECARLO_MODES}", field="montecarlo.mode")
    compare = mc.get("compare")
    if compare is not None and not isinstance(compare, dict):
        raise ConfigError("expected an object", field="montecarlo.compare")
    if mode == "clearance" and compare is None:
        raise ConfigError("clearance mode needs a potential to compare against", field="montecarlo.compare")

    bias = _section(data, "bias", ("grid", "draws", "k_values", "points", "closed_form", "quotients", "bracket_samples"))
    points = bias.get("points", [])
    if not isinstance(points, list):
        raise ConfigError("expected a list of points", field="bias.points")
    plot = _section(data, "plot", ("trajectories", "contour", "levels"))
    trajectories = plot.get("trajectories", [])
    if not isinstance(trajectories, list):
        raise ConfigError("expected a list of paths", field="plot.trajectories")
    validate = _section(data, "validate", ("search_order",))
    calibration = None
    if data.get("calibration") is not None:
        cal = _section(data, "calibration", ("samples", "probes", "draws"))
        calibration = CalibrationOptions(
            samples=_int(cal.get("samples", BOUND_SAMPLES), "calibration.samples", 1),
            probes=_int(cal.get("probes", GAMMA_PROBES), "calibration.probes", 1),
            draws=_int(cal.get("draws", GAMMA_DRAWS), "calibration.draws", 1),
        )
    stop_radius = data.get("stop_radius")
    if stop_radius is not None and _float(stop_radius, "stop_radius") < 0:
        raise ConfigError("expected a nonnegative radius", field="stop_radius")

    return RunConfig(
        world=_parse_world(data, base),
        potential=_parse_potential(data.get("potential", {}) or {}, "potential"),
        rig=_parse_rig(data),
        schedule=_parse_schedule(data),
        starts=_parse_starts(data.get("starts", 5)),
        seeds=_int(data.get("seeds", 1), "seeds", 1),
        seed=_int(data.get("seed", 0), "seed", 0),
        max_steps=_int(data.get("max_steps", 100), "max_steps", 1),
        stop_radius=None if stop_radius is None else _float(stop_radius, "stop_radius"),
        output=str(data.get("output", "out")),
        baseline=bool(data.get("baseline", True)),
        workers=_int(data.get("workers", 1), "workers", 1),
        search_order=bool(validate.get("search_order", False)),
        montecarlo=MonteCarloOptions(
            mode=mode,
            k_values=_floats(mc.get("k_values", [7.0, 12.0]), "montecarlo.k_values"),
            compare=None if compare is None else _parse_potential(compare, "montecarlo.compare"),
        ),
        bias=BiasOptions(
            grid=_int(bias.get("grid", 5), "bias.grid", 1),
            draws=_int(bias.get("draws", 0), "bias.draws", 0),
            k_values=_floats(bias.get("k_values", [8.0, 16.0, 32.0, 64.0]), "bias.k_values"),
            points=tuple(tuple(_float(c, f"bias.points[{i}]") for c in p) for i, p in enumerate(points)),
            closed_form=bool(bias.get("closed_form", True)),
            quotients=bool(bias.get("quotients", True)),
            bracket_samples=_int(bias.get("bracket_samples", 10_000), "bias.bracket_samples", 0),
        ),
        plot=PlotOptions(
            trajectories=tuple(str(base / str(p)) for p in trajectories),
            contour=bool(plot.get("contour", False)),
            levels=_int(plot.get("levels", 12), "plot.levels", 1),
        ),
        calibration=calibration,
    )


def apply_overrides(data: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Set dotted keys ("potential.k") on a copy of the raw document; None values are skipped."""
    merged = copy.deepcopy(data)
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = merged
        parts = dotted.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = node[part] = {}
            node = child
        node[parts[-1]] = value
    return merged


def loads_config(
    text: str,
    base_dir: Union[str, Path] = ".",
    overrides: Optional[Mapping[str, Any]] = None,
    defaults: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Parse a run configuration; `overrides` win over the document, `defaults` only fill absent top-level keys."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed run configuration: {exc.msg}", line=exc.lineno) from None
    if defaults and isinstance(data, dict):
        for key, value in defaults.items():
            if value is not None:
                data.setdefault(key, value)
    if overrides and isinstance(data, dict):
        data = apply_overrides(data, overrides)
    return config_from_dict(data, base_dir)


def load_config(
    path: Union[str, Path],
    overrides: Optional[Mapping[str, Any]] = None,
    defaults: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read run configuration {path}: {exc.strerror}") from None
    config = loads_config(text, path.parent, overrides, defaults)
    logger.debug("loaded run configuration %s", path)
    return config
