from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..analysis.bias import (
    MIN_MONTE_CARLO_DRAWS,
    BiasReport,
    bias_grid,
    bias_report,
    bracket_bound,
    saddle_bias_decay,
    scaled_bias_decay,
)
from ..analysis.quotients import saddle_quotient_check
from ..descent.metrics import convergence_metrics, deviation
from ..descent.sgd import run_gradient_flow_baseline, run_sgd
from ..descent.trajectory import TerminationStatus, read_csv
from ..errors import ConfigError, OutsideFreeSpaceError, UnsupportedEstimatorError
from ..experiments.campaign import (
    CampaignResult,
    RunKey,
    compare_clearance,
    k_sweep,
    run_campaign,
    run_seed,
    start_seed,
)
from ..experiments.generators import sample_start_positions
from ..geometry.world import World, validate_world
from ..geometry.worldfile import dumps_world
from ..potentials.condition import check_condition
from ..potentials.critical import find_critical_points, locate_minimum, search_order
from ..sensors.calibration import calibrate
from ..sensors.rig import EstimatorKind
from .config import RunConfig
from .routing import FAIL, OK, Response, command
from .store import AbstractOutputStore
from .svg import render_svg

logger = logging.getLogger(__name__)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def _vec(v: Any, dim: int) -> List[Any]:
    return [None] * dim if v is None else [float(c) for c in v]


def _norm(v: Any) -> Any:
    return None if v is None else float(np.linalg.norm(v))


class NavigationCommands:
    """Handlers for every subcommand; each gets the parsed config and an output store."""

    @command("validate", help="check world geometry, the navigation condition and critical points")
    def validate(self, config: RunConfig, store: AbstractOutputStore) -> Response:
        entries = []
        passed = True
        first_issue = ""
        for world in config.worlds():
            entry: Dict[str, Any] = {"world": world.name}
            report = validate_world(world)
            entry["validation"] = report.to_dict()
            if not report.passed:
                passed = False
                first_issue = first_issue or report.issues[0]
            try:
                condition = check_condition(world)
                entry["condition"] = condition.to_dict()
                if not condition.passed:
                    passed = False
                    first_issue = first_issue or f"world {world.name}: navigation condition fails"
            except OutsideFreeSpaceError as e:
                entry["condition"] = {"passed": False, "error": str(e)}
                passed = False
                first_issue = first_issue or str(e)
            if report.passed:
                critical = find_critical_points(world, config.potential)
                entry["critical_points"] = critical.to_dict()
                if not critical.is_navigation:
                    passed = False
                    first_issue = first_issue or f"world {world.name}: k={config.potential.k:g} is not a navigation function"
                if config.search_order:
                    entry["order_search"] = search_order(world, config.potential, strict=False).to_dict()
            entries.append(entry)
        document = {"potential": config.potential.to_dict(), "worlds": entries}
        store.write_json("validate.json", document)
        return OK(document) if passed else FAIL(first_issue, document)

    @command("simulate", help="run the stochastic update (and the gradient-flow baseline) from each start")
    def simulate(self, config: RunConfig, store: AbstractOutputStore) -> Response:
        world = config.worlds()[0]
        starts = config.start_points(1)
        points = (
            sample_start_positions(world, starts, start_seed(config.seed, 0)) if isinstance(starts, int) else starts[0]
        )
        target = locate_minimum(world, config.potential)
        store.write_text("world.json", dumps_world(world))
        runs = []
        plotted: List[Tuple[str, np.ndarray]] = []
        collisions = []
        for s, x0 in enumerate(points):
            key = RunKey(0, s, 0)
            seed = run_seed(config.seed, key)
            label = f"sgd-s{s:02d}"
            trajectory = run_sgd(
                world,
                config.potential,
                config.rig.with_seed(seed),
                config.schedule,
                x0,
                config.max_steps,
                stop_radius=config.stop_radius,
                target=target,
                label=label,
            )
            store.write_text(f"trajectories/{label}.csv", trajectory.csv_text())
            metrics = convergence_metrics(trajectory, world, config.potential, config.stop_radius, minimum=target)
            run = {"label": label, "seed": seed, "x0": x0, "metrics": metrics.to_dict()}
            plotted.append((label, trajectory.points))
            if config.baseline:
                base_label = f"baseline-s{s:02d}"
                base = run_gradient_flow_baseline(
                    world, config.potential, x0, stop_radius=config.stop_radius, target=target, label=base_label
                )
                store.write_text(f"trajectories/{base_label}.csv", base.csv_text())
                run["baseline_status"] = base.status.value
                run["deviation"] = deviation(trajectory, base)
                plotted.append((base_label, base.points))
            if trajectory.status is TerminationStatus.COLLISION:
                collisions.append(label)
            runs.append(run)
        store.write_text("plot.svg", render_svg(world, plotted, config.potential, config.plot.levels if config.plot.contour else 0))
        document = {"config": config.to_dict(), "world": world.name, "minimum": target, "runs": runs}
        if config.calibration is not None:
            document["calibration"] = self._calibrate(config, [world])
        store.write_json("summary.json", document)
        if collisions:
            return FAIL(f"collision in {', '.join(collisions)}", document)
        return OK(document)

    @staticmethod
    def _calibrate(config: RunConfig, worlds: Sequence[World]) -> Dict[str, Any]:
        """Admissible eps0 per world next to the configured one; the run still uses the configured eps0."""
        options = config.calibration
        entries = {}
        for world in worlds:
            result = calibrate(
                world, config.rig, config.potential, options.samples, options.probes, options.draws, seed=config.seed
            )
            entry = result.to_dict()
            entry["eps0"] = config.schedule.eps0
            logger.info("%s: admissible eps0 < %.6g", world.name, result.step_bound)
            entry["eps0_admissible"] = config.schedule.check_bound(result.step_bound, enforce=False)
            entries[world.name] = entry
        return entries

    @staticmethod
    def _write_campaign(store: AbstractOutputStore, prefix: str, result: CampaignResult) -> None:
        for run in result.runs:
            if run.trajectory is not None:
                store.write_text(f"{prefix}runs/{run.key.id}.csv", run.trajectory.csv_text())
        for (w, s), base in sorted(result.baselines.items()):
            store.write_text(f"{prefix}baselines/w{w:02d}-s{s:02d}.csv", base.csv_text())
        store.write_json(f"{prefix}campaign.json", result.to_dict())

    @staticmethod
    def _clean(result: CampaignResult) -> bool:
        agg = result.aggregates
        return agg.success_rate == 1.0 and agg.collisions == 0

    @command("montecarlo", help="run a campaign, a k sweep, or a paired potential comparison")
    def montecarlo(self, config: RunConfig, store: AbstractOutputStore) -> Response:
        worlds = config.worlds()
        starts = config.start_points(len(worlds))
        common = dict(
            master_seed=config.seed,
            max_steps=config.max_steps,
            stop_radius=config.stop_radius,
            workers=config.workers,
            keep_trajectories=True,
        )
        mode = config.montecarlo.mode
        args = (config.rig, config.schedule, starts, config.seeds)
        document: Dict[str, Any] = {"config": config.to_dict(), "worlds": [w.name for w in worlds], "mode": mode}
        for w in worlds:
            store.write_text(f"worlds/{w.name}.json", dumps_world(w))

        if mode == "k-sweep":
            sweep = k_sweep(worlds, config.potential, config.montecarlo.k_values, *args, baseline=True, **common)
            for k, result in sorted(sweep.results.items()):
                self._write_campaign(store, f"k{k:g}/", result)
            rows = sweep.rows()
            store.write_text(
                "k_sweep.csv",
                _csv(["k", "mean_deviation", "success_rate", "runs"], [[r["k"], r["mean_deviation"], r["success_rate"], r["runs"]] for r in rows]),
            )
            document["sweep"] = sweep.to_dict()
            results = list(sweep.results.values())
        elif mode == "clearance":
            comparison = compare_clearance(worlds, config.potential, config.montecarlo.compare, *args, **common)
            self._write_campaign(store, "first/", comparison.first)
            self._write_campaign(store, "second/", comparison.second)
            document["comparison"] = comparison.to_dict()
            results = [comparison.first, comparison.second]
        else:
            result = run_campaign(worlds, config.potential, *args, baseline=config.baseline, **common)
            self._write_campaign(store, "", result)
            document["aggregates"] = result.aggregates.to_dict()
            results = [result]

        if config.calibration is not None:
            document["calibration"] = self._calibrate(config, worlds)
        store.write_json("summary.json", document)
        if all(self._clean(r) for r in results):
            return OK(document)
        failing = sum(not self._clean(r) for r in results)
        return FAIL(f"{failing} campaign(s) with failed runs or collisions", document)

    @command("bias-diag", help="closed-form and Monte Carlo bias, decay in k and saddle quotients")
    def bias_diag(self, config: RunConfig, store: AbstractOutputStore) -> Response:
        options = config.bias
        rig = config.rig.with_seed(config.seed)
        if options.closed_form and rig.estimator is not EstimatorKind.CIRCLE:
            raise UnsupportedEstimatorError(
                f"the closed-form bias is only available for the circle-fit estimator, not {rig.estimator.value}; "
                "set bias.closed_form to false for Monte Carlo only"
            )
        if 0 < options.draws < MIN_MONTE_CARLO_DRAWS:
            raise ConfigError(f"Monte Carlo bias needs at least {MIN_MONTE_CARLO_DRAWS} draws", field="bias.draws")
        world = config.worlds()[0]
        spec = config.potential
        draws = options.draws or None
        if options.points:
            for i, p in enumerate(options.points):
                if len(p) != world.dim or not world.in_interior(np.asarray(p, dtype=float)):
                    raise ConfigError(f"point {list(p)} is not in the interior of the free space", field=f"bias.points[{i}]")
            reports = [bias_report(world, rig, spec, p, draws, config.workers) for p in options.points]
        else:
            reports = bias_grid(world, rig, spec, options.grid, draws, config.workers)
        if not options.closed_form:
            for r in reports:
                r.closed_form = r.scaled = None
        store.write_text("bias_grid.csv", self._bias_table(world, reports))
        document: Dict[str, Any] = {
            "config": config.to_dict(),
            "world": world.name,
            "points": [r.to_dict() for r in reports],
        }
        if options.closed_form:
            decay_rows = []
            for r in reports:
                scaled, plain = scaled_bias_decay(world, rig, spec, r.x, options.k_values)
                decay_rows.append(list(r.x) + [scaled.slope, scaled.residual, plain.slope, scaled.skipped or None])
            store.write_text(
                "decay.csv",
                _csv([f"x{j + 1}" for j in range(world.dim)] + ["scaled_slope", "scaled_residual", "plain_slope", "skipped"], decay_rows),
            )
            saddles = saddle_bias_decay(world, rig, spec, options.k_values)
            document["saddle_decay"] = {str(i): fit.to_dict() for i, fit in saddles.items()}
            if options.bracket_samples:
                document["bracket_bound"] = bracket_bound(world, rig, spec, options.bracket_samples, seed=config.seed)
            if options.quotients:
                table = saddle_quotient_check(world, rig, spec, options.k_values)
                store.write_text("quotients.csv", table.csv_text())
                document["quotients"] = table.to_dict()
        store.write_json("bias.json", document)
        return OK({"world": world.name, "points": len(reports), "files": sorted(store.listdir(""))})

    @staticmethod
    def _bias_table(world: World, reports: Sequence[BiasReport]) -> str:
        n = world.dim
        header = (
            [f"x{j + 1}" for j in range(n)]
            + ["k", "awareness"]
            + [f"b{j + 1}" for j in range(n)] + ["b_norm"]
            + [f"scaled{j + 1}" for j in range(n)] + ["scaled_norm"]
            + [f"mc{j + 1}" for j in range(n)] + [f"mc_se{j + 1}" for j in range(n)]
        )
        rows = []
        for r in reports:
            mc = r.monte_carlo
            rows.append(
                [float(c) for c in r.x]
                + [r.k, " ".join(map(str, r.awareness))]
                + _vec(r.closed_form, n) + [_norm(r.closed_form)]
                + _vec(r.scaled, n) + [_norm(r.scaled)]
                + _vec(None if mc is None else mc.bias, n) + _vec(None if mc is None else mc.bias_error, n)
            )
        return _csv(header, rows)

    @command("plot", help="render the world, trajectory CSVs and optional level sets to SVG")
    def plot(self, config: RunConfig, store: AbstractOutputStore) -> Response:
        world = config.worlds()[0]
        trajectories = []
        for i, path in enumerate(config.plot.trajectories):
            try:
                with open(path, "r", encoding="utf-8", newline="") as fh:
                    trajectories.append((Path(path).stem, read_csv(fh).points))
            except (OSError, ValueError, StopIteration) as e:
                raise ConfigError(f"cannot read trajectory {path}: {e}", field=f"plot.trajectories[{i}]") from None
        levels = config.plot.levels if config.plot.contour else 0
        store.write_text("plot.svg", render_svg(world, trajectories, config.potential, levels))
        return OK({"world": world.name, "trajectories": len(trajectories), "contour_levels": levels})

    @command("generate-world", help="write generated worlds to world files")
    def generate_world(self, config: RunConfig, store: AbstractOutputStore) -> Response:
        if config.world.generator is None:
            raise ConfigError("generate-world needs a generator source", field="world.generator")
        written = []
        for world in config.worlds():
            name = f"{world.name}.json"
            store.write_text(name, dumps_world(world))
            written.append({"file": name, "obstacles": world.m, "condition_number": world.objective.condition_number})
        return OK({"worlds": written})
