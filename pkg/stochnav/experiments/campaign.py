"""Monte Carlo campaigns: SGD runs plus gradient-flow baselines over worlds, starts and seeds."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
from scipy.stats import binomtest

from ..errors import StochNavError
from ..descent.metrics import ConvergenceMetrics, convergence_metrics, deviation
from ..descent.schedule import StepSchedule
from ..descent.sgd import run_gradient_flow_baseline, run_sgd
from ..descent.trajectory import TerminationStatus, Trajectory
from ..geometry.world import World
from ..potentials.critical import locate_minimum
from ..potentials.potential import PotentialSpec
from ..sensors.rig import SensorRig
from .generators import sample_start_positions

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

StartSpec = Union[int, Sequence[Sequence[Sequence[float]]]]


def _clean(value: float) -> Optional[float]:
    return float(value) if value is not None and math.isfinite(value) else None


@dataclass(frozen=True, order=True)
class RunKey:
    world: int
    start: int
    replica: int

    @property
    def id(self) -> str:
        return f"w{self.world:02d}-s{self.start:02d}-r{self.replica:03d}"


def run_seed(master: int, key: RunKey) -> int:
    return int(np.random.SeedSequence(master, spawn_key=(key.world, key.start, key.replica)).generate_state(1)[0])


def start_seed(master: int, world: int) -> int:
    # one-entry key, run keys have three
    return int(np.random.SeedSequence(master, spawn_key=(world,)).generate_state(1)[0])


@dataclass
class RunResult:
    key: RunKey
    seed: int
    x0: np.ndarray
    metrics: Optional[ConvergenceMetrics] = None
    deviation: float = math.nan
    error: Optional[str] = None
    trajectory: Optional[Trajectory] = None

    @property
    def success(self) -> bool:
        return self.metrics is not None and self.metrics.status == TerminationStatus.CONVERGED.value

    @property
    def collided(self) -> bool:
        return self.metrics is not None and self.metrics.collided

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.key.id,
            "world": self.key.world,
            "start": self.key.start,
            "replica": self.key.replica,
            "seed": self.seed,
            "x0": self.x0.tolist(),
            "metrics": self.metrics.to_dict() if self.metrics is not None else None,
            "deviation": _clean(self.deviation),
            "error": self.error,
        }


@dataclass(frozen=True)
class CampaignAggregates:
    runs: int
    completed: int
    failed: int
    converged: int
    collisions: int
    # None when there are no runs
    success_rate: Optional[float]
    mean_final_distance: Optional[float]
    max_final_distance: Optional[float]
    min_clearance: Dict[str, Optional[float]]
    mean_deviation: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "runs": self.runs,
            "completed": self.completed,
            "failed": self.failed,
            "converged": self.converged,
            "collisions": self.collisions,
            "success_rate": self.success_rate,
            "mean_final_distance": self.mean_final_distance,
            "max_final_distance": self.max_final_distance,
            "min_clearance": dict(self.min_clearance),
            "mean_deviation": self.mean_deviation,
        }


@dataclass
class CampaignResult:
    runs: List[RunResult] = field(default_factory=list)
    params: Dict[str, Any] = field(default_factory=dict)
    baselines: Dict[Tuple[int, int], Trajectory] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.runs)

    def by_key(self) -> Dict[RunKey, RunResult]:
        return {r.key: r for r in self.runs}

    @property
    def aggregates(self) -> CampaignAggregates:
        done = [r for r in self.runs if r.metrics is not None]
        finals = np.array([r.metrics.final_distance_minimum for r in done])
        clearances = np.array([r.metrics.min_clearance for r in done])
        clearances = clearances[np.isfinite(clearances)]
        deviations = np.array([r.deviation for r in done])
        deviations = deviations[np.isfinite(deviations)]
        converged = sum(r.success for r in self.runs)
        return CampaignAggregates(
            runs=len(self.runs),
            completed=len(done),
            failed=len(self.runs) - len(done),
            converged=converged,
            collisions=sum(r.collided for r in self.runs),
            success_rate=converged / len(self.runs) if self.runs else None,
            mean_final_distance=_clean(float(np.mean(finals))) if finals.size else None,
            max_final_distance=_clean(float(np.max(finals))) if finals.size else None,
            min_clearance={
                "min": _clean(float(np.min(clearances))) if clearances.size else None,
                "median": _clean(float(np.median(clearances))) if clearances.size else None,
                "max": _clean(float(np.max(clearances))) if clearances.size else None,
            },
            mean_deviation=_clean(float(np.mean(deviations))) if deviations.size else None,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params,
            "aggregates": self.aggregates.to_dict(),
            "runs": [r.to_dict() for r in self.runs],
        }


@dataclass(frozen=True)
class _RunTask:
    key: RunKey
    seed: int
    world: World
    spec: PotentialSpec
    rig: SensorRig
    schedule: StepSchedule
    x0: np.ndarray
    max_steps: int
    stop_radius: Optional[float]
    minimum: np.ndarray
    baseline: Optional[Trajectory]
    keep_trajectory: bool


@dataclass(frozen=True)
class _BaselineTask:
    world: World
    spec: PotentialSpec
    x0: np.ndarray
    stop_radius: Optional[float]
    minimum: np.ndarray
    label: str


def _execute_run(task: _RunTask) -> RunResult:
    result = RunResult(key=task.key, seed=task.seed, x0=task.x0)
    try:
        trajectory = run_sgd(
            task.world,
            task.spec,
            task.rig.with_seed(task.seed),
            task.schedule,
            task.x0,
            task.max_steps,
            stop_radius=task.stop_radius,
            target=task.minimum,
            label=task.key.id,
        )
        result.metrics = convergence_metrics(trajectory, task.world, task.spec, task.stop_radius, minimum=task.minimum)
        if task.baseline is not None:
            result.deviation = deviation(trajectory, task.baseline)
        if task.keep_trajectory:
            result.trajectory = trajectory
    except (StochNavError, np.linalg.LinAlgError, FloatingPointError) as e:
        result.error = f"{type(e).__name__}: {e}"
    return result


def _execute_baseline(task: _BaselineTask) -> Trajectory:
    return run_gradient_flow_baseline(
        task.world, task.spec, task.x0, stop_radius=task.stop_radius, target=task.minimum, label=task.label
    )


def _map(fn: Callable[[T], R], tasks: Sequence[T], workers: int) -> List[R]:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _resolve_starts(worlds: Sequence[World], starts: StartSpec, master: int) -> List[np.ndarray]:
    if isinstance(starts, int):
        return [sample_start_positions(w, starts, start_seed(master, i)) for i, w in enumerate(worlds)]
    if len(starts) != len(worlds):
        raise ValueError(f"got start lists for {len(starts)} worlds, expected {len(worlds)}")
    return [np.asarray(s, dtype=float).reshape(-1, w.dim) for s, w in zip(starts, worlds)]


def run_campaign(
    worlds: Sequence[World],
    spec: PotentialSpec,
    rig: SensorRig,
    schedule: StepSchedule,
    starts: StartSpec,
    seeds: int,
    master_seed: int = 0,
    max_steps: int = 100,
    stop_radius: Optional[float] = None,
    workers: int = 1,
    baseline: bool = True,
    keep_trajectories: bool = False,
) -> CampaignResult:
    """Run SGD from every start of every world once per seed replica.

    `starts` is either a count of random starts per world or explicit start
    lists, one per world. Each run draws its sensor seed from the master seed
    and its (world, start, replica) key, so results do not depend on the
    worker count or scheduling.
    """
    if seeds < 0:
        raise ValueError(f"seed count must be nonnegative, got {seeds}")
    worlds = list(worlds)
    start_sets = _resolve_starts(worlds, starts, master_seed)
    result = CampaignResult(
        params={
            "worlds": [w.name for w in worlds],
            "potential": spec.to_dict(),
            "rig": rig.to_dict(),
            "schedule": schedule.to_dict(),
            "starts": [s.tolist() for s in start_sets],
            "seeds": seeds,
            "master_seed": master_seed,
            "max_steps": max_steps,
            "stop_radius": stop_radius,
        }
    )
    if not worlds or seeds == 0 or not any(len(s) for s in start_sets):
        logger.info("campaign has no runs")
        return result

    minima = [locate_minimum(w, spec) for w in worlds]
    pairs = [(wi, si) for wi, s in enumerate(start_sets) for si in range(len(s))]
    if baseline:
        tasks = [
            _BaselineTask(worlds[wi], spec, start_sets[wi][si], stop_radius, minima[wi], f"baseline-w{wi:02d}-s{si:02d}")
            for wi, si in pairs
        ]
        result.baselines = dict(zip(pairs, _map(_execute_baseline, tasks, workers)))

    run_tasks = []
    for wi, si in pairs:
        for r in range(seeds):
            key = RunKey(wi, si, r)
            run_tasks.append(
                _RunTask(
                    key=key,
                    seed=run_seed(master_seed, key),
                    world=worlds[wi],
                    spec=spec,
                    rig=rig,
                    schedule=schedule,
                    x0=start_sets[wi][si],
                    max_steps=max_steps,
                    stop_radius=stop_radius,
                    minimum=minima[wi],
                    baseline=result.baselines.get((wi, si)),
                    keep_trajectory=keep_trajectories,
                )
            )
    logger.info("campaign: %d run(s) over %d world(s) with %d worker(s)", len(run_tasks), len(worlds), workers)
    result.runs = sorted(_map(_execute_run, run_tasks, workers), key=lambda r: r.key)
    for failed in (r for r in result.runs if r.error):
        logger.warning("run %s failed: %s", failed.key.id, failed.error)
    agg = result.aggregates
    logger.info(
        "campaign done: %d/%d converged, %d collision(s), %d failure(s)",
        agg.converged,
        agg.runs,
        agg.collisions,
        agg.failed,
    )
    return result


@dataclass(frozen=True)
class SignTest:
    """Paired sign test of H1: first < second more often than not."""

    pairs: int
    wins: int
    losses: int
    ties: int
    p_value: float

    def to_dict(self) -> Dict[str, Any]:
        return {"pairs": self.pairs, "wins": self.wins, "losses": self.losses, "ties": self.ties, "p_value": self.p_value}


def paired_sign_test(first: Iterable[float], second: Iterable[float]) -> SignTest:
    a = np.asarray(list(first), dtype=float)
    b = np.asarray(list(second), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"paired samples differ in size: {a.size} vs {b.size}")
    keep = np.isfinite(a) & np.isfinite(b)
    a, b = a[keep], b[keep]
    wins = int(np.sum(a < b))
    losses = int(np.sum(a > b))
    trials = wins + losses
    p = binomtest(wins, trials, 0.5, alternative="greater").pvalue if trials else 1.0
    return SignTest(pairs=int(a.size), wins=wins, losses=losses, ties=int(a.size) - trials, p_value=float(p))


def _per_seed_mean(result: CampaignResult, getter: Callable[[RunResult], float]) -> Dict[int, float]:
    """Mean over worlds and starts for every seed replica."""
    groups: Dict[int, List[float]] = {}
    for r in result.runs:
        groups.setdefault(r.key.replica, []).append(getter(r) if r.metrics is not None else math.nan)
    return {k: float(np.nanmean(v)) if np.any(np.isfinite(v)) else math.nan for k, v in sorted(groups.items())}


@dataclass
class DeviationSweep:
    results: Dict[float, CampaignResult] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for k, res in sorted(self.results.items()):
            agg = res.aggregates
            out.append({"k": k, "mean_deviation": agg.mean_deviation, "success_rate": agg.success_rate, "runs": agg.runs})
        return out

    def seed_deviations(self, k: float) -> Dict[int, float]:
        return _per_seed_mean(self.results[k], lambda r: r.deviation)

    def compare(self, low_k: float, high_k: float) -> SignTest:
        """Sign test that the seed-averaged deviation at high_k is below the one at low_k."""
        high, low = self.seed_deviations(high_k), self.seed_deviations(low_k)
        seeds = sorted(set(high) & set(low))
        return paired_sign_test([high[s] for s in seeds], [low[s] for s in seeds])

    def to_dict(self) -> Dict[str, Any]:
        ks = sorted(self.results)
        data: Dict[str, Any] = {"rows": self.rows()}
        if len(ks) >= 2:
            data["sign_test"] = {"low_k": ks[0], "high_k": ks[-1], **self.compare(ks[0], ks[-1]).to_dict()}
        return data


def k_sweep(
    worlds: Sequence[World],
    spec: PotentialSpec,
    k_values: Sequence[float],
    rig: SensorRig,
    schedule: StepSchedule,
    starts: StartSpec,
    seeds: int,
    **kwargs: Any,
) -> DeviationSweep:
    """One campaign per k on identical worlds, starts and seeds."""
    sweep = DeviationSweep()
    for k in k_values:
        logger.info("k sweep: k=%g", k)
        sweep.results[float(k)] = run_campaign(worlds, spec.with_k(k), rig, schedule, starts, seeds, **kwargs)
    return sweep


@dataclass
class ClearanceComparison:
    first: CampaignResult
    second: CampaignResult
    test: SignTest

    def to_dict(self) -> Dict[str, Any]:
        return {
            "first": {"potential": self.first.params.get("potential"), **self.first.aggregates.to_dict()},
            "second": {"potential": self.second.params.get("potential"), **self.second.aggregates.to_dict()},
            "sign_test": self.test.to_dict(),
        }


def compare_clearance(
    worlds: Sequence[World],
    first: PotentialSpec,
    second: PotentialSpec,
    rig: SensorRig,
    schedule: StepSchedule,
    starts: StartSpec,
    seeds: int,
    **kwargs: Any,
) -> ClearanceComparison:
    """Paired runs of two potentials; the test checks whether `first` passes closer to obstacles."""
    kwargs.setdefault("baseline", False)
    a = run_campaign(worlds, first, rig, schedule, starts, seeds, **kwargs)
    b = run_campaign(worlds, second, rig, schedule, starts, seeds, **kwargs)
    ma = _per_seed_mean(a, lambda r: r.metrics.min_clearance)
    mb = _per_seed_mean(b, lambda r: r.metrics.min_clearance)
    seeds_in_both = sorted(set(ma) & set(mb))
    return ClearanceComparison(a, b, paired_sign_test([ma[s] for s in seeds_in_both], [mb[s] for s in seeds_in_both]))
