from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..errors import NotASaddleError, OutsideFreeSpaceError, StochNavError
from ..geometry.obstacles import as_point
from ..geometry.world import World
from ..potentials.critical import CriticalKind, CriticalPoint, classify, direction_jacobian, locate_minimum
from ..potentials.potential import ArtificialPotential, PotentialSpec, make_potential
from ..sensors.estimators import estimate
from ..sensors.rig import SensorRig
from .schedule import StepSchedule
from .trajectory import StepRecord, TerminationStatus, Trajectory

logger = logging.getLogger(__name__)

# fractions of the workspace radius
DEFAULT_STOP_RADIUS = 1e-2
BASELINE_STEP = 1e-3
BASELINE_MAX_STEPS = 20000
ESCAPE_SIDE_RADIUS = 5e-2


def default_stop_radius(world: World) -> float:
    return DEFAULT_STOP_RADIUS * world.length_scale


def _record(world: World, potential: ArtificialPotential, x: np.ndarray, t: int) -> StepRecord:
    return StepRecord(t=t, x=x, beta=world.beta(x), phi=potential.value(x), clearance=world.clearance(x))


def _terminal_record(world: World, x: np.ndarray, t: int) -> StepRecord:
    """Record for an iterate that left the free space or is not finite."""
    beta = world.beta(x) if np.all(np.isfinite(x)) else math.nan
    return StepRecord(t=t, x=x, beta=beta, phi=math.nan, clearance=0.0 if math.isfinite(beta) else math.nan)


def _start(world: World, x0: Any) -> np.ndarray:
    x0 = as_point(x0)
    if not world.in_interior(x0):
        raise OutsideFreeSpaceError(f"start {x0.tolist()} is not in the interior of the free space")
    return x0


def run_sgd(
    world: World,
    spec: PotentialSpec,
    rig: SensorRig,
    schedule: StepSchedule,
    x0: Any,
    max_steps: int,
    stop_radius: Optional[float] = None,
    target: Optional[np.ndarray] = None,
    label: str = "",
) -> Trajectory:
    """x_{t+1} = x_t - eps_t g_t with g_t sensed by `rig` at x_t.

    Stops early once x_t is within `stop_radius` of the located minimum of the
    potential (default 1% of the workspace radius; 0 runs all `max_steps`).
    A step that leaves the free space ends the run with collision status and
    keeps the offending iterate. A failed sensing or geometry query ends it
    with diverged status.
    """
    x = _start(world, x0)
    potential = make_potential(world, spec)
    radius = default_stop_radius(world) if stop_radius is None else float(stop_radius)
    if radius > 0 and target is None:
        target = locate_minimum(world, spec)
    trajectory = Trajectory(seed=rig.seed, label=label)
    for t in range(max_steps + 1):
        try:
            record = _record(world, potential, x, t)
        except StochNavError as e:
            logger.warning("run %s: geometry query failed at step %d: %s", label or rig.seed, t, e)
            trajectory.records.append(StepRecord(t=t, x=x, beta=world.beta(x), phi=math.nan, clearance=math.nan))
            trajectory.status = TerminationStatus.DIVERGED
            break
        trajectory.records.append(record)
        if radius > 0 and float(np.linalg.norm(x - target)) < radius:
            trajectory.status = TerminationStatus.CONVERGED
            break
        if t == max_steps:
            break
        try:
            est = estimate(world, rig, spec, x, t)
        except StochNavError as e:
            logger.warning("run %s: sensing failed at step %d: %s", label or rig.seed, t, e)
            trajectory.status = TerminationStatus.DIVERGED
            break
        g = est.direction
        eps = schedule.step(t)
        record.eps = eps
        record.gnorm = float(np.linalg.norm(g))
        record.awareness_size = len(est.awareness)
        record.clipped = est.clipped > 0
        trajectory.estimates.append(g)
        x_next = x - eps * g
        if not np.all(np.isfinite(x_next)):
            trajectory.records.append(_terminal_record(world, x_next, t + 1))
            trajectory.status = TerminationStatus.DIVERGED
            break
        if world.collided(x_next):
            trajectory.records.append(_terminal_record(world, x_next, t + 1))
            trajectory.status = TerminationStatus.COLLISION
            logger.warning("run %s: collision at step %d, x=%s", label or rig.seed, t + 1, x_next.tolist())
            break
        x = x_next
    logger.debug("run %s: %s after %d steps", label or rig.seed, trajectory.status.value, trajectory.steps)
    return trajectory


def run_gradient_flow_baseline(
    world: World,
    spec: PotentialSpec,
    x0: Any,
    h: Optional[float] = None,
    max_steps: int = BASELINE_MAX_STEPS,
    stop_radius: Optional[float] = None,
    target: Optional[np.ndarray] = None,
    label: str = "baseline",
) -> Trajectory:
    """Explicit Euler with fixed step h along the normalized exact descent direction.

    Converges when the flow reaches `stop_radius` of the located minimum or
    comes to rest within max(stop_radius, h) of it. Coming to rest anywhere
    else (zero or reversed direction) ends it as stalled.
    """
    x = _start(world, x0)
    potential = make_potential(world, spec)
    step = BASELINE_STEP * world.length_scale if h is None else float(h)
    radius = default_stop_radius(world) if stop_radius is None else float(stop_radius)
    if radius > 0 and target is None:
        target = locate_minimum(world, spec)
    trajectory = Trajectory(label=label)
    previous: Optional[np.ndarray] = None
    for t in range(max_steps + 1):
        record = _record(world, potential, x, t)
        trajectory.records.append(record)
        if target is not None and float(np.linalg.norm(x - target)) < radius:
            trajectory.status = TerminationStatus.CONVERGED
            break
        if t == max_steps:
            break
        d = potential.direction(x)
        norm = float(np.linalg.norm(d))
        if norm == 0.0 or (previous is not None and float(d @ previous) < 0):
            # resting on or oscillating around a critical point; only the target counts
            if target is not None and float(np.linalg.norm(x - target)) <= max(radius, step):
                trajectory.status = TerminationStatus.CONVERGED
            else:
                trajectory.status = TerminationStatus.STALLED
                logger.info("baseline: stalled at step %d, x=%s", t, x.tolist())
            break
        u = d / norm
        record.eps = step
        record.gnorm = norm
        trajectory.estimates.append(u)
        x_next = x - step * u
        if world.collided(x_next):
            trajectory.records.append(_terminal_record(world, x_next, t + 1))
            trajectory.status = TerminationStatus.COLLISION
            logger.warning("baseline: collision at step %d", t + 1)
            break
        x, previous = x_next, u
    return trajectory


@dataclass
class EscapeStatistics:
    saddle: np.ndarray
    trials: int = 0
    converged: int = 0
    lingering: int = 0
    collisions: int = 0
    # +1 / -1: side of the unstable direction the run left on, 0 if it never left
    sides: List[int] = field(default_factory=list)

    @property
    def converged_fraction(self) -> float:
        return self.converged / self.trials if self.trials else math.nan

    @property
    def linger_fraction(self) -> float:
        return self.lingering / self.trials if self.trials else math.nan

    @property
    def both_sides(self) -> bool:
        return 1 in self.sides and -1 in self.sides

    def to_dict(self) -> Dict[str, Any]:
        return {
            "saddle": self.saddle.tolist(),
            "trials": self.trials,
            "converged": self.converged,
            "lingering": self.lingering,
            "collisions": self.collisions,
            "positive_side": self.sides.count(1),
            "negative_side": self.sides.count(-1),
        }


def trial_seed(master: int, trial: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=(trial,)).generate_state(1)[0])


def saddle_escape_trial(
    world: World,
    spec: PotentialSpec,
    rig: SensorRig,
    schedule: StepSchedule,
    saddle: Union[CriticalPoint, Any],
    trials: int,
    max_steps: int = 5000,
    stop_radius: Optional[float] = None,
    linger_radius: Optional[float] = None,
) -> EscapeStatistics:
    """Start `trials` independently seeded runs exactly at a saddle of the potential."""
    x_c = as_point(saddle.point if isinstance(saddle, CriticalPoint) else saddle)
    eigenvalues, vectors = np.linalg.eigh(direction_jacobian(world, spec, x_c))
    if classify(eigenvalues) is not CriticalKind.SADDLE:
        raise NotASaddleError(f"{x_c.tolist()} is not a saddle (eigenvalues {eigenvalues.tolist()})")
    unstable = vectors[:, 0]
    linger = default_stop_radius(world) if linger_radius is None else float(linger_radius)
    side_radius = ESCAPE_SIDE_RADIUS * world.length_scale
    target = locate_minimum(world, spec)
    stats = EscapeStatistics(saddle=x_c)
    for j in range(trials):
        run = run_sgd(
            world, spec, rig.with_seed(trial_seed(rig.seed, j)), schedule, x_c, max_steps,
            stop_radius=stop_radius, target=target, label=f"escape-{j}",
        )
        stats.trials += 1
        if run.status is TerminationStatus.CONVERGED:
            stats.converged += 1
        elif run.status is TerminationStatus.COLLISION:
            stats.collisions += 1
        if float(np.linalg.norm(run.end - x_c)) <= linger:
            stats.lingering += 1
        offsets = run.points - x_c
        far = np.nonzero(np.linalg.norm(offsets, axis=1) > side_radius)[0]
        stats.sides.append(int(np.sign(offsets[far[0]] @ unstable)) if far.size else 0)
    logger.info(
        "saddle escape at %s: %d/%d converged, %d lingering",
        x_c.tolist(), stats.converged, stats.trials, stats.lingering,
    )
    return stats
