"""Bias of the sensed gradient estimate.

For the circle-fit estimator the expected estimate factors as
E[g] = alpha(x) (grad phi_k(x) + b_k(x)) with

    b_k = w(x) [ sum_{i=0..m} grad beta_i / beta_i
                 - sum_{i in A} grad beta~_i / (beta~_i + sigma_i^2) ]

where beta~_i = d_i^2 + 2 R_i d_i is the hallucinated circle, A the
awareness set, w = f0 beta / (k (f0^k + beta)^(1+1/k)) for Rimon-Koditschek
and w = 1/k for the log barrier. The workspace shell is sensed exactly, so
its terms cancel.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import UnsupportedEstimatorError
from ..geometry.obstacles import as_point
from ..geometry.world import World, sample_free_space
from ..potentials.critical import find_critical_points
from ..potentials.potential import PotentialKind, PotentialSpec, evaluate, make_potential
from ..sensors.estimators import estimate
from ..sensors.rig import EstimatorKind, SensorRig, curvature_radius

logger = logging.getLogger(__name__)

MIN_MONTE_CARLO_DRAWS = 10_000
MONTE_CARLO_CHUNK = 100_000
NEGLIGIBLE_BIAS = 1e-14


class AlphaReading(str, Enum):
    """How the positive factor alpha(x) in E[g] = alpha (grad phi + b) is read."""

    # the factor the circle-fit estimator itself produces
    ESTIMATOR = "estimator"
    # (f0^k + beta_A)^(1+1/k) over the sensed product
    AWARENESS = "awareness"


@dataclass
class BiasTerms:
    x: np.ndarray
    awareness: Tuple[int, ...]
    # bracketed difference of the two gradient-over-value sums
    bracket: np.ndarray
    weight: float
    # log of the factor between scaled and plain bias: (f0^k+beta)^(1+1/k) or beta
    log_scale: float
    log_beta: float
    f0: float

    @property
    def bias(self) -> np.ndarray:
        return self.weight * self.bracket


def _check_closed_form(rig: SensorRig) -> None:
    if rig.estimator is not EstimatorKind.CIRCLE:
        raise UnsupportedEstimatorError(
            f"the closed-form bias is only available for the circle-fit estimator, not {rig.estimator.value}"
        )


def bias_terms(world: World, rig: SensorRig, spec: PotentialSpec, x: Any) -> BiasTerms:
    """Ingredients of the closed-form bias at an interior point."""
    _check_closed_form(rig)
    x = as_point(x)
    state = evaluate(world, x)
    potential = make_potential(world, spec)
    log_beta = math.log(state.beta)
    log_scale = potential.log_scale(x)
    probes = world.probes(x)
    awareness = (0,) + tuple(i for i in range(1, world.m + 1) if probes[i].distance <= rig.range_c)
    values, grads = world.factors(x)
    bracket = np.sum(grads[1:] / values[1:, None], axis=0)
    for i in awareness[1:]:
        p = probes[i]
        d = p.distance
        radius = curvature_radius(world.obstacle(i), p.point)
        value = d * d + 2.0 * radius * d + rig.noise.distance_std(d) ** 2
        bracket = bracket - 2.0 * (d + radius) * p.normal / value
    if spec.kind is PotentialKind.LOG_BARRIER:
        weight = 1.0 / spec.k
    elif state.f0 == 0.0:
        weight = 0.0
    else:
        weight = math.exp(math.log(state.f0) + log_beta - math.log(spec.k) - log_scale)
    return BiasTerms(
        x=x,
        awareness=awareness,
        bracket=bracket,
        weight=weight,
        log_scale=log_scale,
        log_beta=log_beta,
        f0=state.f0,
    )


def closed_form_bias(world: World, rig: SensorRig, spec: PotentialSpec, x: Any) -> np.ndarray:
    """b_k(x); zero on the boundary of the free space, where the estimate is exact."""
    _check_closed_form(rig)
    x = as_point(x)
    if not world.in_interior(x):
        return np.zeros(world.dim)
    return bias_terms(world, rig, spec, x).bias


def scaled_bias(world: World, rig: SensorRig, spec: PotentialSpec, x: Any) -> np.ndarray:
    """b_k(x) times the direction scale: (f0^k+beta)^(1+1/k) b_k for Rimon-Koditschek, beta b_k for log."""
    _check_closed_form(rig)
    x = as_point(x)
    if not world.in_interior(x):
        return np.zeros(world.dim)
    terms = bias_terms(world, rig, spec, x)
    factor = terms.f0 if spec.kind is PotentialKind.RIMON_KODITSCHEK else 1.0
    return math.exp(terms.log_beta) * factor / spec.k * terms.bracket


def sensed_log_product(world: World, rig: SensorRig, x: Any) -> Tuple[Tuple[int, ...], float]:
    """Awareness set and log of the expected sensed product at x, workspace included.

    Circle fit: prod (beta~_i + sigma_i^2). Ellipse fit: prod of the noiseless
    fitted ellipse values.
    """
    x = as_point(x)
    probes = world.probes(x)
    awareness = (0,) + tuple(i for i in range(1, world.m + 1) if probes[i].distance <= rig.range_c)
    total = math.log(world.workspace.value(x))
    for i in awareness[1:]:
        p = probes[i]
        if rig.estimator is EstimatorKind.ELLIPSE:
            value = world.obstacle(i).ellipse_model().value(x)
        else:
            d = p.distance
            radius = curvature_radius(world.obstacle(i), p.point)
            value = d * d + 2.0 * radius * d + rig.noise.distance_std(d) ** 2
        total += math.log(max(value, np.finfo(float).tiny))
    return awareness, total


def log_alpha(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    x: Any,
    reading: AlphaReading = AlphaReading.ESTIMATOR,
) -> float:
    x = as_point(x)
    potential = make_potential(world, spec)
    if rig.estimator is EstimatorKind.EXACT:
        return potential.log_scale(x) - math.log(rig.normalization(world.m + 1))
    if rig.estimator is EstimatorKind.ELLIPSE and reading is AlphaReading.ESTIMATOR:
        raise UnsupportedEstimatorError("the estimator reading of alpha needs the circle-fit model")
    awareness, log_product = sensed_log_product(world, rig, x)
    log_norm = math.log(rig.normalization(len(awareness)))
    if spec.kind is PotentialKind.LOG_BARRIER:
        return log_product - log_norm
    if reading is AlphaReading.AWARENESS:
        f0 = world.objective.value(x)
        log_f0k = spec.k * math.log(f0) if f0 > 0 else -math.inf
        return (1.0 + 1.0 / spec.k) * float(np.logaddexp(log_f0k, log_product)) - log_norm
    return log_product + potential.log_scale(x) - math.log(world.beta(x)) - log_norm


def alpha(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    x: Any,
    reading: AlphaReading = AlphaReading.ESTIMATOR,
) -> float:
    """Positive factor between E[g] and grad phi + b under the chosen reading."""
    return math.exp(log_alpha(world, rig, spec, x, reading))


@dataclass
class MonteCarloBias:
    draws: int
    mean: np.ndarray
    standard_error: np.ndarray
    alpha: float
    bias: np.ndarray
    bias_error: np.ndarray
    # E[g] - alpha grad phi, free of the alpha reading up to the factor itself
    raw: np.ndarray
    clipped: int = 0

    def within(self, expected: np.ndarray, sigmas: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.bias - expected) <= sigmas * self.bias_error + 1e-15))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "draws": self.draws,
            "mean": self.mean.tolist(),
            "standard_error": self.standard_error.tolist(),
            "alpha": self.alpha,
            "bias": self.bias.tolist(),
            "bias_error": self.bias_error.tolist(),
            "raw": self.raw.tolist(),
            "clipped": self.clipped,
        }


def sample_estimates(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    x: Any,
    draws: int,
    t0: int = 0,
    workers: int = 1,
    chunk: int = MONTE_CARLO_CHUNK,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Sum and sum of squares of `draws` estimates at x, chunk j on substream t0 + j.

    Chunks are merged in index order, so the result does not depend on `workers`.
    """
    sizes = [min(chunk, draws - s) for s in range(0, draws, chunk)]

    def run(j: int) -> Tuple[np.ndarray, np.ndarray, int]:
        est = estimate(world, rig, spec, x, t0 + j, sizes[j])
        dirs = est.direction.reshape(sizes[j], world.dim)
        return dirs.sum(axis=0), (dirs * dirs).sum(axis=0), est.clipped

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(j) for j in range(len(sizes))]
    total = np.zeros(world.dim)
    squares = np.zeros(world.dim)
    clipped = 0
    for s, sq, c in parts:
        total += s
        squares += sq
        clipped += c
    return total, squares, clipped


def monte_carlo_bias(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    x: Any,
    draws: int,
    reading: AlphaReading = AlphaReading.ESTIMATOR,
    t0: int = 0,
    workers: int = 1,
) -> MonteCarloBias:
    if draws < MIN_MONTE_CARLO_DRAWS:
        raise ValueError(f"Monte Carlo bias needs at least {MIN_MONTE_CARLO_DRAWS} draws, got {draws}")
    x = as_point(x)
    total, squares, clipped = sample_estimates(world, rig, spec, x, draws, t0, workers)
    mean = total / draws
    variance = np.maximum(squares - draws * mean * mean, 0.0) / (draws - 1)
    se = np.sqrt(variance / draws)
    a = alpha(world, rig, spec, x, reading)
    grad = make_potential(world, spec).gradient(x)
    return MonteCarloBias(
        draws=draws,
        mean=mean,
        standard_error=se,
        alpha=a,
        bias=mean / a - grad,
        bias_error=se / a,
        raw=mean - a * grad,
        clipped=clipped,
    )


@dataclass
class BiasReport:
    x: np.ndarray
    k: float
    awareness: Tuple[int, ...]
    closed_form: Optional[np.ndarray]
    scaled: Optional[np.ndarray]
    monte_carlo: Optional[MonteCarloBias] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": self.x.tolist(),
            "k": self.k,
            "awareness": list(self.awareness),
            "closed_form": None if self.closed_form is None else self.closed_form.tolist(),
            "scaled": None if self.scaled is None else self.scaled.tolist(),
            "monte_carlo": None if self.monte_carlo is None else self.monte_carlo.to_dict(),
        }


def bias_report(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    x: Any,
    draws: Optional[int] = None,
    workers: int = 1,
) -> BiasReport:
    """Closed form where the estimator admits one, Monte Carlo when `draws` is given."""
    x = as_point(x)
    closed = scaled = None
    if rig.estimator is EstimatorKind.CIRCLE:
        closed = closed_form_bias(world, rig, spec, x)
        scaled = scaled_bias(world, rig, spec, x)
    probes = world.probes(x)
    awareness = (0,) + tuple(i for i in range(1, world.m + 1) if probes[i].distance <= rig.range_c)
    mc = None
    if draws:
        reading = AlphaReading.AWARENESS if rig.estimator is EstimatorKind.ELLIPSE else AlphaReading.ESTIMATOR
        mc = monte_carlo_bias(world, rig, spec, x, draws, reading=reading, workers=workers)
    return BiasReport(x=x, k=spec.k, awareness=awareness, closed_form=closed, scaled=scaled, monte_carlo=mc)


def _finite(v: float) -> Optional[float]:
    return v if math.isfinite(v) else None


@dataclass
class DecayFit:
    """Least-squares fit of log |b| against log k."""

    ks: List[float]
    magnitudes: List[float]
    slope: float = math.nan
    intercept: float = math.nan
    residual: float = math.nan
    dropped: List[float] = field(default_factory=list)
    skipped: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ks": self.ks,
            "magnitudes": self.magnitudes,
            "slope": _finite(self.slope),
            "intercept": _finite(self.intercept),
            "residual": _finite(self.residual),
            "dropped": self.dropped,
            "skipped": self.skipped or None,
        }


def fit_decay(ks: Sequence[float], magnitudes: Sequence[float]) -> DecayFit:
    fit = DecayFit(ks=list(map(float, ks)), magnitudes=list(map(float, magnitudes)))
    keep = [(k, v) for k, v in zip(fit.ks, fit.magnitudes) if v > NEGLIGIBLE_BIAS]
    fit.dropped = [k for k, v in zip(fit.ks, fit.magnitudes) if not v > NEGLIGIBLE_BIAS]
    if len(keep) < 2:
        fit.skipped = "bias vanishes on the ladder"
        return fit
    lk = np.log([k for k, _ in keep])
    lv = np.log([v for _, v in keep])
    slope, intercept = np.polyfit(lk, lv, 1)
    fit.slope, fit.intercept = float(slope), float(intercept)
    fit.residual = float(np.sqrt(np.mean((lv - (slope * lk + intercept)) ** 2)))
    return fit


def scaled_bias_decay(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    x: Any,
    k_values: Sequence[float],
) -> Tuple[DecayFit, DecayFit]:
    """Decay of |b~_k(x)| and of |b_k(x)| along a ladder of k at a fixed point."""
    scaled = [float(np.linalg.norm(scaled_bias(world, rig, spec.with_k(k), x))) for k in k_values]
    plain = [float(np.linalg.norm(closed_form_bias(world, rig, spec.with_k(k), x))) for k in k_values]
    return fit_decay(k_values, scaled), fit_decay(k_values, plain)


def nearest_obstacle(world: World, x: Any) -> int:
    probes = world.probes(x)
    return min(range(1, world.m + 1), key=lambda i: probes[i].distance)


def saddle_bias_decay(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    k_values: Sequence[float],
    seeds: Optional[Sequence[Any]] = None,
) -> Dict[int, DecayFit]:
    """|b~_k| at the saddle next to each obstacle, tracked along the k ladder."""
    tracks: Dict[int, Tuple[List[float], List[float]]] = {}
    for k in k_values:
        report = find_critical_points(world, spec.with_k(k), seeds)
        for saddle in report.saddles:
            index = nearest_obstacle(world, saddle.point)
            ks, mags = tracks.setdefault(index, ([], []))
            ks.append(float(k))
            mags.append(float(np.linalg.norm(scaled_bias(world, rig, spec.with_k(k), saddle.point))))
    return {i: fit_decay(ks, mags) for i, (ks, mags) in sorted(tracks.items())}


def bracket_bound(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Sampled supremum of the bracketed difference in b_k (the constant B')."""
    rng = np.random.default_rng(seed)
    largest = 0.0
    for x in sample_free_space(world, samples, rng):
        largest = max(largest, float(np.linalg.norm(bias_terms(world, rig, spec, x).bracket)))
    return largest


@dataclass
class AwarenessSweep:
    index: int
    distances: np.ndarray
    magnitudes: np.ndarray
    aware: np.ndarray

    @property
    def largest_jump(self) -> Tuple[float, float]:
        """(distance between the two samples, size) of the largest jump in |b_k|."""
        jumps = np.abs(np.diff(self.magnitudes))
        j = int(np.argmax(jumps))
        return 0.5 * float(self.distances[j] + self.distances[j + 1]), float(jumps[j])

    @property
    def switch_distance(self) -> float:
        changes = np.nonzero(np.diff(self.aware.astype(int)))[0]
        if not changes.size:
            return math.nan
        j = int(changes[0])
        return 0.5 * float(self.distances[j] + self.distances[j + 1])


def awareness_sweep(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    index: int,
    distances: Sequence[float],
) -> AwarenessSweep:
    """|b_k| along the boundary normal of obstacle `index` facing x*, across the range limit."""
    ob = world.obstacle(index)
    foot = ob.project(world.objective.minimizer)
    ds = np.asarray(sorted(distances), dtype=float)
    mags, aware = [], []
    kept = []
    for d in ds:
        x = foot.point + d * foot.normal
        if not world.in_interior(x):
            continue
        kept.append(d)
        terms = bias_terms(world, rig, spec, x)
        mags.append(float(np.linalg.norm(terms.bias)))
        aware.append(index in terms.awareness)
    return AwarenessSweep(index=index, distances=np.array(kept), magnitudes=np.array(mags), aware=np.array(aware))


def bias_grid(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    per_axis: int,
    draws: Optional[int] = None,
    workers: int = 1,
) -> List[BiasReport]:
    """Bias reports on a planar grid over the workspace, interior points only."""
    c, r = world.workspace.center, world.workspace.radius
    axis = np.linspace(-r, r, per_axis + 2)[1:-1]
    reports = []
    for a in axis:
        for b in axis:
            x = c + np.array([a, b])
            if world.in_interior(x):
                reports.append(bias_report(world, rig, spec, x, draws, workers))
    return reports
