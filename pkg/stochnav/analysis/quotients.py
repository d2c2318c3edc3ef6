from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from ..geometry.obstacles import as_point
from ..geometry.world import World
from ..potentials.critical import JACOBIAN_STEP, find_critical_points, finite_difference_jacobian
from ..potentials.potential import PotentialSpec, phi_gradient
from ..sensors.rig import SensorRig
from .bias import DecayFit, closed_form_bias, fit_decay, nearest_obstacle

logger = logging.getLogger(__name__)

DEGENERATE_DENOMINATOR = 1e-12


@dataclass
class QuotientRow:
    k: float
    obstacle: int
    point: np.ndarray
    q_v: float
    q_perp: float
    flagged: bool = False


@dataclass
class QuotientTable:
    rows: List[QuotientRow] = field(default_factory=list)
    fits: Dict[int, Tuple[DecayFit, DecayFit]] = field(default_factory=dict)

    def write_csv(self, stream: Any) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["k", "saddle", "q_v", "q_vperp", "flagged"])
        for r in self.rows:
            writer.writerow([repr(r.k), r.obstacle, repr(r.q_v), repr(r.q_perp), int(r.flagged)])

    def csv_text(self) -> str:
        buffer = io.StringIO()
        self.write_csv(buffer)
        return buffer.getvalue()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": [
                {"k": r.k, "saddle": r.obstacle, "point": r.point.tolist(), "q_v": r.q_v, "q_vperp": r.q_perp, "flagged": r.flagged}
                for r in self.rows
            ],
            "fits": {str(i): {"v": v.to_dict(), "vperp": p.to_dict()} for i, (v, p) in sorted(self.fits.items())},
        }


def saddle_frame(world: World, x: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Unit grad beta at x and a unit vector orthogonal to it."""
    _, grad = world.beta_and_gradient(x)
    v = grad / float(np.linalg.norm(grad))
    return v, null_space(v[None, :])[:, 0]


def _jacobians(world: World, rig: SensorRig, spec: PotentialSpec, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    step = JACOBIAN_STEP * world.length_scale
    jb = finite_difference_jacobian(lambda y: closed_form_bias(world, rig, spec, y), x, step)
    hphi = finite_difference_jacobian(lambda y: phi_gradient(world, spec, y), x, step)
    return jb, hphi


def _quotient(jb: np.ndarray, hphi: np.ndarray, u: np.ndarray) -> Tuple[float, bool]:
    den = float(u @ hphi @ u)
    if abs(den) < DEGENERATE_DENOMINATOR:
        return math.nan, True
    return abs(float(u @ jb @ u) / den), False


def quadratic_quotients(world: World, rig: SensorRig, spec: PotentialSpec, x: Any) -> Tuple[float, float, bool]:
    """|v^T Jb v / v^T H v| along grad beta and across it; flagged when a denominator vanishes."""
    x = as_point(x)
    jb, hphi = _jacobians(world, rig, spec, x)
    v, v_perp = saddle_frame(world, x)
    q_v, bad_v = _quotient(jb, hphi, v)
    q_perp, bad_perp = _quotient(jb, hphi, v_perp)
    return q_v, q_perp, bad_v or bad_perp


def saddle_quotient_check(
    world: World,
    rig: SensorRig,
    spec: PotentialSpec,
    k_values: Sequence[float],
    seeds: Optional[Sequence[Any]] = None,
) -> QuotientTable:
    table = QuotientTable()
    tracks: Dict[int, Tuple[List[float], List[float], List[float]]] = {}
    for k in k_values:
        at_k = spec.with_k(k)
        for saddle in find_critical_points(world, at_k, seeds).saddles:
            index = nearest_obstacle(world, saddle.point)
            q_v, q_perp, flagged = quadratic_quotients(world, rig, at_k, saddle.point)
            table.rows.append(QuotientRow(k=float(k), obstacle=index, point=saddle.point, q_v=q_v, q_perp=q_perp, flagged=flagged))
            if flagged:
                logger.warning("k=%g saddle near obstacle %d: degenerate quadratic form", k, index)
                continue
            ks, qv, qp = tracks.setdefault(index, ([], [], []))
            ks.append(float(k))
            qv.append(q_v)
            qp.append(q_perp)
    table.fits = {i: (fit_decay(ks, qv), fit_decay(ks, qp)) for i, (ks, qv, qp) in sorted(tracks.items())}
    return table


@dataclass
class SignAgreement:
    point: np.ndarray
    hessian_eigenvalues: np.ndarray
    biased_eigenvalues: np.ndarray

    @property
    def agree(self) -> bool:
        return bool(np.array_equal(np.sign(self.hessian_eigenvalues), np.sign(self.biased_eigenvalues)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "point": self.point.tolist(),
            "hessian_eigenvalues": self.hessian_eigenvalues.tolist(),
            "biased_eigenvalues": self.biased_eigenvalues.tolist(),
            "agree": self.agree,
        }


def sign_agreement(world: World, rig: SensorRig, spec: PotentialSpec, x: Any) -> SignAgreement:
    """Eigenvalue signs of the Jacobians of grad phi + b and of grad phi at a critical point."""
    x = as_point(x)
    jb, hphi = _jacobians(world, rig, spec, x)
    biased = jb + hphi
    return SignAgreement(
        point=x,
        hessian_eigenvalues=np.linalg.eigvalsh(0.5 * (hphi + hphi.T)),
        biased_eigenvalues=np.linalg.eigvalsh(0.5 * (biased + biased.T)),
    )
