from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, TextIO

import numpy as np


class TerminationStatus(str, Enum):
    CONVERGED = "converged"
    MAX_STEPS = "max_steps"
    STALLED = "stalled"
    COLLISION = "collision"
    DIVERGED = "diverged"


@dataclass
class StepRecord:
    """Diagnostics at iterate x_t; eps and gnorm describe the step taken from it."""

    t: int
    x: np.ndarray
    beta: float
    phi: float
    clearance: float
    eps: float = math.nan
    gnorm: float = math.nan
    awareness_size: int = 0
    clipped: bool = False


@dataclass
class Trajectory:
    records: List[StepRecord] = field(default_factory=list)
    # estimates[t] is the direction used to leave x_t
    estimates: List[np.ndarray] = field(default_factory=list)
    status: TerminationStatus = TerminationStatus.MAX_STEPS
    seed: Optional[int] = None
    label: str = ""

    @property
    def points(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def start(self) -> np.ndarray:
        return self.records[0].x

    @property
    def end(self) -> np.ndarray:
        return self.records[-1].x

    @property
    def steps(self) -> int:
        return len(self.estimates)

    @property
    def clip_count(self) -> int:
        return sum(1 for r in self.records if r.clipped)

    def __len__(self) -> int:
        return len(self.records)

    def header(self) -> List[str]:
        dim = self.records[0].x.size if self.records else 0
        return ["t"] + [f"x{j + 1}" for j in range(dim)] + ["eps", "gnorm", "beta", "phi", "clearance"]

    def write_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.header())
        for r in self.records:
            writer.writerow([r.t] + [_fmt(v) for v in r.x] + [_fmt(v) for v in (r.eps, r.gnorm, r.beta, r.phi, r.clearance)])

    def csv_text(self) -> str:
        buffer = io.StringIO()
        self.write_csv(buffer)
        return buffer.getvalue()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "seed": self.seed,
            "status": self.status.value,
            "steps": self.steps,
            "start": self.start.tolist(),
            "end": self.end.tolist(),
            "clipped": self.clip_count,
        }


def _fmt(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def read_csv(stream: TextIO) -> Trajectory:
    """Read a trajectory back from its CSV form (for plotting and comparisons)."""
    reader = csv.reader(stream)
    header = next(reader)
    dim = sum(1 for name in header if name.startswith("x"))
    trajectory = Trajectory()

    def num(s: str) -> float:
        return float(s) if s else math.nan

    for row in reader:
        if not row:
            continue
        x = np.array([float(v) for v in row[1:1 + dim]])
        eps, gnorm, beta, phi, clearance = (num(v) for v in row[1 + dim:6 + dim])
        trajectory.records.append(
            StepRecord(t=int(row[0]), x=x, beta=beta, phi=phi, clearance=clearance, eps=eps, gnorm=gnorm)
        )
    return trajectory
