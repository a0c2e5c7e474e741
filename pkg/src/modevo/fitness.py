"""Directed-locomotion fitness of a core trajectory.

    f = |proj| / (length + eps) * (proj / (delta + 1) - penalty)

``proj`` is the displacement projected on the target bearing, ``length`` the
travelled path length, ``delta`` the angle between displacement and target and
``penalty`` a deviation cost. The target bearing is measured in the robot's
yaw frame at the start of the recorded window.

The penalty is ``penalty_coefficient * |displacement component orthogonal to
the target|``; set the coefficient to 0 to disable it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simulation import Trajectory


@dataclass(frozen=True)
class FitnessParams:
    beta0: float = math.pi / 3
    epsilon: float = 1e-10
    penalty_coefficient: float = 0.01

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.penalty_coefficient < 0:
            raise ValueError("penalty_coefficient must be non-negative")


@dataclass(frozen=True)
class FitnessBreakdown:
    distProjection: float
    lengthTraj: float
    delta: float
    penalty: float
    fitness: float

    CSV_FIELDS = ("fitness", "distProjection", "lengthTraj", "delta", "penalty")

    def row(self) -> list[float]:
        return [getattr(self, name) for name in self.CSV_FIELDS]


ZERO = FitnessBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)


class TrajectoryTooShort(ValueError):
    pass


def evaluate_positions(positions: np.ndarray, start_yaw: float = 0.0,
                       params: FitnessParams = FitnessParams()) -> FitnessBreakdown:
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[0] < 2:
        raise TrajectoryTooShort("a trajectory needs at least two samples")
    bearing = start_yaw + params.beta0
    ux, uy = math.cos(bearing), math.sin(bearing)
    dx, dy = positions[-1] - positions[0]
    dist_projection = dx * ux + dy * uy
    orthogonal = abs(-dx * uy + dy * ux)
    steps = np.diff(positions, axis=0)
    length = float(np.sum(np.hypot(steps[:, 0], steps[:, 1])))
    # atan2 stays well conditioned near delta = 0, where acos does not
    delta = 0.0 if dx == dy == 0.0 else math.atan2(orthogonal, dist_projection)
    penalty = params.penalty_coefficient * orthogonal
    value = abs(dist_projection) / (length + params.epsilon) * (dist_projection / (delta + 1.0) - penalty)
    return FitnessBreakdown(float(dist_projection), length, float(delta), float(penalty), float(value))


def evaluate_directed(traj: Trajectory, params: FitnessParams = FitnessParams()) -> FitnessBreakdown:
    return evaluate_positions(traj.positions, traj.start_pose[2], params)
