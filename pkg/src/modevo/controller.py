"""CPG network: one differential oscillator per active joint plus recurrent coupling.

Each oscillator has a state pair (x, y) obeying

    dx/dt =  omega * y + sum_j w_ij * x_j
    dy/dt = -omega * x

The rotation part is integrated with the trapezoidal rule (a Cayley rotation,
which keeps x^2 + y^2 exactly constant when uncoupled) and the coupling term
explicitly. Joint targets are read through a tanh output layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .morphology import ModuleKind

STATE_LIMIT = 10.0
INITIAL_STATE = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class CpgConfig:
    base_frequency: float = 2.0 * math.pi
    gain: float = 1.0


@dataclass
class CpgNetwork:
    x: np.ndarray
    y: np.ndarray
    omega: np.ndarray
    weights: np.ndarray
    is_linear: np.ndarray
    gain: float = 1.0
    clamp_events: int = field(default=0)

    @property
    def size(self) -> int:
        return len(self.x)

    def outputs(self) -> np.ndarray:
        out = np.tanh(self.gain * self.x)
        return np.where(self.is_linear, (out + 1.0) / 2.0, out)


def init(weights: list[tuple[tuple[int, int], float]], joint_kinds: list[ModuleKind],
         config: CpgConfig = CpgConfig()) -> CpgNetwork:
    n = len(joint_kinds)
    w = np.zeros((n, n))
    for (i, j), value in weights:
        w[i, j] = value
    return CpgNetwork(
        x=np.full(n, INITIAL_STATE),
        y=np.full(n, INITIAL_STATE),
        omega=np.full(n, config.base_frequency),
        weights=w,
        is_linear=np.array([k is ModuleKind.LINEAR_ACTUATOR for k in joint_kinds], dtype=bool),
        gain=config.gain,
    )


def step(net: CpgNetwork, dt: float) -> np.ndarray:
    """Advance the network by dt and return the joint targets.

    Hinge targets are angle fractions in [-1, 1] (of the 90 degree servo range);
    linear actuator targets are extension fractions in [0, 1].
    """
    if not 0.0 < dt <= 0.02:
        raise ValueError(f"dt must lie in (0, 0.02], got {dt}")
    if net.size == 0:
        return np.zeros(0)
    x, y = advance(net.x, net.y, net.omega, net.weights, dt)
    clipped_x = np.clip(x, -STATE_LIMIT, STATE_LIMIT)
    clipped_y = np.clip(y, -STATE_LIMIT, STATE_LIMIT)
    net.clamp_events += int(np.count_nonzero(clipped_x != x) + np.count_nonzero(clipped_y != y))
    net.x, net.y = clipped_x, clipped_y
    return net.outputs()


@njit(cache=True)
def advance(x: np.ndarray, y: np.ndarray, omega: np.ndarray, weights: np.ndarray,
            dt: float) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    new_x = np.empty(n)
    new_y = np.empty(n)
    for i in range(n):
        drive = 0.0
        for j in range(n):
            drive += weights[i, j] * x[j]
        a = 0.5 * dt * omega[i]
        denom = 1.0 + a * a
        # trapezoidal rotation of (x, y), coupling added explicitly
        bx = x[i] + a * y[i] + dt * drive
        by = y[i] - a * x[i]
        new_x[i] = (bx + a * by) / denom
        new_y[i] = (by - a * bx) / denom
    return new_x, new_y
