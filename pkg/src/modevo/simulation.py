"""Reduced-order physics for modular robots on a heightfield.

Model
-----
* Every module is a 5 cm cube of 100 g. The robot is one rigid body whose
  shape changes with the joint coordinates: forward kinematics over the body
  tree places every cube relative to the core.
* Joints track their targets with a first-order lag (no torque limits).
  Hinges rotate the subtree beyond them about the hinge centre, around the
  hinge's local y axis (HingeHorizontal) or local z axis (HingeVertical).
  The linear actuator translates its subtree along its local x axis.
* The rigid body carries translational and angular momentum about its centre
  of mass. Internal shape change moves cubes relative to the centre of mass
  but does not itself change the momenta; propulsion comes from contact.
* Each cube corner below the terrain gets a penalty spring-damper along the
  surface normal plus regularised Coulomb friction. The configured stiffness
  and damping are per module face, split evenly over its four corners.
* Integration is semi-implicit Euler with ``substeps`` physics steps per
  controller tick. A 2 s settle with joints held at rest precedes the
  recorded window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import controller
from .controller import CpgConfig
from .decoder import active_joints
from .morphology import BodyGraph, ModuleKind, placements
from .terrain import Heightmap, sample_height, sample_normal

MODULE_SIZE = 0.05
MODULE_MASS = 0.1
LA_STROKE = 0.05
HINGE_RANGE = math.pi / 2
SETTLE_TIME = 2.0
SPAWN_GAP = 0.005
MAX_SPEED = 100.0

_JOINT_NONE, _JOINT_HINGE, _JOINT_LINEAR = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.005
    duration: float = 30.0
    gravity: float = 9.81
    contact_stiffness: float = 5000.0
    contact_damping: float = 50.0
    friction: float = 0.8
    joint_tracking_rate: float = 10.0
    sample_period: float = 0.1
    substeps: int = 5
    settle_time: float = SETTLE_TIME
    friction_slip_speed: float = 0.02

    def __post_init__(self) -> None:
        for name in ("dt", "duration", "gravity", "contact_stiffness", "contact_damping",
                     "friction", "joint_tracking_rate", "sample_period", "friction_slip_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be at least 1")
        if self.settle_time < 0:
            raise ValueError("settle_time must be non-negative")
        for name in ("duration", "sample_period", "settle_time"):
            ticks = getattr(self, name) / self.dt
            if abs(ticks - round(ticks)) > 1e-6:
                raise ValueError(f"{name} must be a whole number of dt steps")

    @property
    def ticks(self) -> int:
        return round(self.duration / self.dt)

    @property
    def sample_every(self) -> int:
        return round(self.sample_period / self.dt)

    @property
    def settle_ticks(self) -> int:
        return round(self.settle_time / self.dt)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    start_pose: tuple[float, float, float]
    out_of_bounds: int = 0
    clamp_events: int = 0
    unstable: bool = False
    max_penetration: float = 0.0
    kinetic_energy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    diagnostic: str = ""

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.start_pose == other.start_pose
                and (self.out_of_bounds, self.clamp_events, self.unstable, self.diagnostic)
                == (other.out_of_bounds, other.clamp_events, other.unstable, other.diagnostic)
                and self.max_penetration == other.max_penetration
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.kinetic_energy, other.kinetic_energy))

    def to_csv(self) -> str:
        lines = ["t,x,y"]
        lines += [f"{t!r},{x!r},{y!r}" for t, (x, y) in
                  zip(self.times.tolist(), self.positions.tolist())]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RobotModel:
    """Flat arrays describing a body for the physics kernel."""

    parent: np.ndarray
    rest_center: np.ndarray
    joint_type: np.ndarray
    joint_axis: np.ndarray
    joint_slot: np.ndarray
    joint_kinds: list[ModuleKind]


def build_model(body: BodyGraph) -> RobotModel:
    places = placements(body)
    n = len(places)
    parent = np.full(n, -1, dtype=np.int64)
    rest = np.zeros((n, 3))
    jtype = np.zeros(n, dtype=np.int64)
    axis = np.zeros((n, 3))
    jslot = np.full(n, -1, dtype=np.int64)
    kinds = []
    for p in places:
        parent[p.index] = -1 if p.parent is None else p.parent
        rest[p.index] = np.array(p.cell, dtype=float) * MODULE_SIZE
        if p.kind.is_joint:
            jslot[p.index] = len(kinds)
            kinds.append(p.kind)
            frame = p.frame.astype(float)
            if p.kind is ModuleKind.LINEAR_ACTUATOR:
                jtype[p.index] = _JOINT_LINEAR
                axis[p.index] = frame[:, 0]
            else:
                jtype[p.index] = _JOINT_HINGE
                axis[p.index] = frame[:, 1] if p.kind is ModuleKind.HINGE_HORIZONTAL else frame[:, 2]
    assert [j.module_index for j in active_joints(body)] == [i for i in range(n) if jslot[i] >= 0]
    return RobotModel(parent, rest, jtype, axis, jslot, kinds)


def rest_joint_positions(model: RobotModel) -> np.ndarray:
    return np.array([LA_STROKE / 2 if k is ModuleKind.LINEAR_ACTUATOR else 0.0
                     for k in model.joint_kinds])


def simulate(body: BodyGraph, weights: list[tuple[tuple[int, int], float]],
             terrain: Heightmap, config: SimConfig = SimConfig(),
             cpg: CpgConfig = CpgConfig()) -> Trajectory:
    """Run the settle phase and the evaluation window; sample the core's (x, y)."""
    model = build_model(body)
    net = controller.init(weights, model.joint_kinds, cpg)
    out = _run(
        model.parent, model.rest_center, model.joint_type, model.joint_axis, model.joint_slot,
        rest_joint_positions(model),
        net.x.copy(), net.y.copy(), net.omega, net.weights, net.is_linear, float(net.gain),
        terrain.heights, terrain.origin, terrain.cell_size, terrain.is_plain,
        float(terrain.heights.max()),
        config.dt, config.substeps, config.settle_ticks, config.ticks, config.sample_every,
        config.gravity, MODULE_MASS, MODULE_SIZE, config.contact_stiffness,
        config.contact_damping, config.friction, config.friction_slip_speed,
        config.joint_tracking_rate, HINGE_RANGE, LA_STROKE, controller.STATE_LIMIT,
        SPAWN_GAP, MAX_SPEED, _CORNER_SIGNS,
    )
    samples, count, pose, oob, clamps, unstable, max_pen, energy = out
    times = np.arange(count) * config.sample_period
    diagnostic = "speed limit exceeded or non-finite state" if unstable else ""
    return Trajectory(times, samples[:count].copy(), (float(pose[0]), float(pose[1]), float(pose[2])),
                      int(oob), int(clamps), bool(unstable), float(max_pen), energy, diagnostic)


# -- kernel -------------------------------------------------------------
# Small fixed-size linear algebra is written out by hand: numba's np.dot on
# 3-vectors goes through BLAS and dominates the runtime otherwise.

@njit(cache=True, inline="always")
def _mv(m, x, y, z):
    return (m[0, 0] * x + m[0, 1] * y + m[0, 2] * z,
            m[1, 0] * x + m[1, 1] * y + m[1, 2] * z,
            m[2, 0] * x + m[2, 1] * y + m[2, 2] * z)


@njit(cache=True)
def _mm(a, b, out):
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j]


@njit(cache=True)
def _axis_rotation(axis, angle, r):
    x, y, z = axis[0], axis[1], axis[2]
    c = math.cos(angle)
    s = math.sin(angle)
    t = 1.0 - c
    r[0, 0] = t * x * x + c
    r[0, 1] = t * x * y - s * z
    r[0, 2] = t * x * z + s * y
    r[1, 0] = t * x * y + s * z
    r[1, 1] = t * y * y + c
    r[1, 2] = t * y * z - s * x
    r[2, 0] = t * x * z - s * y
    r[2, 1] = t * y * z + s * x
    r[2, 2] = t * z * z + c


@njit(cache=True)
def _quat_to_matrix(q, r):
    w, x, y, z = q[0], q[1], q[2], q[3]
    r[0, 0] = 1 - 2 * (y * y + z * z)
    r[0, 1] = 2 * (x * y - w * z)
    r[0, 2] = 2 * (x * z + w * y)
    r[1, 0] = 2 * (x * y + w * z)
    r[1, 1] = 1 - 2 * (x * x + z * z)
    r[1, 2] = 2 * (y * z - w * x)
    r[2, 0] = 2 * (x * z - w * y)
    r[2, 1] = 2 * (y * z + w * x)
    r[2, 2] = 1 - 2 * (x * x + y * y)


@njit(cache=True)
def _integrate_quat(q, ox, oy, oz, dt):
    speed = math.sqrt(ox * ox + oy * oy + oz * oz)
    angle = speed * dt
    if angle < 1e-12:
        return
    half = 0.5 * angle
    s = math.sin(half) / speed
    dw, dx, dy, dz = math.cos(half), ox * s, oy * s, oz * s
    w, x, y, z = q[0], q[1], q[2], q[3]
    a = dw * w - dx * x - dy * y - dz * z
    b = dw * x + dx * w + dy * z - dz * y
    c = dw * y - dx * z + dy * w + dz * x
    d = dw * z + dx * y - dy * x + dz * w
    norm = math.sqrt(a * a + b * b + c * c + d * d)
    q[0] = a / norm
    q[1] = b / norm
    q[2] = c / norm
    q[3] = d / norm


@njit(cache=True)
def _inverse(m, out):
    a, b, c = m[0, 0], m[0, 1], m[0, 2]
    d, e, f = m[1, 0], m[1, 1], m[1, 2]
    g, h, i = m[2, 0], m[2, 1], m[2, 2]
    co0 = e * i - f * h
    co1 = f * g - d * i
    co2 = d * h - e * g
    det = a * co0 + b * co1 + c * co2
    out[0, 0] = co0 / det
    out[1, 0] = co1 / det
    out[2, 0] = co2 / det
    out[0, 1] = (c * h - b * i) / det
    out[1, 1] = (a * i - c * g) / det
    out[2, 1] = (b * g - a * h) / det
    out[0, 2] = (b * f - c * e) / det
    out[1, 2] = (c * d - a * f) / det
    out[2, 2] = (a * e - b * d) / det


_CORNER_SIGNS = np.array([[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0)
                          for sz in (-1.0, 1.0)])


@njit(cache=True)
def _shape(parent, rest, jtype, jaxis, jslot, jpos, half, signs, rot, trans, rj,
           corners_out, centers_out):
    """Forward kinematics: module centres and cube corners in the core frame."""
    n = parent.shape[0]
    for i in range(n):
        p = parent[i]
        if p < 0:
            for a in range(3):
                trans[i, a] = 0.0
                for b in range(3):
                    rot[i, a, b] = 1.0 if a == b else 0.0
        elif jtype[p] == _JOINT_HINGE:
            _axis_rotation(jaxis[p], jpos[jslot[p]], rj)
            _mm(rot[p], rj, rot[i])
            # rotation about the hinge centre: t = R_p (c - Rj c) + t_p
            cx, cy, cz = rest[p, 0], rest[p, 1], rest[p, 2]
            qx, qy, qz = _mv(rj, cx, cy, cz)
            ux, uy, uz = _mv(rot[p], cx - qx, cy - qy, cz - qz)
            trans[i, 0] = ux + trans[p, 0]
            trans[i, 1] = uy + trans[p, 1]
            trans[i, 2] = uz + trans[p, 2]
        else:
            rot[i] = rot[p]
            if jtype[p] == _JOINT_LINEAR:
                e = jpos[jslot[p]]
                ux, uy, uz = _mv(rot[p], jaxis[p, 0] * e, jaxis[p, 1] * e, jaxis[p, 2] * e)
                trans[i, 0] = ux + trans[p, 0]
                trans[i, 1] = uy + trans[p, 1]
                trans[i, 2] = uz + trans[p, 2]
            else:
                trans[i] = trans[p]
        m = rot[i]
        x, y, z = _mv(m, rest[i, 0], rest[i, 1], rest[i, 2])
        centers_out[i, 0] = x + trans[i, 0]
        centers_out[i, 1] = y + trans[i, 1]
        centers_out[i, 2] = z + trans[i, 2]
        for k in range(8):
            ox, oy, oz = _mv(m, signs[k, 0] * half, signs[k, 1] * half, signs[k, 2] * half)
            corners_out[i * 8 + k, 0] = centers_out[i, 0] + ox
            corners_out[i * 8 + k, 1] = centers_out[i, 1] + oy
            corners_out[i * 8 + k, 2] = centers_out[i, 2] + oz


@njit(cache=True)
def _mass_properties(centers, mass, size, com_b, inertia):
    n = centers.shape[0]
    com_b[:] = 0.0
    for i in range(n):
        for a in range(3):
            com_b[a] += centers[i, a]
    for a in range(3):
        com_b[a] /= n
    inertia[:, :] = 0.0
    for i in range(n):
        sx = centers[i, 0] - com_b[0]
        sy = centers[i, 1] - com_b[1]
        sz = centers[i, 2] - com_b[2]
        s = (sx, sy, sz)
        ss = sx * sx + sy * sy + sz * sz
        for a in range(3):
            inertia[a, a] += mass * (ss + size * size / 6.0)
            for b in range(3):
                inertia[a, b] -= mass * s[a] * s[b]


@njit(cache=True)
def _run(parent, rest, jtype, jaxis, jslot, jrest,
         cx, cy, comega, cweights, clinear, cgain,
         heights, origin, cell, plain, hmax,
         dt, substeps, settle_ticks, ticks, sample_every,
         gravity, mass, size, stiffness, damping, mu, slip,
         track_rate, hinge_range, stroke, state_limit, spawn_gap, max_speed, signs):
    n = parent.shape[0]
    nc = n * 8
    half = 0.5 * size
    total_mass = mass * n
    k_c = stiffness / 4.0
    c_c = damping / 4.0
    h = dt / substeps
    lag = 1.0 - math.exp(-track_rate * h)
    bound = 0.5 * cell * (heights.shape[0] - 1)
    centre = origin + bound

    jpos = jrest.copy()
    targets = jrest.copy()
    rot = np.empty((n, 3, 3))
    trans = np.empty((n, 3))
    rj = np.empty((3, 3))
    corners = np.empty((nc, 3))
    centers = np.empty((n, 3))
    com_b = np.zeros(3)
    inertia = np.zeros((3, 3))
    inv_body = np.zeros((3, 3))
    tmp = np.zeros((3, 3))
    inv_world = np.zeros((3, 3))
    rmat = np.zeros((3, 3))
    rel = np.empty((nc, 3))
    rel_prev = np.empty((nc, 3))

    _shape(parent, rest, jtype, jaxis, jslot, jpos, half, signs, rot, trans, rj, corners, centers)
    _mass_properties(centers, mass, size, com_b, inertia)
    for k in range(nc):
        for a in range(3):
            rel[k, a] = corners[k, a] - com_b[a]
            rel_prev[k, a] = rel[k, a]

    # spawn: lowest corner spawn_gap above the terrain beneath it
    lift = -1e9
    for k in range(nc):
        ground = 0.0 if plain else sample_height(heights, origin, cell, corners[k, 0], corners[k, 1])
        lift = max(lift, ground - corners[k, 2])
    com = com_b.copy()
    com[2] += lift + spawn_gap
    vel = np.zeros(3)
    ang_mom = np.zeros(3)
    quat = np.array([1.0, 0.0, 0.0, 0.0])
    ox = oy = oz = 0.0

    nsamples = ticks // sample_every + 1
    samples = np.zeros((nsamples, 2))
    energy = np.zeros(ticks)
    count = 0
    oob = 0
    clamps = 0
    unstable = False
    max_pen = 0.0
    pose = np.zeros(3)
    x_state = cx.copy()
    y_state = cy.copy()

    for tick in range(-settle_ticks, ticks + 1):
        if tick >= 0 and tick % sample_every == 0:
            _quat_to_matrix(quat, rmat)
            bx, by, bz = _mv(rmat, com_b[0], com_b[1], com_b[2])
            if tick == 0:
                pose[0] = com[0] - bx
                pose[1] = com[1] - by
                pose[2] = math.atan2(rmat[1, 0], rmat[0, 0])
            samples[count, 0] = com[0] - bx
            samples[count, 1] = com[1] - by
            count += 1
        if tick == ticks:
            break
        if tick >= 0 and x_state.shape[0] > 0:
            nx, ny = controller.advance(x_state, y_state, comega, cweights, dt)
            for j in range(nx.shape[0]):
                if nx[j] > state_limit or nx[j] < -state_limit:
                    clamps += 1
                    nx[j] = min(max(nx[j], -state_limit), state_limit)
                if ny[j] > state_limit or ny[j] < -state_limit:
                    clamps += 1
                    ny[j] = min(max(ny[j], -state_limit), state_limit)
                out = math.tanh(cgain * nx[j])
                if clinear[j]:
                    targets[j] = 0.5 * (out + 1.0) * stroke
                else:
                    targets[j] = out * hinge_range
            x_state = nx
            y_state = ny

        for _ in range(substeps):
            for j in range(jpos.shape[0]):
                jpos[j] += lag * (targets[j] - jpos[j])
            _shape(parent, rest, jtype, jaxis, jslot, jpos, half, signs, rot, trans, rj,
                   corners, centers)
            _mass_properties(centers, mass, size, com_b, inertia)
            for k in range(nc):
                for a in range(3):
                    rel[k, a] = corners[k, a] - com_b[a]
            _quat_to_matrix(quat, rmat)
            _inverse(inertia, inv_body)
            _mm(rmat, inv_body, tmp)
            for a in range(3):
                for b in range(3):
                    inv_world[a, b] = tmp[a, 0] * rmat[b, 0] + tmp[a, 1] * rmat[b, 1] + tmp[a, 2] * rmat[b, 2]
            ox, oy, oz = _mv(inv_world, ang_mom[0], ang_mom[1], ang_mom[2])

            fx, fy, fz = 0.0, 0.0, -gravity * total_mass
            tx_, ty_, tz_ = 0.0, 0.0, 0.0
            for k in range(nc):
                ax, ay, az = _mv(rmat, rel[k, 0], rel[k, 1], rel[k, 2])
                pz = com[2] + az
                if pz > hmax:
                    continue
                px = com[0] + ax
                py = com[1] + ay
                if plain:
                    ground = 0.0
                    nx_, ny_, nz_ = 0.0, 0.0, 1.0
                else:
                    ground = sample_height(heights, origin, cell, px, py)
                    nx_, ny_, nz_ = 0.0, 0.0, 1.0
                pen = ground - pz
                if pen <= 0.0:
                    continue
                if not plain:
                    nx_, ny_, nz_ = sample_normal(heights, origin, cell, px, py)
                if abs(px - centre) > bound or abs(py - centre) > bound:
                    oob += 1
                if tick >= 0 and pen > max_pen:
                    max_pen = pen
                sx, sy, sz = _mv(rmat, (rel[k, 0] - rel_prev[k, 0]) / h,
                                 (rel[k, 1] - rel_prev[k, 1]) / h, (rel[k, 2] - rel_prev[k, 2]) / h)
                vx = vel[0] + oy * az - oz * ay + sx
                vy = vel[1] + oz * ax - ox * az + sy
                vz = vel[2] + ox * ay - oy * ax + sz
                vn = vx * nx_ + vy * ny_ + vz * nz_
                fn = k_c * pen * nz_ - c_c * vn
                if fn <= 0.0:
                    continue
                wx = vx - vn * nx_
                wy = vy - vn * ny_
                wz = vz - vn * nz_
                tmag = math.sqrt(wx * wx + wy * wy + wz * wz)
                scale = mu * fn / max(tmag, slip)
                gx = fn * nx_ - scale * wx
                gy = fn * ny_ - scale * wy
                gz = fn * nz_ - scale * wz
                fx += gx
                fy += gy
                fz += gz
                tx_ += ay * gz - az * gy
                ty_ += az * gx - ax * gz
                tz_ += ax * gy - ay * gx
            for k in range(nc):
                for a in range(3):
                    rel_prev[k, a] = rel[k, a]

            vel[0] += h * fx / total_mass
            vel[1] += h * fy / total_mass
            vel[2] += h * fz / total_mass
            ang_mom[0] += h * tx_
            ang_mom[1] += h * ty_
            ang_mom[2] += h * tz_
            ox, oy, oz = _mv(inv_world, ang_mom[0], ang_mom[1], ang_mom[2])
            for a in range(3):
                com[a] += h * vel[a]
            _integrate_quat(quat, ox, oy, oz, h)

            speed = math.sqrt(vel[0] ** 2 + vel[1] ** 2 + vel[2] ** 2)
            spin = math.sqrt(ox * ox + oy * oy + oz * oz)
            if not (speed + spin * size * n < max_speed):
                unstable = True
                break
        if unstable:
            break
        if tick >= 0:
            energy[tick] = 0.5 * total_mass * (vel[0] ** 2 + vel[1] ** 2 + vel[2] ** 2) \
                + 0.5 * (ox * ang_mom[0] + oy * ang_mom[1] + oz * ang_mom[2])

    if unstable:
        count = 0
    return samples, count, pose, oob, clamps, unstable, max_pen, energy
