import numpy as np
import pytest

from modevo import terrain
from modevo.controller import CpgConfig
from modevo.decoder import BRAIN_INPUTS, decode_brain
from modevo.genome import InnovationRegistry, minimal_cppn
from modevo.morphology import BodyGraph, ModuleKind, node
from modevo.simulation import (
    LA_STROKE,
    SimConfig,
    build_model,
    rest_joint_positions,
    simulate,
)

from conftest import random_decoded_body

PLAIN = terrain.plain()
ROUGH = terrain.rough(seed=42)
FIXTURE_SEEDS = [0, 1, 3, 4, 6, 7]


def robot(seed):
    body = random_decoded_body(seed)
    brain = minimal_cppn(BRAIN_INPUTS, 1, InnovationRegistry(), np.random.default_rng(seed))
    return body, decode_brain(brain, body)


def test_sample_count():
    traj = simulate(BodyGraph(), [], PLAIN)
    assert len(traj) == 301
    assert traj.times[-1] == pytest.approx(30.0)
    assert traj.to_csv().splitlines()[0] == "t,x,y"


def test_core_only_stays_put():
    traj = simulate(BodyGraph(), [], PLAIN)
    drift = np.hypot(*(traj.positions[-1] - traj.positions[0]))
    assert drift < 1e-3
    assert not traj.unstable


@pytest.mark.parametrize("seed", FIXTURE_SEEDS[:3])
def test_bit_identical_replay(seed):
    body, weights = robot(seed)
    assert simulate(body, weights, ROUGH) == simulate(body, weights, ROUGH)


@pytest.mark.parametrize("seed", FIXTURE_SEEDS)
def test_energy_decays_without_drive(seed):
    body, weights = robot(seed)
    traj = simulate(body, weights, PLAIN, cpg=CpgConfig(gain=0.0))
    assert len(traj.kinetic_energy) == SimConfig().ticks
    assert np.all(np.diff(traj.kinetic_energy) <= 1e-8)


@pytest.mark.parametrize("seed", FIXTURE_SEEDS)
@pytest.mark.parametrize("ground", ["plain", "rough"])
def test_no_tunnelling(seed, ground):
    body, weights = robot(seed)
    traj = simulate(body, weights, PLAIN if ground == "plain" else ROUGH)
    assert not traj.unstable
    assert traj.max_penetration < 0.02


def test_actuated_robot_moves():
    body = BodyGraph(node("Core", s0=node("HingeHorizontal", s1=node("Brick")),
                          s2=node("HingeHorizontal", s1=node("Brick"))))
    weights = [((0, 0), 0.0), ((0, 1), 0.5), ((1, 0), -0.5), ((1, 1), 0.0)]
    traj = simulate(body, weights, PLAIN, SimConfig(duration=5.0))
    assert np.hypot(*(traj.positions[-1] - traj.positions[0])) > 1e-3


def test_model_axes():
    body = BodyGraph(node("Core", s0=node("HingeHorizontal"), s1=node("HingeVertical"),
                          s2=node("LinearActuator")))
    model = build_model(body)
    assert model.joint_kinds == [ModuleKind.HINGE_HORIZONTAL, ModuleKind.HINGE_VERTICAL,
                                 ModuleKind.LINEAR_ACTUATOR]
    assert list(model.joint_axis[1]) == [0.0, 1.0, 0.0]   # east-facing hinge pitches about y
    assert list(model.joint_axis[2]) == [0.0, 0.0, 1.0]   # vertical hinge yaws
    assert list(model.joint_axis[3]) == [-1.0, 0.0, 0.0]  # west-facing actuator extends along -x
    assert list(rest_joint_positions(model)) == [0.0, 0.0, LA_STROKE / 2]


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0}, {"substeps": 0}, {"duration": 1.0023}, {"friction": -1.0},
])
def test_config_validated(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)
