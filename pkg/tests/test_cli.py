import json
import subprocess
import sys

import numpy as np
import pytest

from modevo import cli, documents, genome, morphology
from modevo.decoder import BRAIN_INPUTS
from modevo.genome import InnovationRegistry, minimal_cppn
from modevo.morphology import BodyGraph, node

from oracles import CORE_ONLY

FAST = {"sim": {"duration": 1.0, "settle_time": 0.5}}


def write_spec(path, **fields):
    doc = {"name": "t", "environment": {"kind": "plain"}, "linear_actuator_enabled": True,
           "evolution": FAST, "output": str(path.parent / "out")}
    doc.update(fields)
    documents.write(path, documents.dumps(doc, "experiment"))
    return str(path)


@pytest.fixture
def docs(tmp_path):
    morphology.save_body(BodyGraph(), tmp_path / "core.json")
    walker = BodyGraph(node("Core", s0=node("HingeHorizontal", s1=node("Brick"))))
    morphology.save_body(walker, tmp_path / "walker.json")
    brain = minimal_cppn(BRAIN_INPUTS, 1, InnovationRegistry(), np.random.default_rng(0))
    documents.write(tmp_path / "brain.json", genome.serialize(brain))
    return tmp_path


def test_bundled_specs():
    assert cli.bundled_specs() == ["experiment1_la.spec", "experiment1_nola.spec",
                                   "experiment2_rough.spec", "extension_rough_la.spec"]
    la = cli.read_spec("experiment1_la.spec").config()
    assert (la.runs, la.mu, la.lambda_, la.generations) == (20, 100, 50, 300)
    assert la.environment.kind == "plain" and la.linear_actuator_enabled
    rough = cli.read_spec("experiment2_rough.spec").config()
    assert rough.environment.kind == "rough" and not rough.linear_actuator_enabled
    ext = cli.read_spec("extension_rough_la.spec").config()
    assert ext.environment.kind == "rough" and ext.linear_actuator_enabled


def test_evolve_smoke(tmp_path, capsys):
    spec = write_spec(tmp_path / "t.spec")
    assert cli.main(["evolve", spec, "--smoke", "--out", str(tmp_path / "o")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert sum(line.startswith("run ") for line in lines) == 2 * 6
    assert sorted(p.name for p in (tmp_path / "o" / "runs").iterdir()) == ["run_00", "run_01"]


def test_evolve_resume_is_noop_when_done(tmp_path, capsys):
    spec = write_spec(tmp_path / "t.spec")
    out = str(tmp_path / "o")
    cli.main(["evolve", spec, "--smoke", "--out", out])
    capsys.readouterr()
    assert cli.main(["evolve", spec, "--smoke", "--out", out, "--resume"]) == 0
    assert "gen" not in capsys.readouterr().out


def test_invalid_spec_field(tmp_path, capsys):
    spec = write_spec(tmp_path / "t.spec", evolution={"mu": 10, "lamda": 5})
    assert cli.main(["evolve", spec]) == 1
    assert "lamda" in capsys.readouterr().err


def test_invalid_environment_field(tmp_path, capsys):
    spec = write_spec(tmp_path / "t.spec", environment={"kind": "rough", "hills": 3})
    assert cli.main(["evolve", spec]) == 1
    assert "hills" in capsys.readouterr().err


def test_unsafe_name(tmp_path, capsys):
    spec = write_spec(tmp_path / "t.spec", name="../escape")
    assert cli.main(["evolve", spec]) == 1
    assert "name" in capsys.readouterr().err


def test_missing_spec(capsys):
    assert cli.main(["evolve", "no_such.spec"]) == 1


def test_evaluate_core_only(docs, capsys):
    args = ["evaluate", str(docs / "core.json"), str(docs / "brain.json"), "--duration", "2"]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    header, values = out.splitlines()[:2]
    assert header == "fitness,distProjection,lengthTraj,delta,penalty"
    assert float(values.split(",")[0]) == 0.0
    assert "t,x,y" in out


def test_evaluate_repeatable(docs, capsys):
    args = ["evaluate", str(docs / "walker.json"), str(docs / "brain.json"), "--env", "rough",
            "--seed", "5", "--duration", "2"]
    cli.main(args)
    first = capsys.readouterr().out
    cli.main(args)
    assert capsys.readouterr().out == first


def test_evaluate_missing_file(docs, capsys):
    assert cli.main(["evaluate", str(docs / "nope.json"), str(docs / "brain.json")]) == 1


def test_evaluate_rejects_invalid_body(docs, capsys):
    bad = BodyGraph(node("Core", s0=node("Brick", s1=node("Brick", s1=node("Brick", s1=node("Brick"))))))
    (docs / "bad.json").write_text(morphology.serialize(bad))
    assert cli.main(["evaluate", str(docs / "bad.json"), str(docs / "brain.json")]) == 1
    assert "root/0/1/1/1" in capsys.readouterr().err


def test_descriptors_core_only(docs, capsys):
    assert cli.main(["descriptors", str(docs / "core.json"), "--format", "json"]) == 0
    vec = json.loads(capsys.readouterr().out)
    from modevo.descriptors import NAMES

    assert tuple(vec[n] for n in NAMES) == CORE_ONLY
    assert cli.main(["descriptors", str(docs / "core.json")]) == 0
    header, row = capsys.readouterr().out.splitlines()
    assert header.split(",")[:8] == list(NAMES)


def test_analyze_self(tmp_path, capsys):
    spec = write_spec(tmp_path / "t.spec")
    arm = tmp_path / "arm"
    cli.main(["evolve", spec, "--smoke", "--out", str(arm)])
    capsys.readouterr()
    assert cli.main(["analyze", str(arm), str(arm), "--out", str(tmp_path / "rep")]) == 0
    text = capsys.readouterr().out
    assert len(text.splitlines()) == 2 + 9 + 1
    assert (tmp_path / "rep" / "report.csv").exists()
    assert (tmp_path / "rep" / "progression_arm_la_count.csv").exists()


def test_analyze_missing_arm(tmp_path, capsys):
    assert cli.main(["analyze", str(tmp_path / "a"), str(tmp_path / "b")]) == 1


def test_internal_error_exit_code(monkeypatch, capsys, docs):
    def boom(_):
        raise RuntimeError("bug")

    monkeypatch.setattr(cli, "descriptor_vector", boom)
    assert cli.main(["descriptors", str(docs / "core.json")]) == 2


def test_help_documents_flags():
    out = subprocess.run([sys.executable, "-m", "modevo", "evolve", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for flag in ("--seed", "--workers", "--resume", "--smoke", "--out"):
        assert flag in out
    top = subprocess.run([sys.executable, "-m", "modevo", "--help"], capture_output=True, text=True).stdout
    for command in ("evolve", "evaluate", "descriptors", "analyze"):
        assert command in top
