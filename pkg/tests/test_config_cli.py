"""Config schema, pipeline orchestration, and the command line."""

import csv
import io
import json
import math
import os

import pytest

from nilfpp import cli
from nilfpp.config import ExperimentConfig
from nilfpp.errors import CertificationError, NilfppError
from nilfpp.runner import execute, load_manifest, manifest_bytes, run

LINF = {"type": "lp", "p": "inf"}


def _base(**over):
    obj = {
        "schema": 1,
        "group": "zd:2",
        "norm": dict(LINF),
        "schedule": [2, 4],
        "directions": [[1, 0], [0, 1]],
        "seed": 7,
        "n_max": 4,
        "target_radius": 5,
        "search_radius": 8,
        "n_seeds": 2,
    }
    obj.update(over)
    return obj


def test_config_round_trip_and_hash():
    cfg = ExperimentConfig.from_json(_base(output_dir="a"))
    again = ExperimentConfig.from_json(cfg.to_json())
    assert cfg.canonical_json() == again.canonical_json()
    assert cfg.config_hash() == again.config_hash()
    other = ExperimentConfig.from_json(_base(output_dir="b"))
    assert cfg.config_hash() == other.config_hash()  # output dir excluded
    changed = ExperimentConfig.from_json(_base(seed=8, output_dir="a"))
    assert cfg.config_hash() != changed.config_hash()


@pytest.mark.parametrize("patch", [
    {"schema": 2},
    {"surprise": 1},
    {"seed": -1},
    {"seed": True},
    {"n_max": 0},
    {"n_seeds": 0},
    {"search_radius": 3},                  # below target radius
    {"schedule": []},
    {"schedule": [0]},
    {"schedule": [2.5]},
    {"directions": [[0, 0]]},
    {"directions": [[1, 0, 0]]},           # dimension mismatch
    {"mode": "fancy"},
    {"oracle": "bogus"},
    {"group": "zd:9000"},
    {"norm": {"type": "lp", "p": 0.5}},
    {"symmetry_targets": [[9, 9]]},        # outside target radius
    {"symmetry_targets": [[1.5, 0]]},
    {"schedule": [64]},                    # reach 64 exceeds target radius
])
def test_config_validation_rejects(patch):
    with pytest.raises(NilfppError):
        ExperimentConfig.from_json(_base(**patch))


def test_direction_reach_uses_rounded_targets():
    # reach counts |round(t*v)|_1, so fractional components round first
    D = 1 / math.sqrt(2)
    ok = _base(directions=[[D, D]], schedule=[7], target_radius=10,
               search_radius=10)
    ExperimentConfig.from_json(ok)  # round(7D) = 5 per axis, reach 10
    bad = _base(directions=[[D, D]], schedule=[8], target_radius=10,
                search_radius=10)
    with pytest.raises(NilfppError):
        ExperimentConfig.from_json(bad)


def test_direction_fan_resolution():
    cfg = ExperimentConfig.from_json(_base(directions=4, schedule=[2],
                                           target_radius=3))
    spec = cfg.norm_spec(2)
    dirs = cfg.resolve_directions(spec)
    assert len(dirs) == 4
    assert dirs[0] == pytest.approx((1.0, 0.0))
    assert dirs[1] == pytest.approx((0.0, 1.0))


def test_radius_invariant_gate():
    cfg = ExperimentConfig.from_json(_base())
    assert cfg.check_radius_invariant(5.0, 0.1, "simple") is None
    with pytest.raises(NilfppError):
        cfg.check_radius_invariant(5.0, 0.1, "general")  # needs radius 250
    loose = ExperimentConfig.from_json(_base(allow_stale=True))
    note = loose.check_radius_invariant(5.0, 0.1, "general")
    assert note is not None and "stale" in note


def test_execute_manifest_only():
    cfg = ExperimentConfig.from_json(_base(search_radius=0, target_radius=0,
                                           schedule=[1], directions=[[1, 0]]))
    result = execute(cfg)
    assert result.manifest["region"] == {"radius": 0, "vertices": 1, "edges": 0}
    assert result.artifacts == {}
    assert result.manifest["constants"]["K"] == pytest.approx(1 + 4 * math.sqrt(2))


def test_execute_produces_consistent_artifacts(tmp_path):
    cfg = ExperimentConfig.from_json(_base(emit_weights=True,
                                           symmetry_targets=[]))
    a = execute(cfg)
    b = execute(cfg, chunk=3)
    assert set(a.artifacts) == set(b.artifacts)
    for name in a.artifacts:
        assert a.artifacts[name] == b.artifacts[name], name
    assert a.manifest["artifacts"] == b.manifest["artifacts"]
    assert "profiles.csv" in a.artifacts
    assert "shape_t2.svg" in a.artifacts and "shape_t4.svg" in a.artifacts
    assert a.manifest["audits_passed"]

    # emission writes every artifact plus the manifest
    out = tmp_path / "run"
    paths = run(cfg, out_dir=str(out))
    files = {p.name for p in out.iterdir()}
    assert "manifest.json" in files and "weights.csv" in files

    loaded = load_manifest(str(out / "manifest.json"))
    assert loaded["config_hash"] == cfg.config_hash()


def test_weights_csv_schema(tmp_path):
    cfg = ExperimentConfig.from_json(_base(search_radius=4, target_radius=3,
                                           schedule=[2], emit_weights=True))
    result = execute(cfg)
    rows = list(csv.reader(io.StringIO(result.artifacts["weights.csv"].decode())))
    assert rows[0] == ["from", "to", "label", "weight", "winner_level"]
    body = rows[1:]
    assert all(len(r) == 5 for r in body)
    assert len(body) == result.manifest["region"]["edges"]
    weights = [float(r[3]) for r in body]
    K = result.manifest["constants"]["K"]
    assert all(0 < w <= K for w in weights)


def test_load_manifest_revalidates(tmp_path):
    cfg = ExperimentConfig.from_json(_base(search_radius=0, target_radius=0,
                                           schedule=[1], directions=[[1, 0]]))
    result = execute(cfg)
    path = tmp_path / "manifest.json"
    obj = json.loads(manifest_bytes(result.manifest))
    obj["constants"]["K"] = 0.5  # breaks the simple-mode inequality
    path.write_bytes(json.dumps(obj).encode())
    with pytest.raises(CertificationError):
        load_manifest(str(path))


def _write_config(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_cli_check_accept_and_refuse(tmp_path, capsys):
    ok = _write_config(tmp_path, _base())
    assert cli.main(["check", ok]) == 0
    assert "accepted" in capsys.readouterr().out

    box = {"type": "polytope",
           "normals": [[0.5, 0], [-0.5, 0], [0, 1], [0, -1]]}
    bad = _write_config(tmp_path, _base(group="semidirect-zi", norm=box,
                                        mode="general", allow_stale=True),
                        name="bad.json")
    assert cli.main(["check", bad]) == 2
    out = capsys.readouterr().out
    assert "refused" in out and "witness" in out


def test_cli_usage_errors(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert cli.main(["check", missing]) == 1
    assert "cannot read config" in capsys.readouterr().err
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert cli.main(["check", str(broken)]) == 1
    unknown = _write_config(tmp_path, _base(surprise=1), name="unknown.json")
    assert cli.main(["run", unknown]) == 1
    capsys.readouterr()


def test_cli_argparse_errors_use_usage_exit(tmp_path, capsys):
    # argparse would exit 2 by default, which this tool reserves for refusal
    for argv in ([], ["frobnicate"], ["run"]):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == 1
    ok = _write_config(tmp_path, _base())
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", ok, "--seeds", "abc"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_cli_paths(tmp_path, capsys):
    p = _write_config(tmp_path, _base())
    assert cli.main(["paths", p]) == 0
    out = capsys.readouterr().out
    assert "certified 4 levels in simple mode" in out
    assert "K = " in out


def test_cli_run_and_overrides(tmp_path, capsys, monkeypatch):
    p = _write_config(tmp_path, _base(output_dir=str(tmp_path / "default")))
    env_dir = tmp_path / "via_env"
    monkeypatch.setenv(cli.OUTPUT_ENV, str(env_dir))
    assert cli.main(["run", p, "--seeds", "1", "--n-max", "3",
                     "--radius", "7"]) == 0
    capsys.readouterr()
    manifest = json.loads((env_dir / "manifest.json").read_text())
    assert manifest["config"]["n_seeds"] == 1
    assert manifest["config"]["n_max"] == 3
    assert manifest["region"]["radius"] == 7

    flag_dir = tmp_path / "via_flag"
    assert cli.main(["run", p, "--output-dir", str(flag_dir)]) == 0
    capsys.readouterr()
    assert (flag_dir / "manifest.json").exists()  # flag beats env


def test_cli_rerun_is_byte_identical(tmp_path, capsys):
    p = _write_config(tmp_path, _base())
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert cli.main(["profile", p, "--output-dir", str(out_a)]) == 0
    assert cli.main(["profile", p, "--output-dir", str(out_b),
                     "--chunk", "5"]) == 0
    capsys.readouterr()
    assert (out_a / "profiles.csv").read_bytes() == \
        (out_b / "profiles.csv").read_bytes()
    ma = json.loads((out_a / "manifest.json").read_text())
    mb = json.loads((out_b / "manifest.json").read_text())
    assert ma["artifacts"] == mb["artifacts"]
    assert ma["config_hash"] == mb["config_hash"]


def test_cli_simulate_and_audit(tmp_path, capsys):
    p = _write_config(tmp_path, _base())
    assert cli.main(["simulate", p]) == 0
    out = capsys.readouterr().out
    assert "T~ =" in out and "direction" in out
    assert cli.main(["audit", p, "--output-dir", str(tmp_path / "aud")]) == 0
    out = capsys.readouterr().out
    assert "audit membership: passed" in out
