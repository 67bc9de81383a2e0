import json

import pytest

from wavespec.cli import main
from wavespec.config import config_from_dict
from wavespec.output import read_csv
from wavespec.pipeline import StageError, run_pipeline

SMALL = """\
epsilon = 0.2
beta = 0.5
[grid]
Nx = 128
Nz = 16
[k]
nk = 16
[packet]
nk = 9
n_times = 16
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def run(args, tmp_path):
    return main(args + ["--out", str(tmp_path / "out"), "--cache", str(tmp_path / "cache")])


def test_wavepacket_run_writes_bundle(small_config, tmp_path, capsys):
    assert run(["wavepacket", "--config", str(small_config)], tmp_path) == 0
    out = tmp_path / "out"
    for name in ("profile.csv", "growth_curve.csv", "packet.csv", "spectrum.json", "validation.json"):
        assert (out / name).exists()
    report = json.loads((out / "validation.json").read_text())
    assert report["status"] == "complete" and report["passed"]
    assert "cache_dir" not in report["config"]
    meta, cols = read_csv(out / "growth_curve.csv")
    assert meta["config_digest"] == report["config_digest"]
    assert (cols["k"][1:] > cols["k"][:-1]).all()
    text = capsys.readouterr().out
    assert "PASS packet_sigma_fit" in text and "FAIL" not in text


def test_overrides_apply(small_config, tmp_path):
    assert run(["solitary", "--config", str(small_config), "--nx", "96"], tmp_path) == 0
    meta, cols = read_csv(tmp_path / "out" / "profile.csv")
    assert len(cols["x"]) == 96


def test_dno_check(small_config, tmp_path, capsys):
    assert run(["dno-check", "--config", str(small_config)], tmp_path) == 0
    extra = json.loads((tmp_path / "out" / "dno_check.json").read_text())
    names = {c["name"] for c in extra["checks"]}
    assert {"flat_dno_exact", "dno_symmetry", "dno_monotone_in_k", "multiplier_bound"} <= names
    assert "PASS flat_dno_exact" in capsys.readouterr().out


@pytest.mark.parametrize(
    "args, message",
    [
        (["--epsilon", "0"], "epsilon must be positive"),
        (["--beta", "0.3"], "beta must exceed 1/3"),
        (["--nx", "127"], "Nx must be even"),
        (["--config", "/nonexistent/run.toml"], "not found"),
    ],
)
def test_bad_input_exits_2(args, message, tmp_path, capsys):
    assert run(["solitary"] + args, tmp_path) == 2
    assert message in capsys.readouterr().err


def test_failed_stage_is_reported(tmp_path):
    cfg = config_from_dict(
        {"epsilon": 0.2, "beta": 0.5, "grid": {"Nx": 128, "Nz": 16}, "k": {"k_min": 1.0, "k_max": 3.0, "nk": 8}}
    )
    cfg.out_dir = str(tmp_path / "out")
    b = run_pipeline(cfg, use_cache=False, raise_on_error=False)
    assert b.failed_stage is not None and not b.passed
    report = json.loads((tmp_path / "out" / "validation.json").read_text())
    assert report["status"] == "incomplete" and report["failed_stage"] == b.failed_stage
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, use_cache=False)
    assert info.value.stage == b.failed_stage
