from __future__ import annotations

import json
from pathlib import Path

import pytest

from cdcircuits.cli import main
from cdcircuits.errors import ValidationError
from cdcircuits.experiments import (
    ExperimentConfig,
    ResultLog,
    interior_minimum,
    load_config,
    read_csv,
    run_experiment,
    write_csv,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _tiny(experiment, **kw):
    base = dict(experiment=experiment, N=4, T=0.3, S=20.0, chi=[2], Q=[5], agp_sweeps=2, trotter_T=[0.5, 1.0])
    base.update(kw)
    return ExperimentConfig(**base).validate()


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.hash() == load_config(path).hash()


def test_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig("nope", 4).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig("gap-traversal", 4, S=10).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig("gap-traversal", 4, T=1, S=10, M=2, L=4, R=4).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig("combinatorial", 4, T=1, S=10).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig("agp-sweep", 4, chi=[0]).validate()


def test_unknown_and_missing_keys(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('experiment = "agp-sweep"\nN = 4\nbogus = 1\n')
    with pytest.raises(ValidationError):
        load_config(p)
    p.write_text('experiment = "agp-sweep"\n')
    with pytest.raises(ValidationError):
        load_config(p)


def test_hash_ignores_output_location():
    a = _tiny("agp-sweep")
    b = _tiny("agp-sweep", out="elsewhere", threads=3)
    assert a.hash() == b.hash()
    assert a.hash() != _tiny("agp-sweep", seed=8).hash()


def test_result_log_rejects_duplicates(tmp_path):
    log = ResultLog("abc")
    log.append("fid", 0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        log.append("fid", 0, 0.1, 0.1, 0.9)
    rows = read_csv(log.write(tmp_path / "r.csv"))
    assert rows == [{"metric": "fid", "slice": "0", "t": "0", "lambda": "0", "value": "1", "config_hash": "abc"}]


def test_csv_formatting(tmp_path):
    p = write_csv(tmp_path / "x.csv", ["a", "b", "c"], [{"a": 1, "b": 1 / 3, "c": True}])
    assert p.read_text() == "a,b,c\n1,0.333333333333,true\n"


def test_interior_minimum():
    assert interior_minimum([3, 1, 2])
    assert not interior_minimum([3, 2, 1])
    assert not interior_minimum([1, 2])
    assert not interior_minimum([1, 1, 1])


def _bytes(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}


@pytest.mark.parametrize(
    "cfg",
    [
        _tiny("agp-sweep", chi=[1, 2], eta=[1e-6, 1e-3], orders=[1, 2]),
        _tiny("nc-bond-profile", orders=[1, 2]),
        _tiny("gap-scan", gstar=0.48, points=5),
        _tiny("gap-traversal", gstar=0.48, M=2, L=1, R=2, orders=[1]),
        _tiny("critical-prep", T=1.0, S=4.0, style="sequential", propagator="trotter2", rho_mode="pure-state", Q=[2, 4]),
        _tiny("combinatorial", T=0.2, seeds=[1], M=2, L=1, R=2),
    ],
    ids=lambda c: c.experiment,
)
def test_recipes_are_deterministic(tmp_path, cfg):
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b", plots=False)
    assert _bytes(a) == _bytes(b)
    man = json.loads((a / "manifest.json").read_text())
    assert man["config_hash"] == cfg.hash()
    assert man["tables"] and set(man["versions"]) >= {"numpy", "scipy", "cdcircuits"}
    for name in man["plots"]:
        assert (a / name).read_text().startswith("<svg")


def test_cli_subcommands(tmp_path, capsys):
    out = tmp_path / "nc"
    assert main(["nc-profile", "--config", str(CONFIGS / "fig4_nc_profile.toml"), "--set", "N=4", "--set", "orders=[1]", "--out", str(out)]) == 0
    assert (out / "nc_bonds.csv").exists()
    assert main(["report", str(out)]) == 0
    assert "nc-bond-profile" in capsys.readouterr().out

    gt = tmp_path / "gt"
    common = ["--config", str(CONFIGS / "fig6_gap_traversal_n7.toml"), "--set", "N=4", "--set", "chi=[2]", "--set", "Q=[3]",
              "--set", "S=20.0", "--set", "gstar=0.48", "--set", "orders=[1]", "--set", "trotter_T=[0.5]", "--out", str(gt)]
    assert main(["compress", *common, "--no-plots"]) == 0
    assert main(["trotter-scan", *common]) == 0
    assert len(read_csv(gt / "trotter_scan.csv")) == 1
    assert main(["evaluate", *common, "--run", str(gt / "cd_chi2.json")]) == 0
    rows = read_csv(gt / "cd_chi2_evaluate.csv")
    cd = read_csv(gt / "cd_chi2_trace.csv")
    assert float(rows[-1]["fid_target"]) == pytest.approx(float(cd[-1]["fid_target"]), abs=1e-9)


def test_cli_errors(tmp_path, capsys):
    assert main(["compress", "--config", str(CONFIGS / "fig3_agp_sweep.toml"), "--out", str(tmp_path)]) == 1
    assert main(["agp-sweep", "--config", str(tmp_path / "missing.toml")]) == 2
    assert "error:" in capsys.readouterr().err
