import csv
import json

import pytest
import tomli
import tomli_w
from click.testing import CliRunner

from dynstc.cli import main
from dynstc.config import dump_config, read_config, write_config
from dynstc.errors import ConfigError


@pytest.fixture(scope="module")
def config_file(cfg, tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "family.toml"
    write_config(path, cfg)
    return path


def _rewrite(src, dst, edit):
    doc = tomli.loads(src.read_text())
    edit(doc)
    dst.write_text(tomli_w.dumps(doc))
    return dst


def _header_tmax(line):
    return float(line.split()[1].split("=")[1])


def test_round_trip(cfg, config_file):
    loaded = read_config(config_file)
    assert loaded.trigger.same_as(cfg)
    assert loaded.plant_name == "example_scalar"
    assert dump_config(loaded.trigger) == dump_config(cfg)


def test_stored_tmax_mismatch(config_file, tmp_path):
    def nudge(doc):
        doc["set"][1]["tmax"] *= 1.01
    bad = _rewrite(config_file, tmp_path / "bad.toml", nudge)
    with pytest.raises(ConfigError):
        read_config(bad)
    assert read_config(bad, check_stored=False).trigger.n_sets > 1


@pytest.mark.parametrize("edit", [
    lambda d: d.update({"lambda": 2.0}),
    lambda d: d.update({"m": 0}),
    lambda d: d.pop("c_x"),
    lambda d: d.update({"set": []}),
    lambda d: d.update({"plant": "missing"}),
    lambda d: d["set"][0].update({"gamma0": "abc"}),
])
def test_bad_configs(config_file, tmp_path, edit):
    bad = _rewrite(config_file, tmp_path / "bad.toml", edit)
    with pytest.raises(ConfigError):
        read_config(bad)


def test_unreadable_config(tmp_path):
    p = tmp_path / "x.toml"
    p.write_text("not = [valid")
    with pytest.raises(ConfigError):
        read_config(p)


def test_cli_simulate_writes_outputs(config_file, tmp_path):
    prefix = tmp_path / "run"
    res = CliRunner().invoke(main, ["simulate", "--config", str(config_file), "--x0", "0.1",
                                    "--horizon", "0.2", "--out", str(prefix)])
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "run_summary.json").read_text())
    assert summary["violations"] == 0 and summary["samples"] > 1
    with open(tmp_path / "run_events.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["kind"] for r in rows} == {"sample", "update"}
    assert (tmp_path / "run_trace.csv").read_text().startswith("# j counts")


def test_cli_strict_out_of_region(config_file, tmp_path):
    res = CliRunner().invoke(main, ["simulate", "--config", str(config_file), "--x0", "2",
                                    "--horizon", "0.1", "--strict", "--out",
                                    str(tmp_path / "s")])
    assert res.exit_code == 3


def test_cli_bad_config_exit(config_file, tmp_path):
    bad = _rewrite(config_file, tmp_path / "bad.toml", lambda d: d.update({"lambda": 2.0}))
    res = CliRunner().invoke(main, ["simulate", "--config", str(bad), "--x0", "0.1",
                                    "--out", str(tmp_path / "b")])
    assert res.exit_code == 2
    res = CliRunner().invoke(main, ["simulate", "--config", str(config_file), "--delay", "junk",
                                    "--out", str(tmp_path / "b")])
    assert res.exit_code == 2


def test_cli_validate(config_file, tmp_path):
    res = CliRunner().invoke(main, ["validate", "--config", str(config_file)])
    assert res.exit_code == 0 and "violations: 0" in res.output

    def weaken(doc):
        for t in doc["set"][1:]:
            t["gamma0"] *= 0.5
            t["gamma1"] *= 0.5
            t.pop("tmax")
    weak = _rewrite(config_file, tmp_path / "weak.toml", weaken)
    res = CliRunner().invoke(main, ["validate", "--config", str(weak)])
    assert res.exit_code == 4


def test_cli_tmax_toy(tmp_path):
    out = tmp_path / "phi.csv"
    args = ["tmax", "--eps", "0", "--l0", "1", "--l1", "1", "--gamma0", "1", "--gamma1", "1",
            "--phi0", "2", "--phi1", "2", "--lambda", "0.5", "--c-u", "2", "--tau-mad", "0.1",
            "--out", str(out)]
    res = CliRunner().invoke(main, args)
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# t_max=")
    assert _header_tmax(lines[0]) == pytest.approx(1 / 3, abs=1e-8)
    assert lines[0].endswith("capped=False")
    assert lines[1] == "tau,phi0,phi1"


def test_cli_tmax_from_config(config_file, cfg):
    res = CliRunner().invoke(main, ["tmax", "--config", str(config_file), "--set", "1"])
    assert res.exit_code == 0
    assert _header_tmax(res.stdout.splitlines()[0]) == pytest.approx(cfg.t_min, rel=1e-12)


def test_cli_compare_at_equilibrium(config_file):
    res = CliRunner().invoke(main, ["compare", "--config", str(config_file), "--x0", "0",
                                    "--horizon", "0.5"])
    assert res.exit_code == 0, res.output
    ratio = [ln for ln in res.output.splitlines() if ln.startswith("ratio")][0]
    assert float(ratio.split(":")[1]) < 0.25


def test_cli_paramgen(tmp_path):
    out = tmp_path / "fam.toml"
    res = CliRunner().invoke(main, ["paramgen", "--out", str(out), "--eps", "0.01,-1,-10",
                                    "--grid", "60"])
    assert res.exit_code == 0, res.output
    assert read_config(out).trigger.n_sets == 3
    res = CliRunner().invoke(main, ["paramgen", "--out", str(out), "--eps", "0.02"])
    assert res.exit_code == 2
