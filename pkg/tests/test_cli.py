import json
from pathlib import Path

import pytest

from vnfchain.cli import (
    EXIT_CONFIG,
    EXIT_GUARD,
    EXIT_OK,
    EXIT_SOLVER,
    fmt,
    main,
    parse_grid,
    read_csv,
    write_csv,
)
from vnfchain.config import load_config
from vnfchain.pipeline import analyze

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """\
topology = "one_bs"
p = {p}
alpha = 0.5
mu = [0.5, 0.5, 0.5, 0.5, 0.5, 0.9]
m = [2, 2, 2, 2, 2, 2]
"""

TWO_BS = """\
topology = "two_bs"
p = [0.5, 0.4]
alpha = [0.5, 0.5]
mu = [0.5, 0.5, 0.5, 0.5, 0.5, 0.6, 0.5, 0.5, 0.5, 0.5, 0.5]
m = [5, 5, 5, 5, 5, 10, 5, 5, 5, 5, 5]
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL.format(p=0.8))
    return path


def test_grid_parsing():
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.1, 0.3") == [0.1, 0.3]
    with pytest.raises(ValueError):
        parse_grid("0:1:0")
    with pytest.raises(ValueError):
        parse_grid("a,b")


def test_csv_round_trip(tmp_path):
    rows = [["Q1", 0.1234567890123456, 3, None, True], ["system", 1e-17, -2, 2.5, False]]
    path = tmp_path / "x.csv"
    write_csv(path, ["name", "a", "b", "c", "d"], rows)
    back = read_csv(path)
    assert [r["name"] for r in back] == ["Q1", "system"]
    assert back[0]["a"] == float(fmt(rows[0][1])) and back[1]["a"] == 1e-17
    assert back[0]["b"] == 3 and back[0]["c"] is None and back[0]["d"] is True
    write_csv(tmp_path / "y.csv", ["name", "a", "b", "c", "d"], [list(r.values()) for r in back])
    assert (tmp_path / "y.csv").read_text() == path.read_text()


def test_analyze_one_bs(small, tmp_path):
    out = tmp_path / "a.csv"
    assert main(["analyze", "--config", str(small), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 7 and rows[-1]["queue"] == "system"
    manifest = json.loads(out.with_name("a.csv.manifest.json").read_text())
    assert str(out) in manifest["outputs"] and manifest["subcommand"] == "analyze"


def test_analyze_two_bs(tmp_path):
    cfg = tmp_path / "two.toml"
    cfg.write_text(TWO_BS)
    out = tmp_path / "b.csv"
    assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert len(read_csv(out)) == 12


def test_analyze_matches_library(tmp_path):
    out = tmp_path / "fig3.csv"
    cfg = CONFIGS / "fig3.toml"
    assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    row = read_csv(out)[-1]
    assert row["throughput"] == float(fmt(analyze(load_config(cfg)).system_throughput))


def test_analyze_state_sidecars(small, tmp_path):
    out, states = tmp_path / "a.csv", tmp_path / "states"
    assert main(["analyze", "--config", str(small), "--out", str(out), "--states", str(states)]) == 0
    core = read_csv(states / "core.csv")
    assert sum(r["probability"] for r in core) == pytest.approx(1.0, abs=1e-9)


def test_simulate_is_deterministic(small, tmp_path):
    outs = [tmp_path / f"s{k}.csv" for k in range(2)]
    for out in outs:
        assert main(["simulate", "--config", str(small), "--out", str(out),
                     "--slots", "20000", "--seed", "3"]) == EXIT_OK
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert (tmp_path / "s0.counts.csv").read_bytes() == (tmp_path / "s1.counts.csv").read_bytes()


def test_simulate_without_traffic(tmp_path):
    cfg = tmp_path / "idle.toml"
    cfg.write_text(SMALL.format(p=0.0))
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--slots", "5000"]) == 0
    counts = {r["name"]: r["value"] for r in read_csv(tmp_path / "s.counts.csv")}
    assert counts["generated"] == counts["delivered"] == counts["dropped"] == 0


def test_simulate_fig3_throughput(tmp_path):
    cfg = CONFIGS / "fig3.toml"
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--slots", "1000000"]) == 0
    sim = read_csv(out)[-1]["throughput"]
    assert abs(sim - analyze(load_config(cfg)).system_throughput) <= 1e-2


def test_sweep_rows(small, tmp_path):
    out = tmp_path / "w.csv"
    assert main(["sweep", "--config", str(small), "--out", str(out), "--grid", "0.2,0.8",
                 "--objective", "drop"]) == EXIT_OK
    rows = read_csv(out)
    assert [r["value"] for r in rows] == [0.2, 0.8]
    assert rows[0]["objective"] == rows[0]["drop_rate"]


def test_sweep_sim_evaluator(small, tmp_path):
    out = tmp_path / "w.csv"
    assert main(["sweep", "--config", str(small), "--out", str(out), "--grid", "0.5",
                 "--evaluator", "sim", "--slots", "10000", "--seed", "4"]) == EXIT_OK
    assert read_csv(out)[0]["seed"] == 4


def test_region_rows(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["region", "--config", str(CONFIGS / "fig8.toml"), "--out", str(out),
                 "--mu-grid", "0.3:0.9:0.3", "--m-grid", "5,10"]) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 6 and {r["M"] for r in rows} == {5, 10}
    assert out.read_text().splitlines()[0] == "mu,M,throughput,delay,drop_rate"


def test_validate_small(small, tmp_path):
    out = tmp_path / "v.csv"
    assert main(["validate", "--config", str(small), "--out", str(out),
                 "--slots", "200000", "--quiet"]) == EXIT_OK
    rows = {r["kpi"]: r for r in read_csv(out)}
    assert "joint_occupancy_tv" in rows
    assert rows["system_throughput"]["exact"] is not None


def test_validate_without_traffic(tmp_path):
    cfg = tmp_path / "idle.toml"
    cfg.write_text(SMALL.format(p=0.0))
    out = tmp_path / "v.csv"
    assert main(["validate", "--config", str(cfg), "--out", str(out), "--slots", "5000", "--quiet"]) == 0
    for r in read_csv(out):
        if r["kpi"] != "joint_occupancy_tv" and not r["kpi"].endswith(".delay"):
            assert r["analytic"] == r["simulated"] == r["exact"] == 0


def test_validate_guard_skips_oracle(small, tmp_path):
    out = tmp_path / "v.csv"
    assert main(["validate", "--config", str(small), "--out", str(out), "--buffers", "20",
                 "--slots", "20000", "--quiet"]) == EXIT_OK
    rows = read_csv(out)
    assert all(r["exact"] is None and r["gate"] == "oracle skipped" for r in rows)
    assert all(r["simulated"] is not None for r in rows)


def test_exit_codes(small, tmp_path, monkeypatch):
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL.format(p=0.5) + "colour = 1\n")
    out = str(tmp_path / "o.csv")
    assert main(["analyze", "--config", str(bad), "--out", out]) == EXIT_CONFIG
    assert main(["analyze", "--config", str(tmp_path / "missing.toml"), "--out", out]) == EXIT_CONFIG

    import vnfchain.cli as cli
    from vnfchain.markov import SolverError
    from vnfchain.oracle import StateSpaceGuardError

    def raise_(exc):
        def f(*_a, **_k):
            raise exc
        return f

    monkeypatch.setattr(cli, "analyze", raise_(SolverError("subsystem Q6: singular")))
    assert main(["analyze", "--config", str(small), "--out", out]) == EXIT_SOLVER
    monkeypatch.setattr(cli, "analyze", raise_(StateSpaceGuardError("too big")))
    assert main(["analyze", "--config", str(small), "--out", out]) == EXIT_GUARD
