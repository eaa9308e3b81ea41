import numpy as np
import pytest

from edgereports.cli import main
from edgereports.figures import (
    plot_lambda_boxes,
    plot_latency_cdf,
    plot_policy_timeline,
    plot_success_over_time,
    regenerate_all,
)
from edgereports.tables import (
    SchemaError,
    classify,
    load_curve,
    load_run,
    load_switches,
    scan_directory,
)

APPS = ["pool", "ping-pong"]
POLICIES = ["closest", "load_balancing", "farthest", "cheaper",
            "rp_latency", "rp_load", "least_impedance", "agent"]


def write_run(path, policy="closest", seed=1, lam="15", n=30, level=0.8):
    rng = np.random.default_rng(seed + len(policy))
    header = "time_s,policy,q_success,q_fail,q_reject,offered_qps," + \
        ",".join(f"app_{a}_success" for a in APPS)
    lines = [f"# config=deadbeef seed={seed} lambda={lam}", header]
    for t in range(1, n + 1):
        qs = min(1.0, max(0.0, level + rng.normal(0, 0.05)))
        qf = (1 - qs) * 0.6
        qr = 1 - qs - qf
        apps = ",".join(repr(min(1.0, qs + 0.05)) for _ in APPS)
        lines.append(f"{float(t)!r},{policy},{qs!r},{qf!r},{qr!r},{100.0!r},{apps}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_switches(path, seed=1, n=12):
    rng = np.random.default_rng(seed)
    lines = [f"# config=deadbeef seed={seed}", "time_s,policy,latency_ms"]
    for i in range(n):
        pol = POLICIES[int(rng.integers(0, len(POLICIES) - 1))]
        lines.append(f"{float(25 * i)!r},{pol},{float(rng.uniform(0.5, 4.0))!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_curve(path, n=40):
    lines = ["# seed=0 episodes=40", "episode,return,mean_success,epsilon"]
    for e in range(n):
        lines.append(f"{e},{-1.0 + e * 0.01!r},{0.5 + e * 0.005!r},{max(0.05, 1 - e * 0.02)!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def populate(root, lams=("15",), seeds=(1, 2, 3)):
    for lam in lams:
        for pol in POLICIES:
            for seed in seeds:
                write_run(root / f"lam{lam}" / f"{pol}_seed{seed}.csv",
                          policy=pol, seed=seed, lam=lam,
                          level=0.6 + 0.03 * POLICIES.index(pol))
    write_switches(root / "switches_agent_seed1.csv", seed=1)
    write_curve(root / "learning_curve.csv")


class TestTables:
    def test_classify_and_load(self, tmp_path):
        run = write_run(tmp_path / "r.csv")
        sw = write_switches(tmp_path / "s.csv")
        cv = write_curve(tmp_path / "c.csv")
        assert classify(run) == "run"
        assert classify(sw) == "switch"
        assert classify(cv) == "curve"
        table = load_run(run)
        assert table.policy == "closest"
        assert table.seed == 1
        assert table.lam == "15"
        assert len(table.time_s) == 30
        assert set(table.app_success) == set(APPS)
        assert load_switches(sw).latency_ms.shape == (12,)
        assert load_curve(cv).episode.shape == (40,)

    def test_empty_run_rejected(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("# config=x seed=1\ntime_s,policy,q_success,q_fail,q_reject,offered_qps\n")
        with pytest.raises(SchemaError):
            load_run(p)

    def test_wrong_schema_rejected(self, tmp_path):
        p = tmp_path / "odd.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(SchemaError):
            load_run(p)
        assert classify(p) == "unknown"

    def test_scan_groups_artifacts(self, tmp_path):
        populate(tmp_path)
        arts = scan_directory(tmp_path)
        assert len(arts.runs) == len(POLICIES) * 3
        assert len(arts.switches) == 1
        assert len(arts.curves) == 1
        assert set(arts.runs_by_policy()) == set(POLICIES)


class TestFigures:
    def test_success_over_time_single_run(self, tmp_path):
        runs = [load_run(write_run(tmp_path / "r.csv"))]
        out = plot_success_over_time(runs, tmp_path / "fig.svg")
        assert out.exists() and out.stat().st_size > 0

    def test_success_over_time_eight_policies(self, tmp_path):
        populate(tmp_path)
        arts = scan_directory(tmp_path)
        out = plot_success_over_time(arts.runs, tmp_path / "fig.svg")
        assert out.exists()

    def test_empty_inputs_error(self, tmp_path):
        with pytest.raises(SchemaError):
            plot_success_over_time([], tmp_path / "fig.svg")
        with pytest.raises(SchemaError):
            plot_latency_cdf([], tmp_path / "fig.svg")

    def test_lambda_boxes_requires_lambda(self, tmp_path):
        run = load_run(write_run(tmp_path / "r.csv"))
        run.lam = None
        with pytest.raises(SchemaError):
            plot_lambda_boxes([run], tmp_path / "fig.svg")

    def test_lambda_boxes_multiple_lams(self, tmp_path):
        populate(tmp_path, lams=("20", "60", "100"), seeds=(1, 2))
        arts = scan_directory(tmp_path)
        out = plot_lambda_boxes(arts.runs, tmp_path / "boxes.svg")
        assert out.exists()

    def test_latency_cdf_reaches_one(self, tmp_path):
        sw = load_switches(write_switches(tmp_path / "s.csv"))
        out = plot_latency_cdf([sw], tmp_path / "cdf.svg")
        assert out.exists()

    def test_policy_timeline(self, tmp_path):
        sw = load_switches(write_switches(tmp_path / "s.csv"))
        assert plot_policy_timeline([sw], tmp_path / "tl.svg").exists()


class TestCliAndIdempotency:
    def test_cli_regenerates_figures(self, tmp_path):
        data = tmp_path / "data"
        populate(data)
        out = tmp_path / "figs"
        assert main(["--input", str(data), "--out", str(out)]) == 0
        names = sorted(p.name for p in out.glob("*.svg"))
        assert "success_over_time_lam15.svg" in names
        assert "success_boxes.svg" in names
        assert "latency_cdf.svg" in names
        assert "learning_curve.svg" in names

    def test_rerun_is_idempotent(self, tmp_path):
        data = tmp_path / "data"
        populate(data)
        out = tmp_path / "figs"
        assert main(["--input", str(data), "--out", str(out)]) == 0
        first = {p.name: p.read_bytes() for p in out.glob("*.svg")}
        assert main(["--input", str(data), "--out", str(out)]) == 0
        second = {p.name: p.read_bytes() for p in out.glob("*.svg")}
        assert first == second

    def test_missing_input_dir_fails(self, tmp_path):
        assert main(["--input", str(tmp_path / "nope"), "--out", str(tmp_path)]) != 0

    def test_no_artifacts_fails(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["--input", str(empty), "--out", str(tmp_path / "o")]) != 0
