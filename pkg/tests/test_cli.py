import json

from budgetmarch.cli import main

FAST = ["--n", "41", "--budget-counts", "41"]


def run_cli(args):
    return main(args)


def test_run_convergence_artifacts(tmp_path):
    out = tmp_path / "out"
    code = run_cli(["run", "convergence", "--out", str(out)] + FAST)
    assert code == 0
    base = out / "convergence"
    manifest = json.loads((base / "manifest.json").read_text())
    for key in ("grid_n", "h", "budget_bounds", "budget_counts",
                "budget_deltas", "hat_h", "march", "smoothing", "start",
                "timings", "heatmap_bounds", "domain_reduction", "workers"):
        assert key in manifest, key
    assert manifest["march"]["algorithm"] == 1
    assert manifest["march"]["golden_tolerance"] == 1e-6
    for name in ("u_0.csv", "u_1.csv", "v_01.csv", "v_10.csv", "u_0.pgm",
                 "u_0.png", "front.csv", "front.png", "mfl_level.csv",
                 "trajectories.png", "manifest.json"):
        assert (base / name).exists(), name


def test_run_deterministic_csv(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli(["run", "convergence", "--out", str(out1)] + FAST) == 0
    assert run_cli(["run", "convergence", "--out", str(out2)] + FAST) == 0
    for rel in ("u_0.csv", "v_01.csv", "front.csv", "mfl_level.csv"):
        a = (out1 / "convergence" / rel).read_bytes()
        b = (out2 / "convergence" / rel).read_bytes()
        assert a == b, rel


def test_trace_command(tmp_path):
    code = run_cli(["trace", "convergence", "--out", str(tmp_path),
                    "--start", "0.25,0.5", "--budget", "0.5"] + FAST)
    assert code == 0
    files = list((tmp_path / "convergence").glob("trace_*.csv"))
    assert files
    header = files[0].read_text().splitlines()[0]
    assert header == "x,y,b1,J0"


def test_compare_fronts_command(tmp_path):
    code = run_cli(["compare-fronts", "convergence", "--out", str(tmp_path),
                    "--start", "0.25,0.5", "--lambdas", "3"] + FAST)
    assert code == 0
    csv = (tmp_path / "convergence" / "fronts_compare.csv").read_text()
    assert "weighted-sum" in csv and "augmented" in csv
    assert csv.splitlines()[0] == "J0,b1,tight,source"


def test_convergence_table_command(tmp_path):
    code = run_cli(["convergence-table", "--hs", "1/40", "--dbs", "1/10",
                    "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "convergence_table.csv").read_text().splitlines()
    assert lines[0] == "h,db1,l1_error,linf_error,seconds"
    assert len(lines) == 2


def test_visibility_command(tmp_path):
    code = run_cli(["visibility", "avoid-observer", "--out", str(tmp_path),
                    "--n", "101", "--oracle"])
    assert code == 0
    assert (tmp_path / "avoid-observer" / "visibility_0.pgm").exists()
    assert (tmp_path / "avoid-observer" / "visibility_0.csv").exists()


def test_unknown_scenario_exit_code(tmp_path):
    assert run_cli(["run", "no-such-scenario", "--out", str(tmp_path)]) == 2


def test_invalid_problem_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("""
[scenario]
name = "bad"
start = [0.1, 0.1]
[grid]
n = 21
[budgets]
bounds = [1.0]
counts = [11]
[speed]
kind = "constant"
value = 1.0
[[cost]]
kind = "constant"
rate = 1.0
[[cost]]
kind = "constant"
rate = 0.0
[[terminal]]
point = [1.0, 1.0]
values = [0.0, 0.0]
""")
    assert run_cli(["run", str(bad), "--out", str(tmp_path / "out")]) == 2


def test_visibility_without_observers(tmp_path):
    assert run_cli(["visibility", "convergence", "--out", str(tmp_path)] + FAST) == 2
