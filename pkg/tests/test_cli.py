import hashlib

import pytest

from difftrack.cli import main

MINI_SCENARIO = """\
[robot]
mass = 0.10054
wheel_radius = 0.034
wheel_separation = 0.17
inertia_z = 0.003

[sim]
duration = 4.0
seed = 3
feedback = "truth"
transient = 2.0

[path]
type = "circle"
center = [0.0, 0.0]
radius = 1.0
angular_rate = 0.4

[initial]
pose = [1.0, 0.0, 1.5707963267948966]

[disturbance]
viscous = [0.01, 0.002]
noise_std = [0.002, 0.0005]

[controller]
lam = [3.0, 3.0]
k1 = 0.5
k2 = 1.0
k3 = 1.5
eta = 10.0
centers = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0]
widths = [0.3, 0.2, 0.1, 0.1, 0.2, 0.3]
"""


@pytest.fixture()
def mini(tmp_path):
    path = tmp_path / "mini.toml"
    path.write_text(MINI_SCENARIO)
    return path


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestRunCommand:
    def test_writes_three_artifacts(self, mini, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(mini), "--out", str(out)]) == 0
        for name in ("log.csv", "report.csv", "plot.gp"):
            assert (out / name).exists()
        header = (out / "log.csv").read_text().splitlines()[0]
        assert header.startswith("t,truth.x,truth.y")
        assert "metric,value" in (out / "report.csv").read_text()

    def test_seed_determinism_checksums(self, mini, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(mini), "--out", str(a), "--seed", "7"]) == 0
        assert main(["run", "--config", str(mini), "--out", str(b), "--seed", "7"]) == 0
        assert sha(a / "log.csv") == sha(b / "log.csv")

    def test_refuses_overwrite_without_force(self, mini, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(mini), "--out", str(out)]) == 0
        assert main(["run", "--config", str(mini), "--out", str(out)]) == 2
        assert main(["run", "--config", str(mini), "--out", str(out), "--force"]) == 0

    def test_malformed_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[robot]\nmass = \n")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_table_format_prints_metrics(self, mini, tmp_path, capsys):
        main(["run", "--config", str(mini), "--out", str(tmp_path / "o"), "--format", "table"])
        captured = capsys.readouterr().out
        assert "E_x" in captured and "E_omega" in captured

    def test_packaged_scenario_by_name(self, tmp_path):
        assert main(["validate", "--config", "sim_circle"]) == 0

    def test_atomic_writes_leave_no_temp_files(self, mini, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(mini), "--out", str(out)])
        assert not list(out.glob("*.tmp"))


class TestValidateCommand:
    def test_ok(self, mini):
        assert main(["validate", "--config", str(mini)]) == 0

    def test_zero_gain_names_invariant(self, mini, tmp_path, capsys):
        text = MINI_SCENARIO.replace("lam = [3.0, 3.0]", "lam = [0.0, 3.0]")
        bad = tmp_path / "zero_gain.toml"
        bad.write_text(text)
        assert main(["validate", "--config", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "lam" in err and "> 0" in err

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "ghost.toml")]) == 2


class TestCompareCommand:
    def test_identical_configs_zero_change(self, mini, tmp_path, capsys):
        out = tmp_path / "cmp"
        code = main(["compare", str(mini), str(mini), "--out", str(out), "--format", "table"])
        assert code == 0
        table = capsys.readouterr().out
        assert "0.00" in table
        csv_text = (out / "comparison.csv").read_text()
        for line in csv_text.splitlines()[1:]:
            assert line.rsplit(",", 1)[1] == "0.0"

    def test_mismatched_paths_exit_2(self, mini, tmp_path):
        other = tmp_path / "other.toml"
        other.write_text(MINI_SCENARIO.replace("radius = 1.0", "radius = 0.5"))
        assert main(["compare", str(mini), str(other), "--out", str(tmp_path / "c")]) == 2

    def test_missing_baseline_exit_2(self, mini, tmp_path):
        assert main(["compare", str(tmp_path / "ghost.toml"), str(mini),
                     "--out", str(tmp_path / "c")]) == 2

    def test_writes_both_logs(self, mini, tmp_path):
        out = tmp_path / "cmp"
        main(["compare", str(mini), str(mini), "--out", str(out)])
        assert (out / "baseline_log.csv").exists()
        assert (out / "candidate_log.csv").exists()
        assert (out / "comparison.txt").exists()


class TestSweepCommand:
    def test_eta_grid_rows(self, mini, tmp_path):
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", str(mini), "--set", "controller.eta=0,0.8,10",
                     "--out", str(out)])
        assert code == 0
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[0].startswith("config_hash,controller.eta,E_x")
        assert len(lines) == 4

    def test_empty_grid_exit_2(self, mini, tmp_path):
        assert main(["sweep", "--config", str(mini), "--out", str(tmp_path / "s")]) == 2

    def test_seed_sweep_shares_config_hash(self, mini, tmp_path):
        out = tmp_path / "seeds"
        main(["sweep", "--config", str(mini), "--set", "sim.seed=1,2,3", "--out", str(out)])
        lines = (out / "summary.csv").read_text().splitlines()[1:]
        hashes = {line.split(",")[0] for line in lines}
        assert len(lines) == 3 and len(hashes) == 1

    def test_two_axes_cartesian_product(self, mini, tmp_path):
        out = tmp_path / "grid"
        main(["sweep", "--config", str(mini), "--set", "controller.eta=0,10",
              "--set", "sim.seed=1,2", "--out", str(out)])
        lines = (out / "summary.csv").read_text().splitlines()
        assert len(lines) == 5

    def test_parallel_jobs_match_serial(self, mini, tmp_path):
        serial, parallel = tmp_path / "ser", tmp_path / "par"
        main(["sweep", "--config", str(mini), "--set", "sim.seed=1,2", "--out", str(serial)])
        main(["sweep", "--config", str(mini), "--set", "sim.seed=1,2", "--out", str(parallel),
              "--jobs", "2"])
        assert (serial / "summary.csv").read_text() == (parallel / "summary.csv").read_text()
