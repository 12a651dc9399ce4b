import json
import subprocess
import sys

import pytest

from kerrcavity import cli
from kerrcavity.io import read_csv

FAST_SINGLE = """
recipe = "single-mode"
seed = 3
[solver]
n_traj = 16
t_final = 4.0
settle_time = 2.0
dt = 0.002
n_max = [20]
[sweep.axes.omega0]
values = [1.0, 2.0]
"""

FAST_POPULATIONS = """
recipe = "populations-harmonic"
[solver]
n_traj = 8
t_final = 3.0
settle_time = 1.0
dt = 0.002
n_seeds = 4
[sweep.axes.omega0]
values = [0.5, 1.0]
"""


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_no_arguments_lists_recipes():
    out = subprocess.run([sys.executable, "-m", "kerrcavity.cli"], capture_output=True, text=True)
    assert out.returncode == 0
    for name in ("goldstone-linewidth", "linewidth-table", "phase-diagram", "qmc-switching"):
        assert name in out.stdout


@pytest.mark.parametrize("body,needle", [
    ('recipe = "limit-cycle"\n[system]\ngamma = -1.0\n', "NonPositiveDecay"),
    ('recipe = "limit-cycle"\n[system]\nfrobnicate = 1\n', "ConfigError"),
    ('recipe = "no-such-recipe"\n', "ConfigError"),
    ('recipe = "limit-cycle"\n[sweep.axes.temperature]\nvalues = [1.0]\n', "ConfigError"),
    ('recipe = [broken\n', "ConfigError"),
])
def test_invalid_config_exits_with_code_2(tmp_path, capsys, body, needle):
    code = cli.main(["validate", _write(tmp_path, body)])
    err = capsys.readouterr().err.strip()
    assert code == 2
    rec = json.loads(err)
    assert rec["error"] == needle


def test_missing_config_file(capsys):
    assert cli.main(["run", "/nonexistent/config.toml"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_validate_reports_hash(tmp_path, capsys):
    assert cli.main(["validate", _write(tmp_path, FAST_SINGLE)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["valid"] and len(rec["config_hash"]) == 16


def test_rerun_is_byte_identical(tmp_path, capsys):
    cfg = _write(tmp_path, FAST_SINGLE)
    assert cli.main(["run", cfg, "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert cli.main(["run", cfg, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("single_mode_populations.csv", "single_mode_meanfield.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["status"] == "ok" and "single_mode_populations.csv" in man["files"]


def test_csv_header_carries_units_and_frame(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["run", _write(tmp_path, FAST_SINGLE), "--out", str(out)]) == 0
    head = [ln for ln in (out / "single_mode_populations.csv").read_text().splitlines() if ln.startswith("#")]
    keys = {ln[2:].split(":")[0] for ln in head}
    assert {"units", "frame", "manifest", "config_hash", "recipe"} <= keys
    cols = read_csv(out / "single_mode_populations.csv")
    assert list(cols["omega0"]) == [1.0, 2.0]


def test_checkpoint_resumes_sweep(tmp_path, capsys):
    cfg = _write(tmp_path, FAST_POPULATIONS)
    out = tmp_path / "o"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    ck = json.loads((out / "checkpoint.json").read_text())
    assert set(ck["points"]) >= {"('tw', 0)", "('tw', 1)"}
    # a stored point is reused instead of recomputed
    ck["points"]["('tw', 1)"]["n"] = [123.0, 0.0, 0.0]
    (out / "checkpoint.json").write_text(json.dumps(ck))
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    assert read_csv(out / "populations_wigner.csv")["n1"][1] == 123.0
    # a changed config ignores the stale checkpoint
    cfg2 = _write(tmp_path, FAST_POPULATIONS.replace("n_traj = 8", "n_traj = 10"), "cfg2.toml")
    assert cli.main(["run", cfg2, "--out", str(out)]) == 0
    assert read_csv(out / "populations_wigner.csv")["n1"][1] != 123.0


def test_numerical_failure_exits_with_code_3(tmp_path, capsys):
    body = FAST_SINGLE.replace("n_max = [20]", "n_max = [3]\ntail_tol = 1e-200")
    code = cli.main(["run", _write(tmp_path, body), "--out", str(tmp_path / "o")])
    assert code == 3
    assert json.loads(capsys.readouterr().err)["error"] == "TruncationError"
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["status"] == "failed"
