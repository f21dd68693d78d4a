import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from finvisc import cli
from finvisc.config import NUMERICS_KEYS, LOADING_KEYS, parse_config
from finvisc.errors import NonConvergenceError, StepTooLargeError
from finvisc.matpoint import LoadProgram, run_uniaxial_stress

GOLDEN = Path(__file__).parent / "golden"
CONFIGS = {"matpoint": "matpoint.cfg", "shell-exact": "shell_exact.cfg",
           "patch-test": "patch_test.cfg", "shell-fem": "shell_fem.cfg",
           "convergence": "convergence.cfg"}


def schemas():
    out = {}
    for line in (GOLDEN / "schemas.txt").read_text().splitlines():
        name, header = line.split(": ")
        out[name] = header.split(",")
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def columns(path):
    header, rows = read_csv(path)
    return {c: np.array([float(r[k]) for r in rows]) for k, c in enumerate(header)}


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    """Run every golden configuration once through the command-line entry point."""
    done = {}
    for command, name in CONFIGS.items():
        out = tmp_path_factory.mktemp(command)
        code = cli.main([command, "--config", str(GOLDEN / name), "--out", str(out)])
        done[command] = (code, out)
    return done


@pytest.mark.parametrize("command", sorted(CONFIGS))
def test_exit_zero_and_golden_headers(outputs, command):
    code, out = outputs[command]
    assert code == 0
    golden = schemas()
    files = sorted(p.name for p in out.glob("*.csv"))
    assert files
    for f in files:
        header, rows = read_csv(out / f)
        assert header == golden[f]
        assert rows and all(len(r) == len(header) for r in rows)


@pytest.mark.parametrize("command", sorted(CONFIGS))
def test_floats_are_lossless(outputs, command):
    _, out = outputs[command]
    for f in out.glob("*.csv"):
        _, rows = read_csv(f)
        for cell in (c for r in rows for c in r):
            assert format(float(cell) + 0.0, ".17g") == cell or str(int(float(cell))) == cell
            assert not cell.startswith("-0") or float(cell) != 0.0


@pytest.mark.parametrize("command", sorted(CONFIGS))
def test_manifest_records_every_default(outputs, command):
    _, out = outputs[command]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["exit_code"] == 0
    assert set(manifest["config"]["numerics"]) == set(NUMERICS_KEYS[command])
    assert set(manifest["config"]["loading"]) == set(LOADING_KEYS[command])
    assert len(manifest["config"]["material"]) == 15
    assert set(manifest["versions"]) >= {"finvisc", "numpy", "scipy", "python",
                                         "kernel_backend"}
    assert manifest["wall_time_s"] > 0
    # the echoed text reproduces the run configuration exactly
    original = parse_config((GOLDEN / CONFIGS[command]).read_text())
    assert parse_config(manifest["config_text"]) == original
    assert sorted(Path(p).name for p in manifest["outputs"]) == \
        sorted(p.name for p in out.glob("*.csv"))


def test_shell_exact_final_radius(outputs):
    data = columns(outputs["shell-exact"][1] / "shell_exact.csv")
    assert data["t"][-1] == 10.0
    assert data["b"][-1] == pytest.approx(1.5, abs=1e-14)
    assert np.all(np.diff(data["P"]) > 0)


def test_patch_test_csv_matches_material_point(outputs):
    cfg = parse_config((GOLDEN / "patch_test.cfg").read_text())
    ld, num = cfg.loading, cfg.numerics
    ref = run_uniaxial_stress(LoadProgram.cycle(ld["peak"], ld["rate"]), cfg.material,
                              num["dt"], tol1=1e-12, tol2=1e-12)
    for n in num["meshes"]:
        data = columns(outputs["patch-test"][1] / f"patch_test_n{n}.csv")
        assert_allclose(data["t"], ref.t, atol=1e-12)
        assert_allclose(data["S33"], ref.S33, atol=1e-8 * np.abs(ref.S33).max())
        assert_allclose(data["lambda_lat"], ref.lambda_lat, atol=1e-9)


def test_convergence_table(outputs):
    data = columns(outputs["convergence"][1] / "convergence.csv")
    assert_allclose(data["level"], [0, 1])
    assert data["h"][1] < data["h"][0]
    assert data["eps_P"][1] < data["eps_P"][0]
    assert np.all(data["n_dof"] == np.round(data["n_dof"]))


@pytest.mark.parametrize("command", ["matpoint", "shell-exact", "patch-test"])
def test_reruns_are_bit_identical(outputs, command, tmp_path):
    code = cli.main([command, "--config", str(GOLDEN / CONFIGS[command]),
                     "--out", str(tmp_path)])
    assert code == 0
    for f in outputs[command][1].glob("*.csv"):
        assert (tmp_path / f.name).read_bytes() == f.read_bytes()


def test_error_line_is_json(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text((GOLDEN / "matpoint.cfg").read_text().replace("peak", "peek"))
    assert cli.main(["matpoint", "--config", str(bad), "--out", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config" and err["exit_code"] == 1
    assert "peek" in err["message"] and "line" in err["message"]


def test_command_must_match_config(tmp_path):
    code = cli.main(["shell-exact", "--config", str(GOLDEN / "matpoint.cfg"),
                     "--out", str(tmp_path)])
    assert code == cli.EXIT_CONFIG


def test_missing_config_is_io_error(tmp_path):
    code = cli.main(["matpoint", "--config", str(tmp_path / "nope.cfg")])
    assert code == cli.EXIT_IO


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = cli.main(["matpoint", "--config", str(GOLDEN / "matpoint.cfg"),
                     "--out", str(blocker / "sub")])
    assert code == cli.EXIT_IO


def test_bad_thread_count(tmp_path):
    assert cli.main(["matpoint", "--config", str(GOLDEN / "matpoint.cfg"), "--threads", "0",
                     "--out", str(tmp_path)]) == cli.EXIT_CONFIG


@pytest.mark.parametrize("exc,code,category", [
    (NonConvergenceError("stalled"), 2, "non-convergence"),
    (StepTooLargeError("no step left"), 3, "step-exhaustion"),
])
def test_solver_failures_map_to_exit_codes(exc, code, category, tmp_path, monkeypatch):
    def failing(cfg, out, threads):
        raise exc

    monkeypatch.setitem(cli.DRIVERS, "matpoint", failing)
    cfg = parse_config((GOLDEN / "matpoint.cfg").read_text())
    got, manifest = cli.run(cfg, str(tmp_path))
    assert got == code
    assert manifest["error"]["category"] == category
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["exit_code"] == code and on_disk["status"] == "error"


def test_programming_errors_propagate(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.DRIVERS, "matpoint", lambda *a: 1 / 0)
    cfg = parse_config((GOLDEN / "matpoint.cfg").read_text())
    with pytest.raises(ZeroDivisionError):
        cli.run(cfg, str(tmp_path))


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "finvisc.cli", "matpoint", "--config",
                           str(GOLDEN / "matpoint.cfg"), "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["status"] == "ok"
    assert not math.isnan(columns(tmp_path / "matpoint.csv")["S33"].max())
