"""Command-line front end.

Usage: ``finvisc <command> --config PATH [--threads N] [--out DIR]``.

Exit codes: 0 success, 1 invalid configuration, 2 non-convergence or a
singular linear system, 3 time-step exhaustion or inadmissible
deformation, 4 I/O failure.  On failure a one-line JSON error record is
written to stderr and the manifest records the same category.
"""

import argparse
import csv
import json
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__, kernels
from .config import COMMANDS, ConfigError, as_record, parse_config, serialize
from .errors import (ContractError, GeometryError, InvalidDeformationError,
                     NonConvergenceError, SingularSystemError, StepTooLargeError)
from .material import ParameterError
from .matpoint import (LoadProgram, PointState, run_prescribed_F, run_uniaxial_stress,
                       trajectory_from_states)
from .shell import ShellGeometry, pressure_history

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_STEP, EXIT_IO = 0, 1, 2, 3, 4

_CATEGORIES = [
    ((ConfigError, ParameterError, ContractError, GeometryError), EXIT_CONFIG, "config"),
    ((NonConvergenceError, SingularSystemError), EXIT_NONCONV, "non-convergence"),
    ((StepTooLargeError, InvalidDeformationError), EXIT_STEP, "step-exhaustion"),
    ((OSError,), EXIT_IO, "io"),
]

MATPOINT_COLUMNS = ("t", "F33", "lambda_lat", "q", "S33", "T33", "dissipation")
SHELL_COLUMNS = ("t", "b", "P")
CONVERGENCE_COLUMNS = ("level", "h", "n_dof", "eps_P", "wall_s")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    # adding 0.0 turns a negative zero into 0
    return format(float(v) + 0.0, ".17g")


def write_csv(path, columns, data):
    """Header row plus one line per record, floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in zip(*(data[c] for c in columns)):
            w.writerow([_fmt(v) for v in row])


def _program(cfg, mode):
    ld = cfg.loading
    make = LoadProgram.cycle if ld["shape"] == "cycle" else LoadProgram.ramp
    kw = {"lateral": ld["lateral"]} if mode == "prescribed" else {}
    return make(ld["peak"], ld["rate"], mode=mode, hold=ld["hold"], **kw)


def _geometry(cfg):
    ld = cfg.loading
    return ShellGeometry.ramp(ld["A"], ld["B"], ld["rate"], ld["t_end"])


def _grid(t_end, dt):
    n = max(1, int(round(t_end / dt)))
    return np.linspace(0.0, t_end, n + 1)


def run_matpoint(cfg, out, threads):
    num = cfg.numerics
    mode = cfg.loading["mode"]
    prog = _program(cfg, mode)
    every = cfg.output["every"]
    if mode == "uniaxial":
        traj = run_uniaxial_stress(prog, cfg.material, num["dt"], num["tol1"], num["tol2"],
                                   num["safety"], every)
    else:
        traj = run_prescribed_F(prog, cfg.material, num["dt"], num["safety"], every)
    path = os.path.join(out, "matpoint.csv")
    write_csv(path, MATPOINT_COLUMNS, traj.columns())
    return [path], {"dissipated_work": traj.dissipated_work()}


def run_shell_exact(cfg, out, threads):
    geom = _geometry(cfg)
    times = _grid(geom.end_time, cfg.numerics["dt"])
    P = pressure_history(times, geom, cfg.material, cfg.numerics["n_gauss"],
                         cfg.numerics["safety"])
    path = os.path.join(out, "shell_exact.csv")
    write_csv(path, SHELL_COLUMNS, {"t": times, "b": geom.b(times), "P": P})
    return [path], {"P_final": float(P[-1])}


def _fem_kw(cfg, threads):
    num = cfg.numerics
    return dict(tol1=num["tol1"], tol2=num["tol2"], safety=num["safety"], threads=threads)


def run_patch_test(cfg, out, threads):
    from .fem import generate_cube_mesh, homogeneity, patch_test_config, run

    num = cfg.numerics
    prog = _program(cfg, "uniaxial")
    paths, extra = [], {}
    for n in num["meshes"]:
        mesh = generate_cube_mesh(n, distort=num["distort"], seed=num["seed"])
        bvp = patch_test_config(mesh, cfg.material, prog, num["dt"], **_fem_kw(cfg, threads))
        asm, states = run(bvp)
        points = []
        for s in states:
            q = float(np.mean(asm.pressure(s.z)))
            points.append(PointState(s.t, s.F.mean(axis=0), q, s.qp.Dv.mean(axis=0),
                                     s.iterations))
        traj = trajectory_from_states(points, cfg.material)
        path = os.path.join(out, f"patch_test_n{n}.csv")
        write_csv(path, MATPOINT_COLUMNS, traj.columns())
        paths.append(path)
        extra[f"homogeneity_n{n}"] = max(homogeneity(asm, s) for s in states)
    return paths, extra


def run_shell_fem(cfg, out, threads):
    from .fem import generate_shell_mesh, solve_shell

    geom = _geometry(cfg)
    times = _grid(geom.end_time, cfg.numerics["dt"])
    nr, nt = cfg.numerics["mesh"][0]
    mesh = generate_shell_mesh(nr, nt, geom.A, geom.B)
    P, asm, _ = solve_shell(mesh, cfg.material, geom, times, **_fem_kw(cfg, threads))
    path = os.path.join(out, "shell_fem.csv")
    write_csv(path, SHELL_COLUMNS, {"t": times, "b": geom.b(times), "P": P})
    return [path], {"n_dof": int(asm.dofs.n), "P_final": float(P[-1])}


def run_convergence(cfg, out, threads):
    from .fem import convergence_study

    ld, num = cfg.loading, cfg.numerics
    rows, ref = convergence_study(num["levels"], cfg.material, rate=ld["rate"],
                                  t_end=ld["t_end"], n_steps=num["n_steps"], A=ld["A"],
                                  B=ld["B"], n_gauss=num["n_gauss"], **_fem_kw(cfg, threads))
    data = {c: [getattr(r, c) for r in rows] for c in CONVERGENCE_COLUMNS}
    path = os.path.join(out, "convergence.csv")
    write_csv(path, CONVERGENCE_COLUMNS, data)
    return [path], {"P_reference": ref}


DRIVERS = {"matpoint": run_matpoint, "shell-exact": run_shell_exact,
           "patch-test": run_patch_test, "shell-fem": run_shell_fem,
           "convergence": run_convergence}


def _versions():
    return {"finvisc": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "kernel_backend": kernels.backend_name()}


def _classify(exc):
    for types, code, name in _CATEGORIES:
        if isinstance(exc, types):
            return code, name
    return None


def run(cfg, out=".", threads=1):
    """Execute a parsed configuration; returns ``(exit code, manifest dict)``.

    Unexpected exceptions (programming errors) propagate.
    """
    t0 = time.perf_counter()
    manifest = {"config": as_record(cfg), "config_text": serialize(cfg),
                "threads": threads, "versions": _versions()}
    try:
        os.makedirs(out, exist_ok=True)
        files, extra = DRIVERS[cfg.command](cfg, out, threads)
        manifest.update(status="ok", exit_code=EXIT_OK, outputs=files, results=extra)
        code = EXIT_OK
    except Exception as exc:
        hit = _classify(exc)
        if hit is None:
            raise
        code, name = hit
        manifest.update(status="error", exit_code=code,
                        error={"category": name, "type": type(exc).__name__,
                               "message": str(exc)})
    manifest["wall_time_s"] = time.perf_counter() - t0
    if code != EXIT_IO:
        try:
            with open(os.path.join(out, "manifest.json"), "w") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            code = EXIT_IO
            manifest.update(status="error", exit_code=code,
                            error={"category": "io", "type": type(exc).__name__,
                                   "message": str(exc)})
    return code, manifest


def _fail(code, category, message):
    print(json.dumps({"error": category, "exit_code": code, "message": message}),
          file=sys.stderr)
    return code


def main(argv=None):
    ap = argparse.ArgumentParser(prog="finvisc", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for FE assembly")
    ap.add_argument("--out", default=".", help="output directory")
    args = ap.parse_args(argv)
    if args.threads < 1:
        return _fail(EXIT_CONFIG, "config", "--threads must be at least 1")
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", f"{args.config}: {exc}")
    if cfg.command != args.command:
        return _fail(EXIT_CONFIG, "config", f"config is for {cfg.command!r}, "
                     f"not {args.command!r}")
    code, manifest = run(cfg, args.out, args.threads)
    if code != EXIT_OK:
        err = manifest["error"]
        return _fail(code, err["category"], err["message"])
    print(json.dumps({"status": "ok", "outputs": manifest["outputs"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
