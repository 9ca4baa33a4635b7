"""Command-line front end.

Subcommands: symbol, solve-linear, solve-wave, verify. Exit codes:
0 ok, 1 input or solver error, 2 bound or consistency violation,
3 non-convergence. Heavy imports happen inside the commands so --threads can
pin the BLAS pools before numpy loads.
"""

import os
import sys
import traceback
from pathlib import Path

import click

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BOUND = 2
EXIT_NOCONV = 3


def _pin_threads(threads: int):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(threads)


def _common(fn):
    fn = click.option("--seed", type=int, default=None,
                      help="Override the RNG seed from the config.")(fn)
    fn = click.option("--threads", type=int, default=None,
                      help="Bound worker/BLAS parallelism.")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=".",
                      help="Output directory (created if missing).")(fn)
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=True, dir_okay=False))(fn)
    return fn


def _load(config_path, out_dir, threads, seed):
    from .config import RunConfig

    rc = RunConfig.from_toml(config_path)
    if threads is not None:
        rc.threads = threads
    if seed is not None:
        rc.seed = seed
    _pin_threads(rc.threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return rc, out


def _fail(exc, code):
    click.echo(f"error: {exc}", err=True)
    if os.environ.get("STRATAWAVE_DEBUG"):
        traceback.print_exc()
    sys.exit(code)


@click.group()
def main():
    """Spectral solver for viscous multilayer traveling waves."""


# ----------------------------------------------------------------------------
@main.command("symbol")
@_common
def cmd_symbol(config_path, out_dir, threads, seed):
    """Sweep the interface symbols and check their structure."""
    try:
        rc, out = _load(config_path, out_dir, threads, seed)
    except Exception as exc:
        _fail(exc, EXIT_INPUT)
    import numpy as np
    from . import io
    from .symbols import SymbolCalculator, verify_asymptotics
    from .vertical_bvp import oracle_single_layer

    cfg = rc.physical
    try:
        rep = verify_asymptotics(cfg)
    except Exception as exc:
        _fail(exc, EXIT_INPUT)

    rows = []
    header = ["radius", "n_norm"]
    oracle_max_err = None
    if cfg.m == 1 and cfg.gamma == 0.0:
        header += ["oracle_norm", "oracle_abs_err"]
        calc = SymbolCalculator(cfg)
        oracle_max_err = 0.0
        for r, nn in zip(rep["radii"], rep["norms"]):
            xi = r * rep["direction"]
            tr, _ = oracle_single_layer(cfg.mu[0], cfg.rho[0], cfg.gamma,
                                        cfg.a[0], float(xi[0]))
            got = calc.n_matrix(xi)[0, 0]
            err = abs(got - tr)
            oracle_max_err = max(oracle_max_err, float(err))
            rows.append([r, nn, abs(tr), err])
    else:
        rows = [[r, nn] for r, nn in zip(rep["radii"], rep["norms"])]
    io.write_table(out / "symbol.csv", header, rows)

    ok = (abs(rep["slope_low"] - 2.0) <= 0.1
          and abs(rep["slope_high"] + 1.0) <= 0.1
          and rep["coercivity_min"] > 0.0
          and rep["adjoint_defect"] <= 1e-8)
    report = {
        "slope_low": rep["slope_low"],
        "slope_high": rep["slope_high"],
        "adjoint_defect": rep["adjoint_defect"],
        "coercivity_min": rep["coercivity_min"],
        "inverse_bound_sup": rep["inverse_bound_sup"],
        "pass": bool(ok),
    }
    if oracle_max_err is not None:
        report["oracle_max_abs_err"] = oracle_max_err
        ok = ok and oracle_max_err <= 1e-9
        report["pass"] = bool(ok)
    io.write_json(out / "symbol_report.json", report)
    io.write_manifest(out / "manifest.json", rc, "symbol")
    if not ok:
        click.echo("symbol bounds violated", err=True)
        sys.exit(EXIT_BOUND)


# ----------------------------------------------------------------------------
def _build_forcing(rc, grid):
    from .wave import ForcingSpec

    spec = rc.forcing
    kind = spec.get("kind")
    if not kind:
        return None
    if kind == "gaussian_bump":
        return ForcingSpec.gaussian_bump(
            grid, rc.physical.m, center=spec.get("center", 0.5),
            width=spec.get("width", 0.1), amplitude=spec.get("amplitude", 1e-2))
    if kind == "mode_k":
        return ForcingSpec.mode_k(
            grid, rc.physical.m, k=spec.get("k", 1),
            amplitude=spec.get("amplitude", 1e-2))
    raise ValueError(f"unknown forcing kind {kind!r}")


def _surfaces_rows(grid, mesh, eta):
    import numpy as np

    samples = [np.real(grid.ifft(eta[l])) for l in range(mesh.m)]
    rows = []
    for i, x in enumerate(grid.x):
        if grid.dim_h == 1:
            rows.append([x] + [mesh.a[l + 1] + samples[l][i]
                               for l in range(mesh.m)])
        else:
            for j, x2 in enumerate(grid.x):
                rows.append([x, x2] + [mesh.a[l + 1] + samples[l][i, j]
                                       for l in range(mesh.m)])
    xcols = ["x"] if grid.dim_h == 1 else ["x1", "x2"]
    return xcols + [f"eta_{l+1}" for l in range(mesh.m)], rows


@main.command("solve-linear")
@_common
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Directory with g/f/k/h CSV files.")
def cmd_solve_linear(config_path, out_dir, threads, seed, data_dir):
    """Invert the linearized system for a data tuple."""
    try:
        rc, out = _load(config_path, out_dir, threads, seed)
    except Exception as exc:
        _fail(exc, EXIT_INPUT)
    import numpy as np
    from . import io
    from .compat import IncompatibleZeroMode
    from .grid import LayerMesh, TorusGrid
    from .linear import ConsistencyError, DataTuple, LinearSolver

    cfg = rc.physical
    try:
        grid = TorusGrid(n=cfg.n, L=rc.L, N=rc.N)
        mesh = LayerMesh(cfg.a, rc.degree)
        solver = LinearSolver(cfg, grid, mesh, rc.mode)
        data = DataTuple.zeros(grid, mesh)
        if data_dir is not None:
            dd = Path(data_dir)
            if (dd / "g.csv").exists():
                data.g = io.read_volume_field(dd / "g.csv", grid, mesh, 1)
            if (dd / "f.csv").exists():
                data.f = io.read_volume_field(dd / "f.csv", grid, mesh, grid.n)
            if (dd / "k.csv").exists():
                data.k = io.read_interface_field(
                    dd / "k.csv", grid, (mesh.m, grid.n, grid.nlat))
            if (dd / "h.csv").exists():
                data.h = io.read_interface_field(
                    dd / "h.csv", grid, (mesh.m, grid.nlat))
        else:
            forcing = _build_forcing(rc, grid)
            if forcing is not None and forcing.T is not None:
                data.k += forcing.T[:, :, grid.n - 1]
    except (IncompatibleZeroMode, Exception) as exc:
        _fail(exc, EXIT_INPUT)

    try:
        state, report = solver.inverse(data)
    except IncompatibleZeroMode as exc:
        _fail(exc, EXIT_INPUT)
    except ConsistencyError as exc:
        _fail(exc, EXIT_BOUND)
    except Exception as exc:
        _fail(exc, EXIT_INPUT)

    io.write_state(out / "state.stwv", state)
    header, rows = _surfaces_rows(grid, mesh, state.eta)
    io.write_table(out / "surfaces.csv", header, rows)
    io.write_json(out / "linear_report.json", report)
    io.write_manifest(out / "manifest.json", rc, "solve-linear")


# ----------------------------------------------------------------------------
@main.command("solve-wave")
@_common
def cmd_solve_wave(config_path, out_dir, threads, seed):
    """Solve the nonlinear traveling-wave problem by Picard iteration."""
    try:
        rc, out = _load(config_path, out_dir, threads, seed)
    except Exception as exc:
        _fail(exc, EXIT_INPUT)
    import numpy as np
    from . import io
    from .grid import LayerMesh, TorusGrid
    from .wave import ForcingSpec, TrustRegionError, WaveSolver, unflatten

    cfg = rc.physical
    try:
        grid = TorusGrid(n=cfg.n, L=rc.L, N=rc.N)
        mesh = LayerMesh(cfg.a, rc.degree)
        ws = WaveSolver(cfg, grid, mesh, rc.mode, rtol=rc.rtol, atol=rc.atol,
                        max_iter=rc.max_iter)
        forcing = _build_forcing(rc, grid) or ForcingSpec()
    except Exception as exc:
        _fail(exc, EXIT_INPUT)

    try:
        state, report = ws.solve(forcing)
    except TrustRegionError as exc:
        _fail(exc, EXIT_BOUND)
    except Exception as exc:
        _fail(exc, EXIT_INPUT)

    io.write_json(out / "iterations.json", report.as_dict())
    io.write_state(out / "state.stwv", state)
    header, rows = _surfaces_rows(grid, mesh, state.eta)
    io.write_table(out / "surfaces.csv", header, rows)

    # Eulerian mid-layer slices
    bundle = unflatten(state, cfg)
    rows = []
    aa = mesh.a
    for l in range(mesh.m):
        ymid = 0.5 * (aa[l] + aa[l + 1])
        for x in grid.x if grid.dim_h == 1 else [(a, b) for a in grid.x
                                                 for b in grid.x]:
            xv = np.atleast_1d(np.asarray(x, float))
            v = bundle.velocity(xv, ymid)
            q = bundle.pressure(xv, ymid)
            rows.append(list(xv) + [ymid] + list(v) + [q])
    xcols = ["x"] if grid.dim_h == 1 else ["x1", "x2"]
    io.write_table(out / "slices.csv",
                   xcols + ["y"] + [f"v{j+1}" for j in range(grid.n)] + ["q"],
                   rows)
    io.write_manifest(out / "manifest.json", rc, "solve-wave")
    if not report.converged:
        click.echo(f"not converged: {report.message}", err=True)
        if "trust region" in report.message:
            sys.exit(EXIT_BOUND)
        sys.exit(EXIT_NOCONV)


# ----------------------------------------------------------------------------
SUITES = ("geometry", "divtools", "symbols", "compat", "linear", "wave")


@main.command("verify")
@_common
@click.argument("selectors", nargs=-1)
def cmd_verify(config_path, out_dir, threads, seed, selectors):
    """Run seeded verification suites; exit 0 iff every check passes."""
    try:
        rc, out = _load(config_path, out_dir, threads, seed)
    except Exception as exc:
        _fail(exc, EXIT_INPUT)
    if not selectors:
        selectors = ("all",)
    chosen = []
    for s in selectors:
        if s == "all":
            chosen = list(SUITES)
            break
        if s not in SUITES:
            click.echo(f"unknown selector {s!r}; choose from "
                       f"{', '.join(SUITES)} or 'all'", err=True)
            sys.exit(EXIT_INPUT)
        chosen.append(s)

    from . import io, verify as vf

    matrix = {}
    ok = True
    for s in chosen:
        matrix[s] = getattr(vf, f"suite_{s}")(rc)
        ok = ok and all(c["pass"] for c in matrix[s].values())
    io.write_json(out / "verify.json", matrix)
    io.write_manifest(out / "manifest.json", rc, "verify")
    for s in chosen:
        for name, c in matrix[s].items():
            click.echo(f"{s}.{name}: {'PASS' if c['pass'] else 'FAIL'} "
                       f"({c['value']:.3e})")
    if not ok:
        sys.exit(EXIT_BOUND)


if __name__ == "__main__":
    main()
