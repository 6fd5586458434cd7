"""Command-line entry point.

Subcommands take a configuration file (see :mod:`chemofv.config`):

``run``        integrate, write ledger/check CSVs and snapshots
``audit``      integrate, then evaluate the weak-form suite
``sweep-eps``  Cauchy differences over the configured eps list
``refine``     refinement study with fitted order
``oracle``     compare a spatially uniform run with the ODE oracle
``bounds``     print the bound constants only

Exit status: 0 success, 2 a check or audit failed (reports are still
written), 1 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import convergence, estimates, weakform
from .config import ConfigError, RunConfig, build_initial_data, is_uniform, load_config
from .snapshots import SnapshotError, write_snapshot
from .stepper import SolverAbort, invariant_report, run

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _g(x) -> str:
    return f"{float(x):.17g}"


def _outdir(cfg: RunConfig, cfg_path: Path, command: str, override: str | None) -> Path:
    root = Path(override) if override else cfg_path.parent / cfg.output_dir
    out = root / f"{cfg_path.stem}-{command}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _suite(cfg: RunConfig):
    T = cfg.params.T_end
    suite = []
    for m in cfg.weakform.modes:
        for kind, t1, t2 in cfg.weakform.windows:
            window = t2 if kind == "initial" else (t1, t2)
            suite.append(weakform.make_test_function(kind, [m], window, cfg.weakform.amplitude, cfg.grid, T))
    return suite


def _simulate(cfg, cfg_path, out: Path):
    u0, v0 = build_initial_data(cfg.initial, cfg.grid, cfg_path.parent)
    traj = run(u0, v0, cfg.params, cfg.grid, cfg.stepper)
    entries = estimates.check(traj.ledger, traj.ledger.bounds)
    estimates.write_ledger_csv(traj.ledger_rows, out / "ledger.csv")
    estimates.write_check_csv(entries, out / "checks.csv")
    write_snapshot(traj.initial, out / "initial.chsn")
    write_snapshot(traj.final, out / "final.chsn")
    inv = invariant_report(traj)
    estimates.write_csv(
        [{"invariant": k, "worst": v, "pass": ok} for k, (v, ok) in inv.items()],
        out / "invariants.csv",
        ["invariant", "worst", "pass"],
    )
    print(f"steps {traj.n_steps}  t_end {_g(traj.final.t)}  max dt {_g(traj.dt_used)}")
    for e in entries:
        print(f"  {e.lemma_id:12s} value {_g(e.value):>24s}  bound {_g(e.bound):>24s}  {'PASS' if e.passed else 'FAIL'}")
    for k, (v, ok) in inv.items():
        print(f"  {k:16s} worst {_g(v):>24s}  {'PASS' if ok else 'FAIL'}")
    print(f"  log-mass identity residual {_g(estimates.log_mass_identity_residual(traj))}")
    ok = all(e.passed for e in entries) and all(ok for _, ok in inv.values())
    return traj, ok


def cmd_run(cfg, cfg_path, out):
    _, ok = _simulate(cfg, cfg_path, out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_audit(cfg, cfg_path, out):
    traj, ok = _simulate(cfg, cfg_path, out)
    report = weakform.audit(traj, _suite(cfg), A=cfg.weakform.A)
    report.write_csv(out / "weakform.csv")
    for r in report.rows:
        print(f"  {r.testfn_id:28s} {r.mode:11s} S {_g(r.S):>24s}  V {_g(r.V):>24s}  "
              f"L {_g(r.L):>24s}  tol {_g(r.tol):>24s}  {'PASS' if r.passed else 'FAIL'}")
    print(f"audit {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if (ok and report.passed) else EXIT_FAIL


def _print_sweep(res):
    for row in res.rows():
        print(f"  {res.axis}={_g(row['axis_value']):>24s}  {row['norm_name']:5s} "
              f"{_g(row['difference']):>24s}  order {_g(row['fitted_order'])}")


def cmd_sweep(cfg, cfg_path, out):
    u0, v0 = build_initial_data(cfg.initial, cfg.grid, cfg_path.parent)
    res = convergence.epsilon_sweep(u0, v0, cfg.params, cfg.grid, cfg.stepper, cfg.sweep.eps)
    res.write_csv(out / "sweep_eps.csv")
    _print_sweep(res)
    du = res.differences["u_L1"]
    if not all(b < a for a, b in zip(du, du[1:])):
        print("note: u differences are not strictly decreasing")
    if res.failed:
        print(f"failed runs at eps = {res.failed}")
        return EXIT_FAIL
    return EXIT_OK


def _reference(cfg: RunConfig):
    ini = cfg.initial
    if is_uniform(ini):
        return "oracle"
    if (ini.u is not None and ini.u.name == "constant" and ini.u.args and ini.u.args[0] == 0
            and ini.v is not None and ini.v.name == "cosine" and cfg.grid.dim == 1):
        mode, amp, offset = ini.v.args
        return convergence.heat_reference(offset, amp, int(mode))
    return "finest"


def cmd_refine(cfg, cfg_path, out):
    base = cfg_path.parent

    def make_data(g):
        return build_initial_data(cfg.initial, g, base)

    res = convergence.refinement_study(
        make_data, cfg.params, cfg.grid, cfg.stepper, levels=cfg.sweep.levels,
        axis=cfg.sweep.axis, dt_power=cfg.sweep.dt_power, reference=_reference(cfg),
    )
    res.write_csv(out / "refine.csv")
    _print_sweep(res)
    return EXIT_OK


def cmd_oracle(cfg, cfg_path, out, tol: float):
    if not is_uniform(cfg.initial):
        raise ConfigError("oracle needs constant u and v profiles")
    u0, v0 = build_initial_data(cfg.initial, cfg.grid, cfg_path.parent)
    traj = run(u0, v0, cfg.params, cfg.grid, cfg.stepper, track_ledger=False)
    ref = convergence.ode_oracle(float(u0.flat[0]), float(v0.flat[0]), cfg.params)
    u, v = float(traj.final.u.mean()), float(traj.final.v.mean())
    eu = abs(u - ref.u) / max(abs(ref.u), 1e-300)
    ev = abs(v - ref.v) / ref.v
    rows = [{"field": "u", "solver": u, "oracle": ref.u, "rel_error": eu},
            {"field": "v", "solver": v, "oracle": ref.v, "rel_error": ev}]
    estimates.write_csv(rows, out / "oracle.csv", ["field", "solver", "oracle", "rel_error"])
    for r in rows:
        print(f"  {r['field']}  solver {_g(r['solver'])}  oracle {_g(r['oracle'])}  rel.err {_g(r['rel_error'])}")
    ok = (eu if ref.u else abs(u)) <= tol and ev <= tol
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bounds(cfg, cfg_path, out):
    u0, v0 = build_initial_data(cfg.initial, cfg.grid, cfg_path.parent)
    b = estimates.bounds_from_data(u0, v0, cfg.params, cfg.grid, cfg.params.T_end)
    for name, value in b.as_rows():
        print(f"{name:12s} {_g(value)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemofv", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "audit", "sweep-eps", "refine", "oracle", "bounds"):
        sp = sub.add_parser(name)
        sp.add_argument("config", type=Path)
        sp.add_argument("--out", default=None, help="output root (default: [output] dir next to the config)")
        if name == "oracle":
            sp.add_argument("--tol", type=float, default=1e-3, help="relative error allowed (default 1e-3)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        cfg = load_config(args.config)
        out = None if args.command == "bounds" else _outdir(cfg, args.config, args.command, args.out)
        if args.command == "run":
            return cmd_run(cfg, args.config, out)
        if args.command == "audit":
            return cmd_audit(cfg, args.config, out)
        if args.command == "sweep-eps":
            return cmd_sweep(cfg, args.config, out)
        if args.command == "refine":
            return cmd_refine(cfg, args.config, out)
        if args.command == "oracle":
            return cmd_oracle(cfg, args.config, out, args.tol)
        return cmd_bounds(cfg, args.config, out)
    except (ConfigError, SnapshotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SolverAbort as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
