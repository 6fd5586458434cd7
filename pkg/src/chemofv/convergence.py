"""Oracles and sweep harnesses.

* :func:`ode_oracle` solves the spatially uniform problem (all gradients
  vanish) with a closed-form logistic law for ``u`` and classical RK4 for ``v``.
* :func:`epsilon_sweep` tabulates Cauchy differences between solutions at
  consecutive regularization parameters.
* :func:`refinement_study` halves ``h`` and/or ``dt`` and fits observed orders.

Independent runs are farmed out to a process pool whose size is read from the
``CHEMOFV_WORKERS`` environment variable (default: all cores). Results are
assembled by index, so tables never depend on completion order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .estimates import write_csv
from .grid import Grid, build_grid, integrate
from .model import ModelParams
from .stepper import SolverAbort, StepConfig, run

WORKERS_ENV = "CHEMOFV_WORKERS"
ORACLE_STEPS = 20_000


class OracleResult(NamedTuple):
    u: float
    v: float


def logistic(u0: float, kappa: float, mu: float, t):
    """Closed-form solution of ``u' = kappa u - mu u^2``."""
    t = np.asarray(t, dtype=float)
    if kappa == 0:
        return u0 / (1.0 + mu * u0 * t)
    return kappa * u0 * np.exp(kappa * t) / (kappa + mu * u0 * np.expm1(kappa * t))


def _limit_signal(u0, v0, kappa, mu, T):
    # with eps = 0, (log v)' = -u and mu * int_0^T u = log(1 + mu u0 (e^{kappa T} - 1)/kappa)
    if kappa == 0:
        return v0 * (1.0 + mu * u0 * T) ** (-1.0 / mu)
    return v0 * (kappa / (kappa + mu * u0 * math.expm1(kappa * T))) ** (1.0 / mu)


def _rk4_signal(u0, v0, p: ModelParams, eps: float, T: float, n: int) -> float:
    def rhs(t, v):
        u = float(logistic(u0, p.kappa, p.mu, t))
        return -u * v / ((1.0 + eps * u) * (1.0 + eps * v))

    dt = T / n
    v, t = float(v0), 0.0
    for _ in range(n):
        k1 = rhs(t, v)
        k2 = rhs(t + 0.5 * dt, v + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, v + 0.5 * dt * k2)
        k4 = rhs(t + dt, v + dt * k3)
        v += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return v


def ode_oracle(u0_val: float, v0_val: float, p: ModelParams, T: float | None = None,
               eps: float | None = None, n_steps: int = ORACLE_STEPS, method: str = "auto") -> OracleResult:
    """Endpoint ``(u(T), v(T))`` of the spatially uniform system.

    Parameters
    ----------
    eps : float, optional
        Regularization used in the consumption term; defaults to ``p.eps``.
        ``eps = 0`` gives the unregularized diagnostic variant.
    method : {"auto", "rk4", "closed"}
        ``"closed"`` (only for ``eps = 0``) uses the exact signal formula;
        ``"rk4"`` integrates the signal with ``n_steps`` RK4 steps; ``"auto"``
        picks the closed form whenever it exists.
    """
    if not (np.isfinite(u0_val) and u0_val >= 0):
        raise ValueError(f"u0 must be finite and >= 0, got {u0_val!r}")
    if not (np.isfinite(v0_val) and v0_val > 0):
        raise ValueError(f"v0 must be finite and > 0, got {v0_val!r}")
    T = p.T_end if T is None else float(T)
    eps = p.eps if eps is None else float(eps)
    if eps < 0:
        raise ValueError("eps must be >= 0")
    u_T = float(logistic(u0_val, p.kappa, p.mu, T))
    if method == "auto":
        method = "closed" if eps == 0 else "rk4"
    if method == "closed":
        if eps != 0:
            raise ValueError("the closed-form signal is only available for eps = 0")
        v_T = float(_limit_signal(u0_val, v0_val, p.kappa, p.mu, T))
    elif method == "rk4":
        v_T = v0_val if (T == 0 or u0_val == 0) else _rk4_signal(u0_val, v0_val, p, eps, T, int(n_steps))
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    return OracleResult(u_T, v_T)


# ---------------------------------------------------------------- parallel runs


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    if raw.strip():
        n = int(raw)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass
class RunOutcome:
    """Compact, picklable result of one trajectory."""

    times: np.ndarray | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    dt_min: float = math.nan
    dt_max: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_job(job) -> RunOutcome:
    u0, v0, p, g, cfg = job
    try:
        tr = run(u0, v0, p, g, cfg, track_ledger=False)
    except (SolverAbort, ValueError) as exc:
        return RunOutcome(error=f"{type(exc).__name__}: {exc}")
    dts = tr.step_log["dt"]
    return RunOutcome(
        times=tr.times,
        u=np.stack([s.u for s in tr.snapshots]),
        v=np.stack([s.v for s in tr.snapshots]),
        dt_min=float(dts.min()) if dts.size else math.nan,
        dt_max=float(dts.max()) if dts.size else math.nan,
    )


def run_many(jobs, workers: int | None = None) -> list[RunOutcome]:
    """Run ``(u0, v0, params, grid, config)`` jobs, returning outcomes in job order."""
    jobs = list(jobs)
    workers = worker_count() if workers is None else workers
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


# ---------------------------------------------------------------- tables


@dataclass
class SweepResult:
    axis: str
    values: list[float]
    differences: dict[str, list[float]]
    diff_axis: list[float]
    fitted_order: dict[str, float]
    failed: list[float] = field(default_factory=list)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        d = np.diff(v)
        if v.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError(f"{self.axis} samples must be strictly monotone")

    def rows(self) -> list[dict]:
        out = []
        for name, diffs in self.differences.items():
            for x, d in zip(self.diff_axis, diffs):
                out.append({"axis_value": x, "norm_name": name, "difference": d,
                            "fitted_order": self.fitted_order[name]})
        return out

    def write_csv(self, path) -> None:
        write_csv(self.rows(), path, ["axis_value", "norm_name", "difference", "fitted_order"])


def fit_order(x, err) -> float:
    """Least-squares slope of ``log err`` against ``log x`` over finite positive entries."""
    x = np.asarray(x, dtype=float)
    e = np.asarray(err, dtype=float)
    ok = np.isfinite(e) & (e > 0) & np.isfinite(x) & (x > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(e[ok]), 1)[0])


def _time_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    d = np.diff(t)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def _common_times(a: RunOutcome, b: RunOutcome):
    common, ia, ib = np.intersect1d(np.round(a.times, 12), np.round(b.times, 12), return_indices=True)
    return common, ia, ib


def spacetime_l1(a: RunOutcome, b: RunOutcome, g: Grid, name: str = "u") -> float:
    """Trapezoid-in-time, midpoint-in-space ``||f_a - f_b||_{L1(Omega x (0,T))}``."""
    t, ia, ib = _common_times(a, b)
    fa, fb = getattr(a, name)[ia], getattr(b, name)[ib]
    per_t = np.array([integrate(np.abs(x - y), g) for x, y in zip(fa, fb)])
    return float(np.dot(_time_weights(t), per_t))


def spacetime_l2(a: RunOutcome, b: RunOutcome, g: Grid, name: str = "v") -> float:
    t, ia, ib = _common_times(a, b)
    fa, fb = getattr(a, name)[ia], getattr(b, name)[ib]
    per_t = np.array([integrate((x - y) ** 2, g) for x, y in zip(fa, fb)])
    return float(math.sqrt(np.dot(_time_weights(t), per_t)))


def epsilon_sweep(u0, v0, p: ModelParams, g: Grid, cfg: StepConfig, eps_list,
                  workers: int | None = None) -> SweepResult:
    """Cauchy differences between solutions at consecutive ``eps``.

    A first adaptive pass finds the smallest step any run needs; all runs are
    then repeated with that step as ``dt_max`` so the differences reflect the
    parameter and not step-size noise. Failed runs are listed in ``failed``
    and their differences are NaN.
    """
    eps = [float(e) for e in eps_list]
    if len(eps) < 3:
        raise ValueError("need at least 3 eps values")
    if any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise ValueError("eps values must be positive and strictly decreasing")
    if np.min(v0) <= 0:
        raise ValueError("v0 must be positive")

    first = run_many([(u0, v0, replace(p, eps=e), g, cfg) for e in eps], workers)
    dts = [o.dt_min for o in first if o.ok and np.isfinite(o.dt_min)]
    dt_fixed = min([cfg.dt_max] + dts)
    cfg2 = replace(cfg, dt_max=dt_fixed)
    outs = run_many([(u0, v0, replace(p, eps=e), g, cfg2) for e in eps], workers)

    du, dv = [], []
    for a, b in zip(outs, outs[1:]):
        if a.ok and b.ok:
            du.append(spacetime_l1(a, b, g, "u"))
            dv.append(spacetime_l2(a, b, g, "v"))
        else:
            du.append(math.nan)
            dv.append(math.nan)
    pair_eps = eps[1:]
    diffs = {"u_L1": du, "v_L2": dv}
    return SweepResult(
        axis="eps",
        values=eps,
        differences=diffs,
        diff_axis=pair_eps,
        fitted_order={k: fit_order(pair_eps, d) for k, d in diffs.items()},
        failed=[e for e, o in zip(eps, outs) if not o.ok],
    )


def restrict(fine: np.ndarray, coarse_shape) -> np.ndarray:
    """Block-average a fine cell field onto a coarser grid with nested cells."""
    shape = []
    for nf, nc in zip(fine.shape, coarse_shape):
        if nf % nc:
            raise ValueError(f"{nf} cells do not nest into {nc}")
        shape += [nc, nf // nc]
    return fine.reshape(shape).mean(axis=tuple(range(1, 2 * len(coarse_shape), 2)))


def heat_reference(offset: float, amplitude: float, mode: int, axis: int = 0) -> Callable:
    """Exact Neumann heat solution started from a single cosine mode."""

    def ref(g: Grid, t: float):
        L = g.lengths[axis]
        a = g.extents[axis][0]
        lam = (mode * math.pi / L) ** 2
        x = g.mesh[axis]
        v = offset + amplitude * math.exp(-lam * t) * np.cos(mode * math.pi * (x - a) / L)
        return g.zeros(), v

    return ref


def _final_error(out: RunOutcome, g: Grid, ref_u, ref_v):
    u, v = out.u[-1], out.v[-1]
    return integrate(np.abs(u - ref_u), g), math.sqrt(integrate((v - ref_v) ** 2, g))


def refinement_study(make_data: Callable, p: ModelParams, base_grid: Grid, cfg: StepConfig,
                     levels: int = 3, axis: str = "h", dt_power: int = 1,
                     reference: str | Callable = "finest", workers: int | None = None) -> SweepResult:
    """Errors at ``T`` for a sequence of refined runs and their fitted order.

    Parameters
    ----------
    make_data : callable
        ``make_data(grid) -> (u0, v0)`` samples initial data on a grid.
    axis : {"h", "dt"}
        ``"h"`` doubles the cell count per level and divides ``dt_max`` by
        ``2 ** dt_power``; ``"dt"`` keeps the grid and halves ``dt_max``.
    reference : {"finest", "oracle"} or callable
        ``"finest"`` compares against the last level block-averaged to each
        coarser grid, ``"oracle"`` against :func:`ode_oracle` (uniform data), a
        callable ``ref(grid, t) -> (u, v)`` against an exact solution.
    """
    if levels < 3:
        raise ValueError("need at least 3 refinement levels")
    if axis not in ("h", "dt"):
        raise ValueError("axis must be 'h' or 'dt'")
    grids, cfgs = [], []
    for lev in range(levels):
        if axis == "h":
            cells = tuple(n * 2**lev for n in base_grid.n_cells)
            grids.append(build_grid(base_grid.dim, base_grid.extents, cells))
            cfgs.append(replace(cfg, dt_max=cfg.dt_max / 2 ** (lev * dt_power)))
        else:
            grids.append(base_grid)
            cfgs.append(replace(cfg, dt_max=cfg.dt_max / 2**lev))
    data = [make_data(g) for g in grids]
    outs = run_many([(u0, v0, p, g, c) for (u0, v0), g, c in zip(data, grids, cfgs)], workers)
    failed = [i for i, o in enumerate(outs) if not o.ok]
    if failed:
        raise SolverAbort(f"refinement level(s) {failed} failed: {outs[failed[0]].error}")

    xs = [g.h_max for g in grids] if axis == "h" else [c.dt_max for c in cfgs]
    eu, ev = [], []
    if reference == "finest":
        fine = outs[-1]
        for o, g in zip(outs[:-1], grids[:-1]):
            ru = restrict(fine.u[-1], g.shape)
            rv = restrict(fine.v[-1], g.shape)
            a, b = _final_error(o, g, ru, rv)
            eu.append(a)
            ev.append(b)
        x_err = xs[:-1]
    else:
        for o, g, (u0, v0) in zip(outs, grids, data):
            T = float(o.times[-1])
            if reference == "oracle":
                u_val, v_val = float(np.mean(u0)), float(np.mean(v0))
                if np.ptp(u0) > 0 or np.ptp(v0) > 0:
                    raise ValueError("oracle reference needs spatially uniform data")
                r = ode_oracle(u_val, v_val, p, T)
                ru, rv = g.full(r.u), g.full(r.v)
            else:
                ru, rv = reference(g, T)
            a, b = _final_error(o, g, ru, rv)
            eu.append(a)
            ev.append(b)
        x_err = xs
    diffs = {"u_L1": eu, "v_L2": ev}
    return SweepResult(
        axis=axis,
        values=xs,
        differences=diffs,
        diff_axis=x_err,
        fitted_order={k: fit_order(x_err, d) for k, d in diffs.items()},
    )
