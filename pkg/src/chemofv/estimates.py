"""A priori bounds as runtime monitors.

:func:`bounds_from_data` evaluates the explicit, regularization-independent
constants ``C1 .. C11`` from the initial data; :class:`EstimateLedger`
accumulates the matching space-time integrals of the discrete solution step by
step, and :func:`check` compares the two.

==========  ===============================================  =========
check id    monitored quantity                               constant
==========  ===============================================  =========
mass        sup_t  int u                                     C1
u_sq        int_0^T int u^2                                  C2
grad_log_v  int_0^T int |grad log v|^2                       C3
grad_log_u  int_0^T int |grad log(u+1)|^2                    C4
grad_u_l1   int_0^T int |grad u|                             C5
u_w11       int_0^T (int u + int |grad u|)                   C6
grad_v_l2   sup_t  ||grad v||_2                              C7
lap_v_l2    ||Lap v||_{L2(space-time)}                       C8
v_t_l2      ||v_t||_{L2(space-time)}                         C9
log_v_l1    sup_t  ||log v||_1                               C10
log_v_w12   ||log v||_{L2(0,T; W^{1,2})}                     C11
uptake      int_0^T int u/((1+eps u)(1+eps v))               C1 * T
==========  ===============================================  =========
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .grid import Grid, divergence, face_abs_sum, face_gradient, face_norm_sq, integrate
from .model import ModelParams, State, consumption_rate

ANALYTIC_TOL = 1e-6
DISCRETIZATION_FACTOR = 10.0

# integrands accumulated with the trapezoid rule
TIME_INTEGRALS = (
    "u",
    "u_sq",
    "grad_log_v_sq",
    "grad_log_u1_sq",
    "grad_u_l1",
    "lap_v_sq",
    "log_v_sq",
    "consumption",
    "uptake",
)
INSTANT = ("mass", "grad_v_sq", "log_v_l1", "log_v_int", "v_max")


@dataclass(frozen=True)
class BoundConstants:
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    C6: float
    C7: float
    C8: float
    C9: float
    C10: float
    C11: float
    poincare_CP: float
    T: float

    def as_rows(self) -> list[tuple[str, float]]:
        return [(k, v) for k, v in asdict(self).items()]


def poincare_constant(g: Grid) -> float:
    """Inverse of the first nonzero Neumann eigenvalue of the rectangle."""
    lam1 = min((math.pi / L) ** 2 for L in g.lengths)
    return 1.0 / lam1


def bounds_from_data(u0, v0, p: ModelParams, g: Grid, T: float) -> BoundConstants:
    if not p.mu > 0:
        raise ValueError("mu must be > 0: the mass and L2 bounds are undefined otherwise")
    if T < 0:
        raise ValueError("horizon T must be >= 0")
    u0 = g.check_field(u0, "u0")
    v0 = g.check_field(v0, "v0")
    if np.any(v0 <= 0):
        raise ValueError("v0 must be positive")
    omega = g.domain_measure
    v_sup = float(v0.max())

    C1 = max(integrate(u0, g), p.kappa * omega / p.mu)
    C2 = (p.kappa * T + 1.0) * C1 / p.mu
    C3 = C1 * T - integrate(np.log(v0 / v_sup), g)
    C4 = 2.0 * (1.0 + p.mu * T) * C1 + p.chi**2 * C3
    C5 = C4 / 2.0 + C2 / 2.0 + C1 * T + omega * T / 2.0
    C6 = C1 * T + C5
    grad_v0_sq = face_norm_sq(face_gradient(v0, g), g)
    # energy inequality integrated without using the damping term
    C7 = math.sqrt(grad_v0_sq + v_sup**2 * C2)
    C8 = math.sqrt(v_sup**2 * C2 + grad_v0_sq)
    C9 = C8 + v_sup * math.sqrt(C2)
    C10 = 2.0 * integrate(np.abs(v0), g) - integrate(np.log(v0), g) + C1 * T
    CP = poincare_constant(g)
    C11 = math.sqrt((CP + 1.0) * C3 + T * C10**2 / omega)
    return BoundConstants(C1, C2, C3, C4, C5, C6, C7, C8, C9, C10, C11, CP, T)


def integrands(state: State, g: Grid, p: ModelParams) -> dict[str, float]:
    """Spatial integrals of every monitored quantity at one time level."""
    u, v = state.u, state.v
    log_v = np.log(v)
    grad_v = face_gradient(v, g)
    rate = consumption_rate(u, v, p)
    lap_v = divergence(grad_v, g)
    grad_log_v_sq = face_norm_sq(face_gradient(log_v, g), g)
    mass = integrate(u, g)
    return {
        "u": mass,
        "u_sq": integrate(u * u, g),
        "grad_log_v_sq": grad_log_v_sq,
        "grad_log_u1_sq": face_norm_sq(face_gradient(np.log1p(u), g), g),
        "grad_u_l1": face_abs_sum(face_gradient(u, g), g),
        "lap_v_sq": integrate(lap_v * lap_v, g),
        "log_v_sq": integrate(log_v * log_v, g),
        "consumption": integrate(rate * v, g),
        "uptake": integrate(rate, g),
        "mass": mass,
        "grad_v_sq": face_norm_sq(grad_v, g),
        "log_v_l1": integrate(np.abs(log_v), g),
        "log_v_int": integrate(log_v, g),
        "v_max": float(v.max()),
    }


class EstimateLedger:
    """Running space-time integrals and sup-in-time norms along one trajectory.

    Time integrals advance by the trapezoid rule over accepted steps; the
    squared time derivative of ``v`` uses the difference quotient of the two
    states bounding each step. Running maxima are taken over states with
    ``t > 0``.
    """

    def __init__(self, g: Grid, p: ModelParams, enabled: bool = True):
        self.grid = g
        self.params = p
        self.enabled = enabled
        self.t = 0.0
        self.dt_max = 0.0
        self.acc = {k: 0.0 for k in TIME_INTEGRALS + ("v_t_sq",)}
        self.inst: dict[str, float] = {}
        self.sup = {"mass": 0.0, "grad_v_l2": 0.0, "log_v_l1": 0.0}
        self.bounds: BoundConstants | None = None
        self._last_state: State | None = None
        self._last: dict[str, float] | None = None

    def start(self, state: State) -> "EstimateLedger":
        self.t = state.t
        self.bounds = bounds_from_data(state.u, state.v, self.params, self.grid, self.params.T_end)
        if self.enabled:
            # the initial state meets the sup-in-time bounds by construction of
            # C1, C7 and C10, so only evolved states enter the running maxima
            self._observe(state, integrands(state, self.grid, self.params), track_sup=False)
        return self

    def _observe(self, state: State, f: dict[str, float], track_sup: bool = True) -> None:
        self.inst = {k: f[k] for k in INSTANT}
        self._last_state, self._last = state, f
        if not track_sup:
            return
        self.sup["mass"] = max(self.sup["mass"], f["mass"])
        self.sup["grad_v_l2"] = max(self.sup["grad_v_l2"], math.sqrt(f["grad_v_sq"]))
        self.sup["log_v_l1"] = max(self.sup["log_v_l1"], f["log_v_l1"])

    def accumulate(self, before: State, after: State, dt: float) -> "EstimateLedger":
        if dt == 0 or not self.enabled:
            self.t = after.t
            return self
        g, p = self.grid, self.params
        f0 = self._last if self._last_state is before else integrands(before, g, p)
        f1 = integrands(after, g, p)
        half = 0.5 * dt
        for k in TIME_INTEGRALS:
            self.acc[k] += half * (f0[k] + f1[k])
        dv = after.v - before.v
        self.acc["v_t_sq"] += integrate(dv * dv, g) / dt
        self.dt_max = max(self.dt_max, dt)
        self.t = after.t
        self._observe(after, f1)
        return self

    def row(self, t: float) -> dict[str, float]:
        out = {"t": t}
        out.update({f"int_{k}": v for k, v in self.acc.items()})
        out.update(self.inst)
        return out


def accumulate(ledger: EstimateLedger, state_before: State, state_after: State, dt: float,
               g: Grid | None = None, p: ModelParams | None = None) -> EstimateLedger:
    return ledger.accumulate(state_before, state_after, dt)


@dataclass(frozen=True)
class CheckEntry:
    lemma_id: str
    value: float
    bound: float
    margin: float
    passed: bool


def tolerance(h: float, dt: float) -> float:
    return ANALYTIC_TOL + DISCRETIZATION_FACTOR * (h + dt)


def check(ledger: EstimateLedger, bounds: BoundConstants, t: float | None = None) -> list[CheckEntry]:
    """Compare every monitored quantity with its bound.

    An entry passes when ``value <= bound * (1 + tol)`` with
    ``tol = 1e-6 + 10 (h + dt)``; violations are reported, never raised.
    """
    t = ledger.t if t is None else t
    if t > bounds.T * (1 + 1e-12):
        raise ValueError(f"bounds are valid up to T={bounds.T!r}, asked for t={t!r}")
    a, s = ledger.acc, ledger.sup
    values = [
        ("mass", s["mass"], bounds.C1),
        ("u_sq", a["u_sq"], bounds.C2),
        ("grad_log_v", a["grad_log_v_sq"], bounds.C3),
        ("grad_log_u", a["grad_log_u1_sq"], bounds.C4),
        ("grad_u_l1", a["grad_u_l1"], bounds.C5),
        ("u_w11", a["u"] + a["grad_u_l1"], bounds.C6),
        ("grad_v_l2", s["grad_v_l2"], bounds.C7),
        ("lap_v_l2", math.sqrt(a["lap_v_sq"]), bounds.C8),
        ("v_t_l2", math.sqrt(a["v_t_sq"]), bounds.C9),
        ("log_v_l1", s["log_v_l1"], bounds.C10),
        ("log_v_w12", math.sqrt(a["log_v_sq"] + a["grad_log_v_sq"]), bounds.C11),
        ("uptake", a["uptake"], bounds.C1 * t),
    ]
    tol = tolerance(ledger.grid.h_max, ledger.dt_max)
    return [CheckEntry(name, val, bnd, bnd - val, bool(val <= bnd * (1 + tol))) for name, val, bnd in values]


def log_mass_identity_residual(trajectory, p: ModelParams | None = None, g: Grid | None = None,
                               T: float | None = None) -> float:
    """Residual of the exact identity obtained by testing the signal equation with 1/v.

    ``int_0^T int |grad log v|^2 = int log v(T) - int log v0 + int_0^T int u/((1+eps u)(1+eps v))``
    holds for the regularized problem; the discrete residual measures
    discretization error and vanishes under refinement.
    """
    g = trajectory.grid if g is None else g
    ledger = trajectory.ledger
    first, last = trajectory.initial, trajectory.final
    if T is not None and abs(last.t - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"trajectory ends at t={last.t!r}, not T={T!r}")
    lhs = ledger.acc["grad_log_v_sq"]
    rhs = integrate(np.log(last.v), g) - integrate(np.log(first.v), g) + ledger.acc["uptake"]
    return lhs - rhs


def consumption_vs_mass_check(ledger: EstimateLedger) -> float:
    """Margin ``C1 * t - int_0^t int u/((1+eps u)(1+eps v))`` (nonnegative in theory)."""
    return ledger.bounds.C1 * ledger.t - ledger.acc["uptake"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(rows: list[dict], path, columns: list[str] | None = None) -> None:
    """Write dict rows with numbers at 17 significant digits."""
    columns = columns or (list(rows[0].keys()) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_ledger_csv(rows: list[dict], path) -> None:
    write_csv(rows, path)


def write_check_csv(entries: list[CheckEntry], path) -> None:
    rows = [
        {"lemma_id": e.lemma_id, "value": e.value, "bound": e.bound, "margin": e.margin, "pass": e.passed}
        for e in entries
    ]
    write_csv(rows, path, ["lemma_id", "value", "bound", "margin", "pass"])
