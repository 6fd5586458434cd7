"""Weak-form residuals of the computed solution against smooth test functions.

Three forms are evaluated by quadrature over a stored trajectory (midpoint rule
in space, trapezoid rule over snapshot times):

* the subsolution form of the cell equation, tested with ``phi >= 0``
  (``S = RHS - LHS``, nonnegative for a subsolution),
* the signal identity tested with ``psi`` (``V = LHS - RHS``),
* the logarithmic form of the cell equation, tested with ``phi / (u + 1)``
  (``L = LHS - RHS``, nonnegative for a supersolution).

``mode="regularized"`` uses the saturated flux and consumption factors of the
computed problem, so every residual is an identity up to discretization error.
``mode="limit"`` swaps in the unregularized integrands; the difference between
the modes is the regularization gap.

Test functions are separable, ``phi(x, t) = phi_x(x) * eta(t)``, with a
cosine series in space (zero normal derivative on every edge of the box) and a
smooth compactly supported profile in time. All their derivatives are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimates import write_csv
from .grid import Grid, face_average_to_centers, face_gradient, integrate
from .model import saturated

MODES = ("regularized", "limit")
MIN_WINDOW_SNAPSHOTS = 8
DEFAULT_A = 10.0


# ---------------------------------------------------------------- test functions


@dataclass(frozen=True)
class CosineSeries:
    """``c0 + sum_k a_k prod_i cos(k_i pi (x_i - origin_i) / L_i)`` on a box."""

    c0: float
    modes: tuple[tuple[float, tuple[int, ...]], ...]
    origin: tuple[float, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        total = sum(abs(a) for a, _ in self.modes)
        if self.c0 < total * (1 - 1e-14):
            raise ValueError(f"c0={self.c0!r} < sum |a_k| = {total!r}: test function could go negative")
        for _, ks in self.modes:
            if len(ks) != len(self.lengths):
                raise ValueError("each wave vector needs one index per axis")
            if any(int(k) != k or k < 0 for k in ks):
                raise ValueError(f"wave indices must be nonnegative integers, got {ks}")

    def _factors(self, points, ks):
        # per-axis cos and -sin*k*pi/L at the given points
        cos, dsin = [], []
        for x, k, a, L in zip(points, ks, self.origin, self.lengths):
            w = k * math.pi / L
            arg = w * (np.asarray(x) - a)
            cos.append(np.cos(arg))
            dsin.append(-w * np.sin(arg))
        return cos, dsin

    def value(self, points) -> np.ndarray:
        out = np.full(np.shape(points[0]), float(self.c0))
        for a, ks in self.modes:
            cos, _ = self._factors(points, ks)
            out = out + a * np.prod(cos, axis=0)
        return out

    def gradient(self, points) -> np.ndarray:
        dim = len(self.lengths)
        out = np.zeros((dim,) + np.shape(points[0]))
        for a, ks in self.modes:
            cos, dsin = self._factors(points, ks)
            for i in range(dim):
                term = dsin[i]
                for j in range(dim):
                    if j != i:
                        term = term * cos[j]
                out[i] += a * term
        return out

    def laplacian(self, points) -> np.ndarray:
        out = np.zeros(np.shape(points[0]))
        for a, ks in self.modes:
            cos, _ = self._factors(points, ks)
            w2 = sum((k * math.pi / L) ** 2 for k, L in zip(ks, self.lengths))
            out = out - a * w2 * np.prod(cos, axis=0)
        return out


def _bump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    q = np.where(inside, 1.0 - s * s, 1.0)
    eta = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
    # d/ds exp(1 - 1/(1 - s^2)) = eta * (-2 s / (1 - s^2)^2)
    deta = np.where(inside, eta * (-2.0 * s / (q * q)), 0.0)
    return eta, deta


@dataclass(frozen=True)
class TimeProfile:
    """Smooth temporal factor with peak value 1.

    ``kind="bump"`` is supported in ``(t1, t2)`` and vanishes to all orders at
    both ends. ``kind="initial"`` equals 1 at ``t = 0`` (with zero slope) and
    vanishes for ``t >= t2``; ``t1`` is then 0. ``t1 == t2`` gives the zero
    profile.
    """

    kind: str
    t1: float
    t2: float

    def __post_init__(self):
        if self.kind not in ("bump", "initial"):
            raise ValueError(f"unknown temporal kind {self.kind!r}")
        if self.kind == "initial" and self.t1 != 0:
            raise ValueError("initial-window profiles start at t = 0")
        if not (0 <= self.t1 <= self.t2):
            raise ValueError(f"window ({self.t1}, {self.t2}) is not an ordered subset of [0, inf)")

    @property
    def empty(self) -> bool:
        return self.t2 <= self.t1

    def __call__(self, t):
        """Return ``(eta(t), eta'(t))``."""
        t = np.asarray(t, dtype=float)
        if self.empty:
            z = np.zeros_like(t)
            return z, z
        if self.kind == "bump":
            half = 0.5 * (self.t2 - self.t1)
            eta, d = _bump((t - 0.5 * (self.t1 + self.t2)) / half)
            return eta, d / half
        eta, d = _bump(t / self.t2)
        eta = np.where(t >= 0, eta, 0.0)
        return eta, np.where(t >= 0, d / self.t2, 0.0)


@dataclass(frozen=True)
class TestFunction:
    """Finite linear combination of separable terms ``coef * phi_x(x) * eta(t)``.

    Supports ``+`` and multiplication by scalars so linearity of the residuals
    can be exercised directly.
    """

    __test__ = False  # not a pytest class

    terms: tuple[tuple[float, CosineSeries, TimeProfile], ...]
    label: str = "phi"

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(self.terms + other.terms, f"({self.label}+{other.label})")

    def __mul__(self, c: float) -> "TestFunction":
        return TestFunction(tuple((c * a, s, p) for a, s, p in self.terms), f"{c:g}*{self.label}")

    __rmul__ = __mul__

    @property
    def support(self) -> tuple[float, float] | None:
        live = [p for _, _, p in self.terms if not p.empty]
        if not live:
            return None
        return min(p.t1 for p in live), max(p.t2 for p in live)

    @property
    def nonnegative(self) -> bool:
        """True when every term is a nonnegative multiple of a nonnegative function."""
        return all(a >= 0 for a, _, _ in self.terms)

    def __call__(self, points, t) -> np.ndarray:
        """Pointwise value at coordinates ``points`` (one array per axis) and time ``t``."""
        out = np.zeros(np.broadcast(*points, np.asarray(t)).shape)
        for a, s, p in self.terms:
            out = out + a * s.value(points) * p(t)[0]
        return out


def make_test_function(kind: str, modes, window, amplitude: float, grid: Grid, T: float,
                       c0: float | None = None, label: str | None = None) -> TestFunction:
    """Build a nonnegative separable test function.

    Parameters
    ----------
    kind : {"bump", "initial"}
        Temporal family. ``window`` is ``(t1, t2)`` for a bump and ``t2`` (or
        ``(0, t2)``) for an initial-window profile.
    modes : sequence of int or tuple of int
        Wave vectors; an int is broadcast to every axis. A zero vector adds a
        constant.
    amplitude : float
        Coefficient of every cosine mode, must be positive.
    c0 : float, optional
        Constant offset; defaults to the smallest value keeping the function
        nonnegative, ``sum |a_k|``.
    """
    if not amplitude > 0:
        raise ValueError("amplitude must be > 0")
    if kind == "initial":
        t1, t2 = (0.0, float(window)) if np.isscalar(window) else map(float, window)
    else:
        t1, t2 = map(float, window)
    if t1 < 0 or t2 > T * (1 + 1e-12) or t2 < t1:
        raise ValueError(f"window ({t1}, {t2}) must lie inside [0, {T}]")
    wave = []
    for m in modes:
        ks = (int(m),) * grid.dim if np.isscalar(m) else tuple(int(k) for k in m)
        wave.append((float(amplitude), ks))
    if c0 is None:
        c0 = sum(abs(a) for a, _ in wave)
    series = CosineSeries(float(c0), tuple(wave), tuple(a for a, _ in grid.extents), grid.lengths)
    profile = TimeProfile(kind, t1, t2)
    if label is None:
        label = f"{kind}[{t1:g},{t2:g}]-k{'/'.join(str(ks) for _, ks in wave) or '0'}"
    return TestFunction(((1.0, series, profile),), label)


def standard_suite(grid: Grid, T: float, amplitude: float = 1.0) -> list[TestFunction]:
    """Two spatial modes (constant and first cosine) times three time windows."""
    windows = [("initial", 0.3 * T), ("bump", (0.2 * T, 0.6 * T)), ("bump", (0.5 * T, 0.95 * T))]
    suite = []
    for modes in ([0], [1]):
        for kind, win in windows:
            suite.append(make_test_function(kind, modes, win, amplitude, grid, T))
    return suite


# ---------------------------------------------------------------- quadrature


class TrajectoryFields:
    """Per-snapshot derived fields, computed once and shared by all test functions."""

    def __init__(self, traj):
        self.traj = traj
        self.grid: Grid = traj.grid
        self.params = traj.params
        self.times = traj.times
        self.weights = _trapezoid_weights(self.times)
        self._cache: dict[int, dict[str, np.ndarray]] = {}

    def __getitem__(self, n: int) -> dict[str, np.ndarray]:
        if n not in self._cache:
            g, p = self.grid, self.params
            s = self.traj.snapshots[n]
            u, v = s.u, s.v
            log_u1 = np.log1p(u)
            self._cache[n] = {
                "u": u,
                "v": v,
                "sat": saturated(u, p.eps),
                "log_u1": log_u1,
                "grad_v": face_average_to_centers(face_gradient(v, g), g),
                "grad_log_v": face_average_to_centers(face_gradient(np.log(v), g), g),
                "grad_log_u1": face_average_to_centers(face_gradient(log_u1, g), g),
            }
        return self._cache[n]


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    if t.size > 1:
        d = np.diff(t)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=0)


TERM_NAMES = {
    "S": ("u_phi_t", "u0_phi0", "u_lap_phi", "flux", "growth", "damping"),
    "V": ("v_psi_t", "v0_psi0", "grad_v_grad_psi", "uptake"),
    "L": ("log_u_phi_t", "log_u0_phi0", "grad_log_u_grad_phi", "phi_grad_log_u_sq",
          "flux_cross", "flux_quad", "growth_log", "damping_log"),
}


def form_terms(traj, phi: TestFunction, mode: str = "regularized",
               fields: TrajectoryFields | None = None) -> dict[str, dict[str, float]]:
    """Every space-time integral entering the three forms, keyed by form letter.

    Raises ``ValueError`` when a nonempty temporal window holds fewer than
    eight stored snapshots.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    fields = TrajectoryFields(traj) if fields is None else fields
    g, p = fields.grid, fields.params
    t, w = fields.times, fields.weights
    terms = {form: dict.fromkeys(names, 0.0) for form, names in TERM_NAMES.items()}
    reg = mode == "regularized"
    mesh = g.mesh

    for coef, series, prof in phi.terms:
        if prof.empty or coef == 0:
            continue
        inside = np.flatnonzero((t >= prof.t1) & (t <= prof.t2))
        if inside.size < MIN_WINDOW_SNAPSHOTS:
            raise ValueError(
                f"window [{prof.t1}, {prof.t2}] holds {inside.size} snapshots, "
                f"need at least {MIN_WINDOW_SNAPSHOTS}"
            )
        px = series.value(mesh)
        gpx = series.gradient(mesh)
        lpx = series.laplacian(mesh)
        eta, deta = prof(t)

        f0 = fields[0]
        e0 = coef * float(eta[0])
        if e0 != 0:
            terms["S"]["u0_phi0"] += e0 * integrate(f0["u"] * px, g)
            terms["V"]["v0_psi0"] += e0 * integrate(f0["v"] * px, g)
            terms["L"]["log_u0_phi0"] += e0 * integrate(f0["log_u1"] * px, g)

        live = np.flatnonzero((w > 0) & ((eta != 0) | (deta != 0)))
        for n in live:
            f = fields[n]
            u, v = f["u"], f["v"]
            a_t = coef * w[n] * deta[n]
            a = coef * w[n] * eta[n]
            flux_u = f["sat"] if reg else u
            uptake = u * v / ((1 + p.eps * u) * (1 + p.eps * v)) if reg else u * v
            ratio = flux_u / (u + 1.0)
            gp_glv = _dot(gpx, f["grad_log_v"])
            glv_glu = _dot(f["grad_log_v"], f["grad_log_u1"])

            S, V, L = terms["S"], terms["V"], terms["L"]
            S["u_phi_t"] += a_t * integrate(u * px, g)
            S["u_lap_phi"] += a * integrate(u * lpx, g)
            S["flux"] += a * integrate(flux_u * gp_glv, g)
            S["growth"] += a * integrate(u * px, g)
            S["damping"] += a * integrate(u * u * px, g)

            V["v_psi_t"] += a_t * integrate(v * px, g)
            V["grad_v_grad_psi"] += a * integrate(_dot(f["grad_v"], gpx), g)
            V["uptake"] += a * integrate(uptake * px, g)

            L["log_u_phi_t"] += a_t * integrate(f["log_u1"] * px, g)
            L["grad_log_u_grad_phi"] += a * integrate(_dot(f["grad_log_u1"], gpx), g)
            L["phi_grad_log_u_sq"] += a * integrate(_dot(f["grad_log_u1"], f["grad_log_u1"]) * px, g)
            L["flux_cross"] += a * integrate(ratio * gp_glv, g)
            L["flux_quad"] += a * integrate(ratio * glv_glu * px, g)
            L["growth_log"] += a * integrate(u / (u + 1.0) * px, g)
            L["damping_log"] += a * integrate(u * u / (u + 1.0) * px, g)

    # fold the parameters in so each entry is a complete integral term
    terms["S"]["flux"] *= p.chi
    terms["S"]["growth"] *= p.kappa
    terms["S"]["damping"] *= p.mu
    terms["L"]["flux_cross"] *= p.chi
    terms["L"]["flux_quad"] *= p.chi
    terms["L"]["growth_log"] *= p.kappa
    terms["L"]["damping_log"] *= p.mu
    return terms


def _S(T: dict[str, float]) -> float:
    lhs = -T["u_phi_t"] - T["u0_phi0"]
    rhs = T["u_lap_phi"] + T["flux"] + T["growth"] - T["damping"]
    return rhs - lhs


def _V(T: dict[str, float]) -> float:
    lhs = -T["v_psi_t"] - T["v0_psi0"]
    rhs = -T["grad_v_grad_psi"] - T["uptake"]
    return lhs - rhs


def _L(T: dict[str, float]) -> float:
    lhs = -T["log_u_phi_t"] - T["log_u0_phi0"]
    rhs = (
        -T["grad_log_u_grad_phi"]
        + T["phi_grad_log_u_sq"]
        + T["flux_cross"]
        - T["flux_quad"]
        + T["growth_log"]
        - T["damping_log"]
    )
    return lhs - rhs


def subsolution_residual(traj, phi: TestFunction, mode: str = "regularized", fields=None) -> float:
    """``S = RHS - LHS`` of the subsolution form; ``S >= 0`` certifies it."""
    return _S(form_terms(traj, phi, mode, fields)["S"])


def v_identity_residual(traj, psi: TestFunction, mode: str = "regularized", fields=None) -> float:
    """``V = LHS - RHS`` of the signal identity (``psi`` may change sign)."""
    return _V(form_terms(traj, psi, mode, fields)["V"])


def supersolution_residual(traj, phi: TestFunction, mode: str = "regularized", fields=None) -> float:
    """``L = LHS - RHS`` of the logarithmic form; ``L >= 0`` certifies it."""
    return _L(form_terms(traj, phi, mode, fields)["L"])


# ---------------------------------------------------------------- audit


@dataclass(frozen=True)
class ResidualRow:
    testfn_id: str
    mode: str
    S: float
    V: float
    L: float
    tol: float
    scale: float
    passed: bool


@dataclass
class WeakFormReport:
    rows: list[ResidualRow]
    gaps: dict[str, dict[str, float]]
    h: float
    dt: float
    n_snapshots: int
    A: float
    suite: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def write_csv(self, path) -> None:
        out = [
            {"testfn_id": r.testfn_id, "mode": r.mode, "S": r.S, "V": r.V, "L": r.L, "tol": r.tol, "pass": r.passed}
            for r in self.rows
        ]
        write_csv(out, path, ["testfn_id", "mode", "S", "V", "L", "tol", "pass"])


def audit(traj, suite, A: float = DEFAULT_A) -> WeakFormReport:
    """Evaluate all three forms for every test function in both modes.

    The tolerance for one test function and mode is
    ``A * (h + dt) * max |integral term|`` over the three forms. Regularized
    rows pass when ``|S|, |V|, |L| <= tol``; limit rows pass when
    ``S >= -tol`` and ``L >= -tol`` (the signal identity is only reported there,
    since it holds with an order-``eps`` defect).
    """
    suite = list(suite)
    if not suite:
        raise ValueError("test-function suite is empty")
    fields = TrajectoryFields(traj)
    h = traj.grid.h_max
    dt = traj.dt_used
    rows, gaps = [], {}
    for k, phi in enumerate(suite):
        tid = phi.label or f"phi{k}"
        res = {}
        for mode in MODES:
            terms = form_terms(traj, phi, mode, fields)
            scale = max((abs(x) for form in terms.values() for x in form.values()), default=0.0)
            tol = A * (h + dt) * scale
            S, V, L = _S(terms["S"]), _V(terms["V"]), _L(terms["L"])
            if mode == "regularized":
                ok = abs(S) <= tol and abs(V) <= tol and abs(L) <= tol
            else:
                ok = S >= -tol and L >= -tol
            rows.append(ResidualRow(tid, mode, S, V, L, tol, scale, bool(ok)))
            res[mode] = (S, V, L)
        (s0, v0, l0), (s1, v1, l1) = res["regularized"], res["limit"]
        gaps[tid] = {"S": s1 - s0, "V": v1 - v0, "L": l1 - l0}
    return WeakFormReport(rows, gaps, h, dt, len(traj.snapshots), A, [phi.label for phi in suite])
