"""Right-hand sides of the regularized chemotaxis system.

The cell equation carries the saturated singular flux
``chi * u/((1 + eps u) v) * grad v`` and a logistic source ``kappa u - mu u^2``;
the signal is consumed at rate ``u v / ((1 + eps u)(1 + eps v))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, face_gradient, pad_faces


class InvariantBreach(RuntimeError):
    """A state violated u >= 0 or v > 0 (or produced non-finite values)."""


@dataclass(frozen=True)
class ModelParams:
    chi: float
    kappa: float
    mu: float
    eps: float
    T_end: float

    def __post_init__(self):
        for name in ("chi", "kappa", "mu", "eps", "T_end"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.chi < 0:
            raise ValueError("chi must be >= 0 (hypothesis chi >= 0)")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0 (hypothesis kappa >= 0)")
        if self.mu <= 0:
            raise ValueError("mu must be > 0 (hypothesis mu > 0)")
        if self.eps <= 0:
            raise ValueError("eps must be > 0 (regularization parameter)")
        if not self.T_end > 0:
            raise ValueError("T_end must be > 0")

    @property
    def carrying_capacity(self) -> float:
        return self.kappa / self.mu


@dataclass(frozen=True)
class State:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def validate(self, v_floor: float = 0.0) -> "State":
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise InvariantBreach(f"non-finite values at t={self.t!r}")
        if np.any(self.u < 0):
            i = np.unravel_index(np.argmin(self.u), self.u.shape)
            raise InvariantBreach(f"u < 0 at cell {i} (u={self.u[i]!r}) at t={self.t!r}")
        if np.any(self.v <= v_floor):
            i = np.unravel_index(np.argmin(self.v), self.v.shape)
            raise InvariantBreach(f"v <= {v_floor!r} at cell {i} (v={self.v[i]!r}) at t={self.t!r}")
        return self


def saturated(u, eps: float):
    """s(u) = u / (1 + eps u), bounded by 1/eps."""
    return u / (1.0 + eps * u)


def logistic_reaction(u_val, p: ModelParams):
    return p.kappa * u_val - p.mu * u_val * u_val


def consumption(u_val, v_val, p: ModelParams):
    """Regularized signal consumption u v / ((1 + eps u)(1 + eps v))."""
    return u_val * v_val / ((1.0 + p.eps * u_val) * (1.0 + p.eps * v_val))


def consumption_rate(u_val, v_val, p: ModelParams):
    """Consumption per unit signal: u / ((1 + eps u)(1 + eps v))."""
    return u_val / ((1.0 + p.eps * u_val) * (1.0 + p.eps * v_val))


def _lo(x: np.ndarray, axis: int) -> np.ndarray:
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(0, -1)
    return x[tuple(idx)]


def _hi(x: np.ndarray, axis: int) -> np.ndarray:
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(1, None)
    return x[tuple(idx)]


def harmonic_face_mean(v: np.ndarray, axis: int) -> np.ndarray:
    left, right = _lo(v, axis), _hi(v, axis)
    return 2.0 * left * right / (left + right)


def _donor(a: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    # velocity > 0 points from left to right, so the left cell donates
    return np.where(a > 0, left, right)


def _face_drift(state: State, p: ModelParams, g: Grid):
    """Per axis: interior-face drift ``chi grad v / vbar`` and donor u values."""
    grads = face_gradient(state.v, g)
    out = []
    for axis in range(g.dim):
        vbar = harmonic_face_mean(state.v, axis)
        if not np.all(vbar > 0):
            raise InvariantBreach("face-averaged signal is not positive")
        gv = _hi(_lo(grads[axis], axis), axis)
        a = p.chi * gv / vbar
        out.append((a, _donor(a, _lo(state.u, axis), _hi(state.u, axis))))
    return out


def chemotactic_flux(state: State, p: ModelParams, g: Grid) -> tuple[np.ndarray, ...]:
    """Donor-cell chemotactic flux on every face.

    ``F = chi * s(u_donor) * (grad v)_face / vbar`` with ``vbar`` the harmonic
    mean of the two adjacent signal values and ``s(u) = u/(1 + eps u)``.
    Boundary faces carry zero.
    """
    faces = []
    for axis, (a, u_don) in enumerate(_face_drift(state, p, g)):
        faces.append(pad_faces(a * saturated(u_don, p.eps), axis))
    return tuple(faces)


def face_velocity(state: State, p: ModelParams, g: Grid) -> tuple[np.ndarray, ...]:
    """Transport velocity of u on every face, so that ``F = w * u_donor``.

    ``w = chi (grad v)_face / ((1 + eps u_donor) vbar)``; zero on boundary faces.
    """
    faces = []
    for axis, (a, u_don) in enumerate(_face_drift(state, p, g)):
        faces.append(pad_faces(a / (1.0 + p.eps * u_don), axis))
    return tuple(faces)
