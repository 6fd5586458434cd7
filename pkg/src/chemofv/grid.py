"""Cell-centered rectangular grids with zero-flux (Neumann) closure.

Fields are plain ``numpy`` arrays whose shape equals ``Grid.shape`` (row-major).
Face data for axis ``i`` is an array with ``n_i + 1`` entries along that axis;
the two boundary faces always carry zero flux.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

MIN_CELLS = 4


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh on an interval (1D) or rectangle (2D)."""

    dim: int
    extents: tuple[tuple[float, float], ...]
    n_cells: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.extents) != self.dim or len(self.n_cells) != self.dim:
            raise ValueError("need one extent and one cell count per axis")
        for axis, ((a, b), n) in enumerate(zip(self.extents, self.n_cells)):
            if not (np.isfinite(a) and np.isfinite(b)) or b - a <= 0:
                raise ValueError(f"axis {axis}: extent [{a}, {b}] has non-positive length")
            if int(n) != n or n < MIN_CELLS:
                raise ValueError(f"axis {axis}: need at least {MIN_CELLS} cells, got {n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.n_cells)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def lengths(self) -> tuple[float, ...]:
        return tuple(float(b - a) for a, b in self.extents)

    @cached_property
    def h(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @cached_property
    def domain_measure(self) -> float:
        # defined through the cells so that integrate(1) == |Omega| holds bitwise
        return self.cell_volume * self.size

    @property
    def h_max(self) -> float:
        return max(self.h)

    def centers(self, axis: int) -> np.ndarray:
        """1D array of cell-center coordinates along ``axis``."""
        a = self.extents[axis][0]
        return a + (np.arange(self.shape[axis]) + 0.5) * self.h[axis]

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates broadcast to the full field shape."""
        return tuple(np.meshgrid(*(self.centers(i) for i in range(self.dim)), indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def check_field(self, f, name: str = "field") -> np.ndarray:
        """Return ``f`` as a float array, raising if its shape or values are invalid."""
        arr = np.asarray(f, dtype=float)
        if arr.shape != self.shape:
            raise ValueError(f"{name} has shape {arr.shape}, grid expects {self.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite values")
        return arr


def build_grid(dim: int, extents, n_cells) -> Grid:
    """Build a grid from per-axis ``(a, b)`` extents and cell counts.

    Scalars are accepted for a 1D grid: ``build_grid(1, (0, 1), 8)``.
    """
    ext = np.asarray(extents, dtype=float).reshape(-1, 2)
    cells = np.atleast_1d(np.asarray(n_cells))
    return Grid(
        dim=int(dim),
        extents=tuple((float(a), float(b)) for a, b in ext),
        n_cells=tuple(int(n) for n in cells),
    )


def _slice(axis: int, sl: slice, ndim: int):
    idx = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


def pad_faces(interior: np.ndarray, axis: int) -> np.ndarray:
    """Extend interior-face data along ``axis`` with zero boundary faces."""
    shape = list(interior.shape)
    shape[axis] += 2
    out = np.zeros(shape)
    out[_slice(axis, slice(1, -1), interior.ndim)] = interior
    return out


def face_gradient(f: np.ndarray, g: Grid) -> tuple[np.ndarray, ...]:
    """Two-point difference quotients on every face, zero on boundary faces."""
    out = []
    for axis in range(g.dim):
        out.append(pad_faces(np.diff(f, axis=axis) / g.h[axis], axis))
    return tuple(out)


def divergence(faces, g: Grid) -> np.ndarray:
    """Cellwise sum over axes of (right face - left face) / h."""
    total = np.diff(faces[0], axis=0) / g.h[0]
    for axis in range(1, g.dim):
        total = total + np.diff(faces[axis], axis=axis) / g.h[axis]
    return total


def laplacian(f: np.ndarray, g: Grid) -> np.ndarray:
    """3-/5-point Laplacian with mirrored ghost cells.

    Mirroring the adjacent interior value makes the boundary difference vanish,
    so this is exactly ``divergence(face_gradient(f))``.
    """
    return divergence(face_gradient(f, g), g)


def integrate(f, g: Grid) -> float:
    """Midpoint rule: cell volume times the sum of cell values."""
    return g.cell_volume * float(np.sum(f))


def face_average_to_centers(faces, g: Grid) -> np.ndarray:
    """Average the two faces bounding each cell; returns shape ``(dim, *g.shape)``."""
    out = np.empty((g.dim,) + g.shape)
    for axis in range(g.dim):
        F = faces[axis]
        n = F.shape[axis]
        out[axis] = 0.5 * (F[_slice(axis, slice(0, n - 1), g.dim)] + F[_slice(axis, slice(1, n), g.dim)])
    return out


def face_norm_sq(faces, g: Grid) -> float:
    """Discrete ``int |grad f|^2``: each face weighted by one cell volume."""
    return g.cell_volume * float(sum(np.sum(F * F) for F in faces))


def face_abs_sum(faces, g: Grid) -> float:
    """Discrete ``int |grad f|`` using the per-axis (l1) magnitude.

    Exact in 1D; in 2D it bounds the Euclidean version from above.
    """
    return g.cell_volume * float(sum(np.sum(np.abs(F)) for F in faces))
