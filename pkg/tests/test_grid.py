import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chemofv.grid import (
    build_grid,
    divergence,
    face_average_to_centers,
    face_gradient,
    integrate,
    laplacian,
)


def test_build_grid_1d_spacing():
    g = build_grid(1, (0, 1), 8)
    assert g.h == (0.125,)
    assert g.domain_measure == 1.0


def test_build_grid_2d_measures():
    g = build_grid(2, [(0, 1), (0, 2)], (4, 8))
    assert g.cell_volume == 0.0625
    assert g.domain_measure == 2.0
    assert g.shape == (4, 8)


@pytest.mark.parametrize(
    "dim, ext, n",
    [(1, (0, -1), 8), (1, (0, 0), 8), (1, (0, 1), 3), (2, [(0, 1), (0, 1)], (4, 2)), (3, [(0, 1)] * 3, (4, 4, 4))],
)
def test_build_grid_rejects(dim, ext, n):
    with pytest.raises(ValueError):
        build_grid(dim, ext, n)


def test_domain_measure_is_cells_times_volume():
    g = build_grid(2, [(0.1, 0.7), (-1.0, 2.3)], (7, 11))
    assert g.domain_measure == g.cell_volume * 77
    assert abs(g.domain_measure - 0.6 * 3.3) < 1e-14


def test_laplacian_of_constant_is_zero():
    g = build_grid(2, [(0, 1), (0, 2)], (5, 6))
    assert np.all(laplacian(g.full(3.7), g) == 0)


def test_laplacian_mirror_ghost_n4():
    g = build_grid(1, (0, 1), 4)
    f = np.array([0.0, 1.0, 1.0, 0.0])
    # hand-evaluated three-point stencil, ghosts equal to the adjacent cell
    expected = np.array([1.0, -1.0, -1.0, 1.0]) / 0.25**2
    np.testing.assert_allclose(laplacian(f, g), expected, rtol=0, atol=1e-12)


def _cos_error(n):
    g = build_grid(1, (0, 1), n)
    x = g.mesh[0]
    return np.max(np.abs(laplacian(np.cos(np.pi * x), g) + np.pi**2 * np.cos(np.pi * x)))


def test_laplacian_cosine_second_order():
    errs = [_cos_error(n) for n in (32, 64, 128, 256)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert errs[-1] < 1e-3
    assert np.all(orders >= 1.9)


def test_laplacian_2d_cosine_second_order():
    def err(n):
        g = build_grid(2, [(0, 1), (0, 2)], (n, 2 * n))
        x, y = g.mesh
        f = np.cos(np.pi * x) * np.cos(np.pi * y / 2)
        lam = np.pi**2 * (1 + 0.25)
        return np.max(np.abs(laplacian(f, g) + lam * f))

    e1, e2 = err(32), err(64)
    assert np.log2(e1 / e2) >= 1.9


def test_face_gradient_constant_and_linear():
    g = build_grid(1, (0, 1), 10)
    assert np.all(face_gradient(g.full(2.0), g)[0] == 0)
    F = face_gradient(g.mesh[0], g)[0]
    assert F.shape == (11,)
    assert F[0] == 0 and F[-1] == 0
    np.testing.assert_allclose(F[1:-1], 1.0, rtol=1e-12)


def test_face_gradient_hand_example():
    g = build_grid(1, (0, 1), 4)
    F = face_gradient(np.array([0.0, 2.0, 2.0, 0.0]), g)[0]
    np.testing.assert_array_equal(F, [0.0, 8.0, 0.0, -8.0, 0.0])


def test_divergence_hand_example():
    # three unit cells need the minimum-size grid of four; the fourth cell sees no flux
    g = build_grid(1, (0, 4), 4)
    faces = (np.array([0.0, 5.0, 0.0, 0.0, 0.0]),)
    np.testing.assert_array_equal(divergence(faces, g), [5.0, -5.0, 0.0, 0.0])


def test_divergence_of_zero_faces():
    g = build_grid(2, [(0, 1), (0, 1)], (4, 5))
    faces = (np.zeros((5, 5)), np.zeros((4, 6)))
    assert np.all(divergence(faces, g) == 0)


def test_integrate_examples():
    g = build_grid(2, [(0, 1), (0, 2)], (4, 8))
    assert integrate(g.full(1.5), g) == 3.0
    g1 = build_grid(1, (0, 1), 64)
    assert abs(integrate(g1.mesh[0], g1) - 0.5) < 1e-15
    h = 1 / 64
    # midpoint rule error for x^2 on [0, 1] is exactly -h^2 f''/24 = -h^2/12
    assert abs(integrate(g1.mesh[0] ** 2, g1) - (1 / 3 - h**2 / 12)) < 1e-14


def test_face_average_to_centers_shape():
    g = build_grid(2, [(0, 1), (0, 1)], (4, 6))
    avg = face_average_to_centers(face_gradient(g.mesh[0] + 2 * g.mesh[1], g), g)
    assert avg.shape == (2, 4, 6)
    np.testing.assert_allclose(avg[0][1:-1], 1.0)
    np.testing.assert_allclose(avg[0][0], 0.5)


fields_1d = arrays(np.float64, st.integers(4, 40), elements=st.floats(-1e3, 1e3))


@settings(max_examples=60, deadline=None)
@given(fields_1d)
def test_laplacian_conserves_and_factorizes(f):
    g = build_grid(1, (0, 2), f.size)
    lap = laplacian(f, g)
    scale = max(1.0, np.max(np.abs(f)))
    assert abs(integrate(lap, g)) <= 1e-12 * scale * f.size / g.h[0]
    np.testing.assert_array_equal(lap, divergence(face_gradient(f, g), g))


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 12), st.integers(4, 12), st.integers(0, 2**32 - 1))
def test_divergence_telescopes_2d(nx, ny, seed):
    rng = np.random.default_rng(seed)
    g = build_grid(2, [(0, 1), (0, 3)], (nx, ny))
    fx = np.zeros((nx + 1, ny))
    fy = np.zeros((nx, ny + 1))
    fx[1:-1] = rng.normal(size=(nx - 1, ny))
    fy[:, 1:-1] = rng.normal(size=(nx, ny - 1))
    assert abs(integrate(divergence((fx, fy), g), g)) < 1e-12 * nx * ny
