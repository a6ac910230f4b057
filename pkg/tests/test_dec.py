import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geomaxwell import (Cochain, build_mesh, codifferential, exterior_derivative, hodge_star,
                        l2_inner, poincare_pair, vector_proxy_to_forms)
from geomaxwell.dec import (derivative_matrix, divergence_cleaning, edge_to_cell_average,
                            face_to_cell_average, solve_graph_laplacian)

import oracles

MESHES = [(1, [7], [1.0], [1.0]), (2, [4, 5], [1.0, 2.0], [1.0, 1.7]),
          (3, [3, 4, 2], [1.0, 0.5, 2.0], [2.0, 1.0, 0.3])]


@pytest.mark.parametrize("dim,cells,ext,met", MESHES)
def test_incidence_matches_enumerated_boundaries(dim, cells, ext, met):
    mesh = build_mesh(dim, cells, ext, met)
    for k in range(dim):
        np.testing.assert_array_equal(mesh.incidence[k].toarray(),
                                      oracles.boundary_matrix(dim, tuple(cells), k))
        assert mesh.incidence[k].dtype.kind == "i"


@pytest.mark.parametrize("dim,cells,ext,met", MESHES)
def test_hodge_matches_measure_ratio(dim, cells, ext, met):
    mesh = build_mesh(dim, cells, ext, met)
    for k in range(dim + 1):
        np.testing.assert_allclose(mesh.hodge[k], oracles.hodge_diagonal(dim, cells, ext, met, k),
                                   rtol=1e-14)


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(1, 3), data=st.data())
def test_exactness_on_random_meshes(dim, data):
    cells = data.draw(st.lists(st.integers(2, 6), min_size=dim, max_size=dim))
    mesh = build_mesh(dim, cells)
    for k in range(dim - 1):
        assert (mesh.incidence[k + 1] @ mesh.incidence[k]).count_nonzero() == 0


def test_twisted_derivative_is_signed_transpose_and_exact():
    mesh = build_mesh(3, [3, 3, 3])
    for j in range(3):
        D = derivative_matrix(mesh, j, "twisted").toarray()
        sign = (-1) ** (3 - j)
        np.testing.assert_array_equal(D, sign * mesh.incidence[2 - j].T.toarray())
    assert not np.any((derivative_matrix(mesh, 1, "twisted") @ derivative_matrix(mesh, 0, "twisted")).toarray())


def test_d_of_vertex_function_is_difference():
    mesh = build_mesh(1, [8], [2.0])
    phi = np.arange(8.0) ** 2
    d = exterior_derivative(mesh, Cochain(0, "straight", phi))
    np.testing.assert_array_equal(d.values, np.roll(phi, -1) - phi)


@pytest.mark.parametrize("dim,cells,ext,met", MESHES)
def test_l2_equals_pairing_with_star(dim, cells, ext, met):
    rng = np.random.default_rng(3)
    mesh = build_mesh(dim, cells, ext, met)
    for k in range(dim + 1):
        for _ in range(10):
            w = Cochain(k, "straight", rng.normal(size=mesh.n_cells(k)))
            eta = Cochain(k, "straight", rng.normal(size=mesh.n_cells(k)))
            lhs = l2_inner(mesh, w, eta)
            assert abs(lhs - poincare_pair(mesh, w, hodge_star(mesh, eta))) <= 1e-12


def test_star_round_trip_and_positivity():
    rng = np.random.default_rng(0)
    mesh = build_mesh(2, [4, 6], [1.0, 3.0], [2.0, 1.0])
    for k in range(3):
        w = Cochain(k, "straight", rng.normal(size=mesh.n_cells(k)))
        back = hodge_star(mesh, hodge_star(mesh, w))
        np.testing.assert_allclose(back.values, w.values, rtol=1e-14)
        assert l2_inner(mesh, w, w) > 0


def test_codifferential_is_adjoint():
    rng = np.random.default_rng(1)
    mesh = build_mesh(3, [3, 4, 3], [1.0, 2.0, 1.5])
    for k in range(3):
        a = Cochain(k, "straight", rng.normal(size=mesh.n_cells(k)))
        b = Cochain(k + 1, "straight", rng.normal(size=mesh.n_cells(k + 1)))
        lhs = l2_inner(mesh, exterior_derivative(mesh, a), b)
        rhs = l2_inner(mesh, a, codifferential(mesh, b))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_gradient_proxy_integrates_exactly():
    # the edge integral of grad(phi) is the endpoint difference (Stokes)
    mesh = build_mesh(2, [6, 5], [2 * np.pi, 2 * np.pi])
    phi = lambda x: np.sin(x[0]) * np.cos(2 * x[1])
    grad = lambda x: np.array([np.cos(x[0]) * np.cos(2 * x[1]), -2 * np.sin(x[0]) * np.sin(2 * x[1])])
    one = vector_proxy_to_forms(mesh, grad, "one_form", order=8)
    verts = mesh.cell_centers(0, ())
    d = exterior_derivative(mesh, Cochain(0, "straight", phi(verts)))
    np.testing.assert_allclose(one.values, d.values, atol=1e-12)


def test_proxy_flavors_and_shapes():
    mesh = build_mesh(3, [3, 3, 3])
    V = np.ones((3, mesh.n_vertices))
    assert vector_proxy_to_forms(mesh, V, "one_form").flavor == "straight"
    assert vector_proxy_to_forms(mesh, V, "one_form", pseudo=True).flavor == "twisted"
    assert vector_proxy_to_forms(mesh, V, "two_form", pseudo=True).flavor == "straight"
    with pytest.raises(ValueError):
        vector_proxy_to_forms(mesh, V[:2], "one_form")
    with pytest.raises(ValueError):
        vector_proxy_to_forms(mesh, V, "three_form")


def test_constant_fields_average_back():
    mesh = build_mesh(3, [3, 4, 2], [1.0, 2.0, 3.0])
    V = np.array([1.0, -2.0, 0.5])[:, None] * np.ones((3, mesh.n_vertices))
    e = vector_proxy_to_forms(mesh, V, "one_form")
    b = vector_proxy_to_forms(mesh, V, "two_form", pseudo=True)
    for i, (Ae, Af) in enumerate(zip(edge_to_cell_average(mesh), face_to_cell_average(mesh))):
        np.testing.assert_allclose(Ae @ e.values, V[i], rtol=1e-14)
        np.testing.assert_allclose(Af @ b.values, V[i], rtol=1e-14)


def test_divergence_cleaning_projects():
    rng = np.random.default_rng(5)
    mesh = build_mesh(3, [4, 3, 3])
    b = Cochain(2, "straight", rng.normal(size=mesh.n_cells(2)))
    clean = divergence_cleaning(mesh, b)
    assert np.max(np.abs(mesh.incidence[2] @ clean.values)) < 1e-12
    again = divergence_cleaning(mesh, clean)
    np.testing.assert_allclose(again.values, clean.values, atol=1e-12)


def test_graph_laplacian_solution():
    mesh = build_mesh(1, [16])
    d0 = mesh.incidence[0].astype(float)
    L = (d0.T @ d0).tocsr()
    rhs = np.sin(2 * np.pi * np.arange(16) / 16)
    phi = solve_graph_laplacian(L, rhs)
    np.testing.assert_allclose(L @ phi, rhs, atol=1e-12)
    assert abs(phi.mean()) < 1e-14


def test_lift_to_3d_keeps_one_dimensional_curl():
    mesh = build_mesh(1, [5], [1.0]).lift_to_3d()
    assert mesh.dimension == 3 and mesh.cells_per_axis == (5, 1, 1)
    C = mesh.incidence[1]
    assert not np.any((mesh.incidence[2] @ C).toarray())


def test_mesh_and_cochain_errors():
    with pytest.raises(ValueError):
        build_mesh(4, [3])
    with pytest.raises(ValueError):
        build_mesh(2, [1, 3])
    with pytest.raises(ValueError):
        build_mesh(1, [3], [-1.0])
    with pytest.raises(ValueError):
        build_mesh(1, [3], metric=[0.0])
    mesh = build_mesh(2, [3, 3])
    w = Cochain(1, "straight", np.zeros(mesh.n_cells(1)))
    with pytest.raises(ValueError):
        poincare_pair(mesh, w, w)
    with pytest.raises(ValueError):
        exterior_derivative(mesh, Cochain(2, "straight", np.zeros(mesh.n_cells(2))))
    with pytest.raises(ValueError):
        l2_inner(mesh, w, Cochain(1, "straight", np.zeros(3)))
    with pytest.raises(ValueError):
        Cochain(0, "crooked", np.zeros(1))
    with pytest.raises(ValueError):
        w + Cochain(0, "straight", np.zeros(mesh.n_cells(0)))
