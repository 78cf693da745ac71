import numpy as np
import pytest
import scipy.io

from landscapelab.grid import EdgeSet, Grid, ScalarField
from landscapelab.operators import (AntisymmetricField, EdgePhaseField, MatrixField, SelectionOfPairs,
                                    all_selections, assemble_magnetic, assemble_real,
                                    discrete_field_from_phases, enumerate_admissible_selections,
                                    magnetic_gradient)
from landscapelab.potentials import landau_vector_potential


def test_real_operator_is_symmetric_with_expected_stencil():
    g = Grid.cube(1.0, 0.25, 2)
    M = assemble_real(g, None, 2.0)
    A = M.matrix
    assert abs(A - A.T).max() == 0
    h = g.h
    np.testing.assert_allclose(A.diagonal(), 4 / h ** 2 + 2.0)
    assert M.n == 49


def test_matrix_field_variable_coefficients_stay_symmetric():
    g = Grid.cube(1.0, 0.25, 2)
    x = g.coordinates
    vals = np.zeros(g.shape + (2, 2))
    vals[..., 0, 0] = 1 + x[..., 0] ** 2
    vals[..., 1, 1] = 2.0
    M = assemble_real(g, MatrixField(g, vals, lam=0.5), 0.5)
    assert abs(M.matrix - M.matrix.T).max() < 1e-14
    assert np.all(np.linalg.eigvalsh(M.todense()) > 0)


def test_magnetic_operator_hermitian_exactly():
    g = Grid.cube(1.0, 0.2, 2)
    ph = EdgePhaseField.from_vector_potential(g, landau_vector_potential(1.3))
    M = assemble_magnetic(g, ph, 0.0)
    assert abs(M.matrix - M.matrix.conj().T).max() == 0


def test_zero_phase_magnetic_matches_real_laplacian():
    g = Grid.cube(1.0, 0.25, 3)
    Mm = assemble_magnetic(g, None, 1.0)
    Mr = assemble_real(g, None, 1.0)
    assert abs(Mm.matrix - Mr.matrix).max() < 1e-14


def test_landau_plaquette_flux_sign_convention():
    # a = (b x2, 0) has b_12 = da1/dx2 - da2/dx1 = +b; ccw plaquettes carry -b h^2
    g = Grid.cube(1.0, 0.1, 2)
    ph = EdgePhaseField.from_vector_potential(g, landau_vector_potential(0.7))
    np.testing.assert_allclose(ph.plaquette_flux(0, 1), -0.7 * g.h ** 2, atol=1e-14)
    B = discrete_field_from_phases(ph)
    np.testing.assert_allclose(B.component(0, 1), 0.7, atol=1e-12)
    np.testing.assert_allclose(B.component(1, 0), -0.7, atol=1e-12)


def test_symmetric_gauge_has_same_field():
    g = Grid.cube(1.0, 0.1, 2)
    b1 = discrete_field_from_phases(EdgePhaseField.from_vector_potential(g, landau_vector_potential(1.0)))
    b2 = discrete_field_from_phases(EdgePhaseField.from_vector_potential(g, landau_vector_potential(1.0, "symmetric")))
    np.testing.assert_allclose(b1.values, b2.values, atol=1e-12)


def test_quadratic_form_equals_edge_sum():
    g = Grid.cube(1.0, 0.25, 2)
    rng = np.random.default_rng(0)
    ph = EdgePhaseField.from_vector_potential(g, landau_vector_potential(2.0))
    M = assemble_magnetic(g, ph, 0.0)
    f = np.zeros(g.shape, dtype=complex)
    f[g.interior_mask] = rng.normal(size=M.n) + 1j * rng.normal(size=M.n)
    x = f.ravel()[M.nodes]
    lhs = np.vdot(x, M.matrix @ x).real
    rhs = np.sum(np.abs(magnetic_gradient(g, ph, f)) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_selection_validation():
    with pytest.raises(ValueError):
        SelectionOfPairs(((0, 1), (1, 0)))
    with pytest.raises(ValueError):
        SelectionOfPairs(((1, 1),))
    assert len(all_selections(3)) == 8
    assert SelectionOfPairs.cyclic(3).pairs == ((0, 1), (1, 2), (2, 0))


def test_selection_sum_and_norm():
    g = Grid.cube(1.0, 0.5, 3)
    B = AntisymmetricField.from_components(g, {(0, 1): np.full(g.shape, 2.0), (1, 2): np.full(g.shape, -1.0)})
    np.testing.assert_allclose(B.norm().values, 3.0)
    S = SelectionOfPairs(((0, 1), (2, 1), (0, 2)))
    np.testing.assert_allclose(B.selection_sum(S).values, 3.0)
    search = enumerate_admissible_selections(B, 0.0)
    assert search.maximal == SelectionOfPairs(((0, 1), (2, 1), (0, 2)))
    assert search.maximal in search.admissible


def test_matrix_market_roundtrip(tmp_path):
    g = Grid.cube(1.0, 0.25, 2)
    ph = EdgePhaseField.from_vector_potential(g, landau_vector_potential(1.0))
    M = assemble_magnetic(g, ph, ScalarField(g, np.ones(g.shape)))
    path = tmp_path / "m.mtx"
    M.write_matrix_market(path)
    back = scipy.io.mmread(path).tocsr()
    assert abs(back - M.matrix).max() < 1e-15


def test_edge_set_counts():
    g = Grid.box([0, 0, 0], [1, 1, 0.5], 0.25)
    nx, ny, nz = g.shape
    expected = (nx - 1) * ny * nz + nx * (ny - 1) * nz + nx * ny * (nz - 1)
    assert len(EdgeSet.from_grid(g)) == expected
