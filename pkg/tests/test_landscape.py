import numpy as np
import pytest

from landscapelab.grid import Grid, ScalarField
from landscapelab.landscape import (green_row_sums, landscape_bounded, landscape_exhaustion,
                                    landscape_magnetic_surrogate, shared_node_defect)
from landscapelab.operators import AntisymmetricField, InadmissibleSelection, SelectionOfPairs


def cosh_oracle(x, c, L):
    return (1 - np.cosh(np.sqrt(c) * x) / np.cosh(np.sqrt(c) * L)) / c


@pytest.mark.parametrize("c", [0.5, 1.0, 4.0])
def test_1d_constant_potential_matches_cosh(c):
    g = Grid.box([-1.0], [1.0], 0.005)
    u = landscape_bounded(g, None, c).u
    x = g.coordinates[..., 0]
    assert np.max(np.abs(u.values - cosh_oracle(x, c, 1.0))) < 1e-5


def test_landscape_rejects_negative_or_zero_potential():
    g = Grid.cube(1.0, 0.25, 2)
    with pytest.raises(ValueError):
        landscape_bounded(g, None, -1.0)
    with pytest.raises(ValueError):
        landscape_bounded(g, None, 0.0)


def test_green_row_sums_reproduce_landscape():
    g = Grid.cube(1.0, 0.25, 3)
    V = ScalarField(g, 1 + g.coordinates[..., 0] ** 2)
    res = landscape_bounded(g, None, V)
    np.testing.assert_allclose(green_row_sums(res.operator).values, res.u.values, atol=1e-10)


def test_landscape_positive_and_below_inverse_min_potential():
    g = Grid.cube(2.0, 0.25, 2)
    V = ScalarField(g, 2 + np.sin(3 * g.coordinates[..., 0]))
    u = landscape_bounded(g, None, V).u.values
    assert np.all(u[g.interior_mask] > 0)
    assert u.max() <= 1 / V.values.min() + 1e-12  # comparison with the constant supersolution


def test_exhaustion_monotone_and_converging():
    V = lambda g: ScalarField(g, 1.0 + np.sum(g.coordinates ** 2, -1))  # noqa: E731
    res = landscape_exhaustion(V, 0.25, 2, R0=1.0, max_stages=4, stop_tol=1e-9)
    assert shared_node_defect(res) <= 1e-10
    assert res.increments == sorted(res.increments, reverse=True)
    assert not res.diverged


def test_exhaustion_flags_compact_potential_in_1d():
    V = lambda g: ScalarField(g, (np.abs(g.coordinates[..., 0]) <= 1).astype(float))  # noqa: E731
    res = landscape_exhaustion(V, 0.05, 1, R0=2.0, max_stages=5)
    assert res.diverged
    assert "fails" in res.message


def test_magnetic_surrogate_uses_selection_sum():
    g = Grid.cube(1.0, 0.125, 2)
    B = AntisymmetricField.from_components(g, {(0, 1): np.full(g.shape, 2.0)})
    res = landscape_magnetic_surrogate(g, B, 0.0, SelectionOfPairs(((0, 1),)))
    ref = landscape_bounded(g, None, 2.0)
    np.testing.assert_allclose(res.u.values, ref.u.values, atol=1e-12)
    with pytest.raises(InadmissibleSelection):
        landscape_magnetic_surrogate(g, B, 0.0, SelectionOfPairs(((1, 0),)))
