import numpy as np
import pytest
import scipy.sparse.linalg as spla

from landscapelab.grid import Grid
from landscapelab.operators import EdgePhaseField, assemble_magnetic, assemble_real
from landscapelab.potentials import landau_vector_potential
from landscapelab.solvers import apply_resolvent, green_column, lowest_eigenpairs, solve_linear


def thomas(a, b, c, d):
    """Tridiagonal solve, sub/main/super diagonals a, b, c (oracle)."""
    n = len(b)
    cp, dp = np.zeros(n), np.zeros(n)
    cp[0], dp[0] = c[0] / b[0], d[0] / b[0]
    for i in range(1, n):
        den = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / den if i < n - 1 else 0.0
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den
    x = np.zeros(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def test_pcg_matches_thomas_in_1d():
    g = Grid.box([0.0], [1.0], 0.01)
    V = 1 + g.coordinates[..., 0] ** 2
    M = assemble_real(g, None, V)
    rhs = np.sin(np.arange(M.n))
    x, rep = solve_linear(M, rhs, tol=1e-13)
    h2 = g.h ** 2
    n = M.n
    oracle = thomas(np.full(n, -1 / h2), 2 / h2 + V[1:-1], np.full(n, -1 / h2), rhs)
    assert rep.converged and rep.method == "cg"
    np.testing.assert_allclose(x, oracle, rtol=1e-9, atol=1e-12)


def test_magnetic_solve_matches_direct():
    g = Grid.cube(1.0, 0.1, 2)
    ph = EdgePhaseField.from_vector_potential(g, landau_vector_potential(3.0))
    M = assemble_magnetic(g, ph, 1.0)
    rhs = np.random.default_rng(1).normal(size=M.n) + 0j
    x, rep = solve_linear(M, rhs, tol=1e-12)
    np.testing.assert_allclose(x, spla.spsolve(M.matrix.tocsc(), rhs), rtol=1e-8, atol=1e-12)


def test_dirichlet_laplacian_eigenvalues_closed_form():
    g = Grid.box([0.0, 0.0], [1.0, 1.0], 1 / 16)
    M = assemble_real(g, None, 0.0)
    spec = lowest_eigenpairs(M, 3)
    h = g.h
    lam = lambda k: 4 / h ** 2 * np.sin(k * np.pi * h / 2) ** 2  # noqa: E731
    expected = sorted([lam(1) + lam(1), lam(1) + lam(2), lam(2) + lam(1)])
    np.testing.assert_allclose(spec.eigenvalues, expected, rtol=1e-9)
    assert np.all(spec.residuals < 1e-6)


def test_green_column_symmetric_and_positive():
    g = Grid.cube(1.0, 0.125, 2)
    M = assemble_real(g, None, 1.0)
    a, b = (5, 5), (9, 11)
    ga, _ = green_column(M, a, tol=1e-13)
    gb, _ = green_column(M, b, tol=1e-13)
    assert ga.values[b] == pytest.approx(gb.values[a], rel=1e-8)
    assert np.all(ga.values[g.interior_mask] > 0)


def test_green_column_rejects_boundary_source():
    g = Grid.cube(1.0, 0.25, 2)
    with pytest.raises(ValueError):
        green_column(assemble_real(g, None, 1.0), (0, 3))


def test_resolvent_definition():
    g = Grid.cube(1.0, 0.125, 2)
    M = assemble_real(g, None, 1.0)
    f = np.random.default_rng(2).normal(size=M.n)
    t = 0.7
    x, _ = apply_resolvent(M, t, f, tol=1e-13)
    np.testing.assert_allclose(x + t * t * (M.matrix @ x), f, atol=1e-9)
