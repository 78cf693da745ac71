"""Acceptance suite: one test per criterion, at the stated tolerances.

Every test is marked ``acceptance``; run them alone with ``pytest -m acceptance``.
"""
import time

import numpy as np
import pytest

from landscapelab.agmon import agmon_distance_field
from landscapelab.counting import counting_sweep
from landscapelab.grid import Grid, ScalarField
from landscapelab.landscape import (green_row_sums, landscape_bounded, landscape_exhaustion,
                                    landscape_magnetic_surrogate, shared_node_defect)
from landscapelab.maximal import maximal_function
from landscapelab.operators import (AntisymmetricField, EdgePhaseField, SelectionOfPairs, assemble_magnetic,
                                    assemble_real, enumerate_admissible_selections, magnetic_gradient)
from landscapelab.potentials import (check_kato_and_doubling, example1_vector_potential,
                                     generate_example1_field, landau_vector_potential)
from landscapelab.solvers import lowest_eigenpairs
from landscapelab.verify import (TestFunctionSet, check_decay_eigenfunction, check_decay_green,
                                 check_decay_lax_milgram, check_fefferman_phong, check_harnack_and_longdistance,
                                 check_uncertainty_magnetic, check_uncertainty_nonmagnetic, compare_spread,
                                 window_mask)

pytestmark = pytest.mark.acceptance


def sq(g):
    return ScalarField(g, np.sum(g.coordinates ** 2, axis=-1), "|x|^2")


def centre(g):
    return tuple(s // 2 for s in g.shape)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()

    def __exit__(self, *exc):
        if exc[0] is None:
            assert time.perf_counter() - self.start < self.seconds


def landau(g, b=1.0):
    ph = EdgePhaseField.from_vector_potential(g, landau_vector_potential(b))
    B = AntisymmetricField.from_components(g, {(0, 1): np.full(g.shape, b)})
    return ph, B


def test_exhaustion_monotone_and_converging():
    with Budget(120):
        res = landscape_exhaustion(sq, 0.25, 3, R0=2.0, schedule=[2.0, 4.0, 8.0])
    assert shared_node_defect(res) <= 1e-8
    assert res.increments[-1] < 1e-4


def test_green_identity():
    with Budget(10):
        g = Grid.box([0.0] * 3, [1.1] * 3, 0.1)  # 10 interior nodes per axis
        V = ScalarField(g, 1 + sq(g).values)
        res = landscape_bounded(g, None, V)
        assert res.operator.n == 1000
        rows = green_row_sums(res.operator)
    assert np.max(np.abs(rows.values - res.u.values)) <= 1e-8


def _nonmagnetic_uncertainty(g, V):
    res = landscape_bounded(g, None, V)
    fs = TestFunctionSet(g, count=50, seed=0)
    rep = check_uncertainty_nonmagnetic(res.u, None, V, fs, M=res.operator)
    fp = check_fefferman_phong(maximal_function(V, 1.0), V, fs)
    return rep, fp


def test_uncertainty_principles():
    with Budget(180):
        reports = []
        g = Grid.cube(2.0, 0.2, 3)
        reports += _nonmagnetic_uncertainty(g, ScalarField(g, np.ones(g.shape)))
        g = Grid.cube(3.0, 0.25, 3)
        reports += _nonmagnetic_uncertainty(g, sq(g))

        g = Grid.cube(3.0, 0.1, 2)
        ph, B = landau(g)
        uS = landscape_magnetic_surrogate(g, B, 0.0, SelectionOfPairs.upper(2))
        reports.append(check_uncertainty_magnetic(uS, ph, 0.0, TestFunctionSet(g, count=50, complex_=True)))

        g = Grid.cube(2.0, 0.125, 3)
        ph = EdgePhaseField.from_vector_potential(g, example1_vector_potential(0.9))
        B = generate_example1_field(0.9, g)[1]
        S = SelectionOfPairs.cyclic(3)
        uS = landscape_magnetic_surrogate(g, B, 0.0, S)
        fs = TestFunctionSet(g, count=50, complex_=True)
        reports.append(check_uncertainty_magnetic(uS, ph, 0.0, fs))
        eff = B.selection_sum(S)
        reports.append(check_fefferman_phong(maximal_function(eff, 1.0), 0.0, fs, phases=ph))
    violations = [(r.id, c.name) for r in reports for c in r.checks if not c.passed]
    assert violations == []
    for r in reports:
        if r.id.startswith("uncertainty"):
            assert len(r.checks) >= 50


def _spread(V_of, h, half=6.0, window=3.0):
    g = Grid.cube(half, h, 3)
    V = V_of(g)
    u = landscape_bounded(g, None, V).u
    win = window_mask(g, window)
    m = maximal_function(V, 1.0, nodes=win)
    return compare_spread(u, m, win)[0]


@pytest.mark.parametrize("name", ["quadratic", "exponential"])
def test_u_equivalent_to_inverse_m_squared(name):
    V_of = sq if name == "quadratic" else (
        lambda g: ScalarField(g, np.exp(-np.linalg.norm(g.coordinates, axis=-1)) + 0.01))
    with Budget(300):
        coarse = _spread(V_of, 0.25)
        fine = _spread(V_of, 0.125)
    assert coarse <= 50
    assert abs(fine - coarse) / coarse <= 0.25


def test_closed_form_oracles():
    with Budget(60):
        g = Grid.box([-1.0], [1.0], 0.01)
        u = landscape_bounded(g, None, 1.0).u.values
        x = g.coordinates[..., 0]
        assert np.max(np.abs(u - (1 - np.cosh(x) / np.cosh(1.0)))) <= 1e-4

        g = Grid.cube(2.0, 0.1, 3)
        win = window_mask(g, 0.5)
        m = maximal_function(g.ones(), 1.0, nodes=win)
        vals = m.m.values[m.valid & win]
        assert np.max(np.abs(vals / np.sqrt(4 * np.pi / 3) - 1)) <= 0.03

        for dim, h in ((2, 0.125), (3, 0.25)):
            g = Grid.cube(2.0, h, dim)
            c = 2.5
            src = centre(g)
            rho = agmon_distance_field(ScalarField(g, np.full(g.shape, c)), [g.ravel_index(src)]).rho.values
            d = np.sqrt(c) * np.linalg.norm(g.coordinates - g.coordinates[src], axis=-1)
            nz = d > 0
            assert np.max(np.abs(rho[nz] / d[nz] - 1)) <= 0.08
            for ax in range(dim):
                line = tuple(slice(None) if j == ax else src[j] for j in range(dim))
                assert np.max(np.abs(rho[line] - d[line])) <= 1e-10

        g = Grid.box([0.0], [2.0], 0.01)
        x = g.coordinates[..., 0]
        a = g.nearest_index([0.5])
        rho = agmon_distance_field(ScalarField(g, x ** 2), [g.ravel_index(a)]).rho.values
        assert np.max(np.abs(rho - np.abs(x ** 2 - 0.25) / 2)) <= 1e-3


def _ground_state_decay(g, V, margin, **kw):
    res = landscape_bounded(g, None, V)
    spec = lowest_eigenpairs(res.operator, 1)
    psi = res.operator.extend(np.abs(spec.eigenvectors[:, 0]))
    return check_decay_eigenfunction(res.operator, res.u, float(spec.eigenvalues[0]), psi,
                                     boundary_margin=margin, **kw)


def test_eigenfunction_decay():
    with Budget(120):
        g = Grid.cube(6.0, 0.02, 1)
        ho = _ground_state_decay(g, sq(g), 0.5, slope_min=0.8, corr_min=0.95)
        g = Grid.cube(4.0, 0.05, 2)
        x = g.coordinates
        V = 10 * np.minimum(np.sum((x - [1.5, 0]) ** 2, -1), np.sum((x + [1.5, 0]) ** 2, -1))
        dw = _ground_state_decay(g, ScalarField(g, V), 0.5)
    assert 0.8 <= ho.constants["slope"] <= 1.2
    assert ho.constants["correlation"] >= 0.95
    assert dw.constants["slope"] >= 0.2
    assert dw.constants["correlation"] >= 0.9
    assert ho.passed and dw.passed


def test_green_decay():
    with Budget(300):
        g = Grid.cube(4.0, 0.2, 3)
        res = landscape_bounded(g, None, 1.0)
        yuk = check_decay_green(res.operator, res.u, centre(g), shen=True, boundary_margin=1.0)
        g = Grid.cube(5.0, 0.25, 3)
        res = landscape_bounded(g, None, sq(g))
        quad = check_decay_green(res.operator, res.u, centre(g), shen=True, boundary_margin=0.5)
    for key in ("alpha", "eps1"):
        assert 0.5 <= yuk.constants[key] <= 1.2
        assert np.isfinite(yuk.constants["C_upper"]) and np.isfinite(yuk.constants["C_lower"])
    assert quad.constants["alpha"] >= 0.1
    assert quad.constants["eps1"] > 0 and np.isfinite(quad.constants["C_lower"])
    assert quad.constants["euclid_rate"] >= 0.2 / np.sqrt(quad.constants["U"])
    assert yuk.passed and quad.passed


def _landau_lax_milgram(h):
    g = Grid.cube(4.0, h, 2)
    ph, B = landau(g)
    uS = landscape_magnetic_surrogate(g, B, 0.0, SelectionOfPairs.upper(2))
    M = assemble_magnetic(g, ph, 0.0)
    r2 = np.sum((g.coordinates - [-1.0, 0.0]) ** 2, -1)
    f = np.maximum(0.0, 1 - r2 / 0.75 ** 2) ** 2
    return M, uS, check_decay_lax_milgram(M, uS.u, f, eps_ladder=(0.1,))


def test_magnetic_decay():
    with Budget(180):
        M, uS, lm = _landau_lax_milgram(0.1)
        _, _, lm_fine = _landau_lax_milgram(0.05)
        green = check_decay_green(M, uS.u, centre(M.grid), boundary_margin=0.5)
    C, C_fine = lm.constants["C_fit[0.1]"], lm_fine.constants["C_fit[0.1]"]
    assert lm.passed and lm_fine.passed
    assert abs(C_fine - C) / C <= 0.25
    assert green.constants["alpha"] >= 0.1 and np.isfinite(green.constants["C_upper"])


def test_counting_sandwich():
    with Budget(600):
        g = Grid.cube(4.0, 0.25, 3)
        M = assemble_real(g, None, sq(g))
        rep = counting_sweep(M, [2.0, 4.0, 8.0, 16.0], lambda x: np.sum(x ** 2, -1),
                             lower=g.lower, upper=g.upper)
    assert rep.feasible
    assert rep.c1 >= 1 / 16 and rep.c2 <= 16


def test_selection_machinery():
    with Budget(30):
        g = Grid.cube(1.0, 0.125, 3)
        B = generate_example1_field(0.9, g)[1]
        search = enumerate_admissible_selections(B)
        assert search.maximal == SelectionOfPairs.cyclic(3)
        assert search.maximal in search.admissible
        np.testing.assert_allclose(B.selection_sum(search.maximal).values, B.norm().values, rtol=0, atol=1e-10)
        V = ScalarField(g, -B.norm().values / (2 * g.dim))
        assert search.maximal in enumerate_admissible_selections(B, V).admissible


def test_negative_controls():
    with Budget(120):
        fields = []
        for seed, h in ((0, 0.25), (1, 0.125)):
            g = Grid.cube(4.0, h, 3)
            V = ScalarField(g, np.random.default_rng(seed).uniform(0, 400, g.shape))
            fields.append((g, V, landscape_bounded(g, None, V).u))
        g, V, u = fields[0]
        assert not check_kato_and_doubling(V, seed=0).is_shen
        g2, _, u2 = fields[1]
        rep = check_harnack_and_longdistance(u, window_mask(g, 2.0), refined=(u2, window_mask(g2, 2.0)))
        assert "not slowly varying" in rep.flags and not rep.passed

        def compact(grid):
            return ScalarField(grid, np.all(np.abs(grid.coordinates) <= 1, axis=-1).astype(float))

        res = landscape_exhaustion(compact, 0.25, 3, R0=2.0, max_stages=4)
    assert res.diverged


def test_diamagnetic_and_gauge():
    with Budget(30):
        rng = np.random.default_rng(0)
        g = Grid.cube(1.0, 1 / 16, 3)
        shapes = [tuple(s - (j == ax) for j, s in enumerate(g.shape)) for ax in range(3)]
        ph = EdgePhaseField(g, tuple(rng.uniform(-np.pi, np.pi, s) for s in shapes))
        f = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
        D = magnetic_gradient(g, ph, f)
        D0 = magnetic_gradient(g, EdgePhaseField.zero(g), np.abs(f))
        assert D.size >= 10 ** 5
        assert int(np.sum(np.abs(D0) > np.abs(D) * (1 + 1e-12) + 1e-12)) == 0

        g = Grid.cube(2.0, 0.125, 2)
        ph, _ = landau(g)
        phi = rng.uniform(-3, 3, g.shape)
        w = lowest_eigenpairs(assemble_magnetic(g, ph, 0.0), 20).eigenvalues
        w2 = lowest_eigenpairs(assemble_magnetic(g, ph.gauge_shift(phi), 0.0), 20).eigenvalues
    assert np.max(np.abs(w - w2)) <= 1e-8
