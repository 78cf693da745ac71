import json

import numpy as np
import pytest

from landscapelab.grid import Grid, ScalarField
from landscapelab.landscape import landscape_bounded, landscape_magnetic_surrogate
from landscapelab.maximal import maximal_function
from landscapelab.operators import AntisymmetricField, EdgePhaseField, SelectionOfPairs, assemble_real
from landscapelab.potentials import landau_vector_potential
from landscapelab.verify import (Check, ExperimentReport, TestFunctionSet, check_compare_u_vs_m,
                                 check_decay_lax_milgram, check_fefferman_phong, check_uncertainty_magnetic,
                                 check_uncertainty_nonmagnetic, envelope_slopes, ground_state_terms,
                                 long_distance_fit, window_mask)


@pytest.fixture(scope="module")
def yukawa():
    g = Grid.cube(2.0, 0.2, 3)
    V = ScalarField(g, np.ones(g.shape))
    return g, V, landscape_bounded(g, None, V)


def test_test_functions_vanish_near_boundary_and_are_seeded():
    g = Grid.cube(1.0, 0.1, 2)
    a = TestFunctionSet(g, count=5, seed=3, margin=2)
    b = TestFunctionSet(g, count=5, seed=3, margin=2)
    layer = g.distance_to_boundary() < 2 * g.h - 1e-12
    for f, f2 in zip(a, b):
        np.testing.assert_array_equal(f, f2)
        assert np.all(f[layer] == 0)
        assert np.any(f != 0)
    c = TestFunctionSet(g, count=2, complex_=True)
    assert np.iscomplexobj(c.functions[0])


def test_ground_state_identity_is_exact(yukawa):
    g, V, res = yukawa
    M = res.operator
    u = res.u.values.ravel()[M.nodes]
    f = np.random.default_rng(1).normal(size=M.n)
    grad, pot = ground_state_terms(M, u, f)
    assert grad + pot == pytest.approx(f @ (M.matrix @ f), rel=1e-9)


def test_nonmagnetic_uncertainty_passes_and_detects_wrong_u(yukawa):
    g, V, res = yukawa
    fs = TestFunctionSet(g, count=10)
    rep = check_uncertainty_nonmagnetic(res.u, None, V, fs, M=res.operator)
    assert rep.passed and rep.constants["min_relative_margin"] > 0
    # an underestimated landscape (u/4) inflates int f^2/u and must violate the bound
    bad = res.u.with_values(res.u.values / 4)
    assert not check_uncertainty_nonmagnetic(bad, None, V, fs, M=res.operator).passed


def test_magnetic_uncertainty_landau():
    g = Grid.cube(2.0, 0.125, 2)
    ph = EdgePhaseField.from_vector_potential(g, landau_vector_potential(1.0))
    B = AntisymmetricField.from_components(g, {(0, 1): np.ones(g.shape)})
    uS = landscape_magnetic_surrogate(g, B, 0.0, SelectionOfPairs(((0, 1),)))
    rep = check_uncertainty_magnetic(uS, ph, 0.0, TestFunctionSet(g, count=10, complex_=True))
    assert rep.passed


def test_fefferman_phong_constant_finite(yukawa):
    g, V, _ = yukawa
    rep = check_fefferman_phong(maximal_function(V, 1.0), V, TestFunctionSet(g, count=5))
    assert rep.passed and 0 < rep.constants["C"] < np.inf


def test_compare_spread_for_constant_potential(yukawa):
    g, V, res = yukawa
    m = maximal_function(V, 1.0)
    rep = check_compare_u_vs_m(res.u, m, window_mask(g, 0.5))
    assert rep.constants["spread"] >= 1.0


def test_lax_milgram_explicit_constant(yukawa):
    g, V, res = yukawa
    f = TestFunctionSet(g, count=1).functions[0]
    rep = check_decay_lax_milgram(res.operator, res.u, f, eps_ladder=(0.2, 0.1))
    assert rep.passed
    assert rep.constants["C_fit[0.1]"] <= rep.constants["C_fit[0.2]"]


def test_envelope_slopes_recover_line():
    x = np.linspace(0, 10, 500)
    y = -2 * x + np.sin(7 * x) * 0.1
    hi, lo = envelope_slopes(x, y)
    assert hi == pytest.approx(-2, abs=0.05) and lo == pytest.approx(-2, abs=0.05)


def test_long_distance_constant_is_one_for_constant_u():
    g = Grid.cube(1.0, 0.1, 2)
    u = ScalarField(g, np.full(g.shape, 0.3))
    k0, C = long_distance_fit(u, g.interior_mask)
    assert k0 == 1 and C == 1.0


def test_report_serialisation(tmp_path):
    rep = ExperimentReport("demo", instance={"n": 3})
    rep.add("ok", 1.0, 2.0)
    rep.add("inf", 5.0, np.inf)
    rep.diagnostics["x"] = np.arange(3.0)
    rep.write_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["pass"] is True and data["checks"][1]["bound"] == "inf"
    rep.write_diagnostics_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[1] == "x"


def test_check_tolerance_is_relative():
    assert Check("a", 1.0 + 5e-7, 1.0).passed
    assert not Check("a", 1.0 + 5e-6, 1.0).passed
    assert not Check("a", np.inf, 1.0).passed


def test_real_operator_matches_landscape_operator(yukawa):
    g, V, res = yukawa
    M = assemble_real(g, None, V)
    assert abs(M.matrix - res.operator.matrix).max() == 0
