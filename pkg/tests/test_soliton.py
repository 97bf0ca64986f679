import numpy as np
import pytest

from lcsgeo.expr import parse
from lcsgeo.lcs import derive_structure
from lcsgeo.soliton import (
    FAILED,
    VACUOUS,
    VERIFIED,
    SolitonError,
    SolitonParams,
    auxiliary_identities,
    bochner_terms,
    check_identities,
    classify,
    condition_R_dot_S,
    condition_S_dot_R,
    fit_params,
    gradient_residuals,
    lcs_gradient_constraints,
    nabla_S_conditions,
    r_dot_s_value,
    ricci_norm_bounds,
    ricci_soliton_probe,
    soliton_residual,
    trace_identity,
)

from conftest import TOL, at_z

COORDS = ("x", "y", "z")


def P(lam, mu, f=None, kind="eta-ricci"):
    ex = lambda s: None if s is None else parse(s, coords=COORDS)  # noqa: E731
    return SolitonParams(ex(lam), ex(mu), ex(f), kind)


def structure_of(all_fixtures, name):
    loaded, points = all_fixtures[name]
    return loaded, points, derive_structure(loaded.manifold, loaded.xi, points, alpha=loaded.alpha)


# -- soliton equation and fitting -----------------------------------------


def test_declared_params_solve_equation(lcs3, lcs3_structure, lcs3_points):
    for p in lcs3_points:
        assert soliton_residual(lcs3.manifold, lcs3_structure, lcs3.params, p).max_abs() < TOL


def test_zero_params_residual_component(lcs3, lcs3_structure):
    r = soliton_residual(lcs3.manifold, lcs3_structure, P("0", "0"), at_z(1))
    assert r.basis == "frame"
    assert r.data[0, 0] == pytest.approx(16.0, abs=1e-12)


def test_gaussian_soliton(gaussian):
    for p in [(1.0, 0.0, 0.0), (0.3, -0.2, 0.7)]:
        assert soliton_residual(gaussian.manifold, None, gaussian.params, p).max_abs() < TOL


def test_eta_einstein_kind(lcs3, lcs3_structure):
    # Same tensor equation once lambda absorbs scal/2.
    p = at_z(1.5)
    lam = "2*(z-5)/z^2 + 16/z^2"
    r = soliton_residual(lcs3.manifold, lcs3_structure, P(lam, "2*(z+1)/z^2", kind="eta-einstein"), p)
    assert r.max_abs() < TOL


@pytest.mark.parametrize("z, lam, mu", [(2.0, -1.5, 1.5), (1.0, -8.0, 4.0)])
def test_fit_values(lcs3, lcs3_structure, z, lam, mu):
    fit = fit_params(lcs3.manifold, lcs3_structure, at_z(z))
    assert fit.lam == pytest.approx(lam, rel=1e-12)
    assert fit.mu == pytest.approx(mu, rel=1e-12)
    assert fit.lsq_residual < TOL
    assert fit.lam_shortcut == pytest.approx(lam, rel=1e-12)
    assert fit.mu - fit.lam == pytest.approx(12 / z**2, rel=1e-12)


def test_fit_reports_non_quasi_einstein_input():
    from lcsgeo.geometry import ChartManifold

    # A perturbed warp that keeps d/dt unit timelike but breaks the quasi-Einstein form.
    M = ChartManifold("warp", ["x", "y", "t"], [["exp(2*t)", "0", "0"], ["0", "exp(4*t)", "0"], ["0", "0", "-1"]])
    fit = fit_params(M, ["0", "0", "1"], (0.0, 0.0, 0.2))
    assert fit.lsq_residual > 0.1


def test_degenerate_fit_basis_raises(gaussian):
    with pytest.raises(SolitonError):
        fit_params(gaussian.manifold, ["0", "0", "0"], (0.0, 0.0, 0.0))


def test_classification():
    assert classify([0.0, 1e-12]) == "steady"
    assert classify([-8.0, -1.5, -0.1]) == "shrinking"
    assert classify([2.0, 1e-3]) == "expanding"
    assert classify([-1.0, 1.0]) == "mixed"
    assert classify([-1.0, 0.0]) == "mixed"


def test_lcs3_window_classification(lcs3, lcs3_structure, lcs3_points):
    lams = [fit_params(lcs3.manifold, lcs3_structure, p).lam for p in lcs3_points]
    assert classify(lams) == "shrinking"
    wide = [fit_params(lcs3.manifold, lcs3_structure, at_z(z)).lam for z in (1.0, 6.0)]
    assert classify(wide) == "mixed"


# -- identities -------------------------------------------------------------


def test_identities_on_lcs3(lcs3, lcs3_structure, lcs3_points):
    rep = check_identities(lcs3.manifold, lcs3_structure, lcs3.params, lcs3_points, TOL)
    assert rep["mu_minus_lambda"].residual < TOL
    assert rep["scal_formula"].residual < TOL
    assert rep["scal_differential"].residual < TOL
    assert rep["constant_scal_criterion"].status == "info"
    assert rep["constant_scal_criterion"].residual > 1.0  # scal = 32/z^2 is not constant


def test_identities_not_applicable_without_structure(gaussian):
    rep = check_identities(gaussian.manifold, None, gaussian.params, [(0.0, 0.0, 0.0)], TOL)
    assert all(c.status == "n/a" for c in rep.checks)


def test_identities_need_expressions(lcs3, lcs3_structure):
    with pytest.raises(SolitonError):
        check_identities(lcs3.manifold, lcs3_structure, SolitonParams(-8.0, 4.0), [at_z(1)], TOL)


def test_nabla_S_conditions(lcs3, lcs3_structure, lcs3_points, minkowski):
    rep = nabla_S_conditions(lcs3.manifold, lcs3_structure, lcs3.params, lcs3_points, TOL)
    assert rep["closed_form"].residual < TOL
    assert rep["ricci_symmetric"].residual > 1.0
    assert rep["ricci_symmetric_conclusion"].status == "n/a"
    flat = nabla_S_conditions(minkowski.manifold, None, minkowski.params, [(0.1, 0.2, 0.3)], TOL)
    for name in ("ricci_symmetric", "eta_recurrent", "codazzi"):
        assert flat[name].residual == 0.0


def test_nabla_S_conclusions_on_de_sitter(all_fixtures):
    loaded, points, s = structure_of(all_fixtures, "desitter3")
    rep = nabla_S_conditions(loaded.manifold, s, loaded.params, points, TOL)
    assert rep["ricci_symmetric_conclusion"].status == "pass"
    assert rep["codazzi_conclusion"].status == "pass"


# -- curvature conditions ---------------------------------------------------


def test_R_dot_S_on_lcs3(lcs3, lcs3_structure):
    M = lcs3.manifold
    res = condition_R_dot_S(M, lcs3_structure, at_z(1), lcs3.params)
    assert res.factor_tensor == pytest.approx(12.0, abs=1e-12)
    assert res.factor_formula == pytest.approx(12.0, abs=1e-12)
    # C(E1, E1, xi) carries the opposite sign of the factor.
    assert res.tensor.frame_data[0, 0, 2] == pytest.approx(-12.0, abs=1e-12)
    assert res.verdict == VACUOUS
    for z in (1.5, 3.0):
        r = condition_R_dot_S(M, lcs3_structure, at_z(z), lcs3.params)
        assert r.factor_tensor == pytest.approx(12 / z**4, rel=1e-12)


def test_S_dot_R_on_lcs3(lcs3, lcs3_structure):
    res = condition_S_dot_R(lcs3.manifold, lcs3_structure, at_z(1), lcs3.params)
    assert res.factor_tensor == pytest.approx(-132.0, abs=1e-10)
    assert res.factor_formula == pytest.approx(-132.0, abs=1e-10)
    assert res.verdict == VACUOUS


def test_conditions_use_fit_when_params_missing(lcs3, lcs3_structure):
    res = condition_R_dot_S(lcs3.manifold, lcs3_structure, at_z(2))
    assert res.factor_formula == pytest.approx(res.factor_tensor, rel=1e-12)


def test_condition_tensor_multilinear(lcs3, lcs3_structure):
    M = lcs3.manifold
    p = at_z(1.7, 0.2, -0.4)
    res = condition_R_dot_S(M, lcs3_structure, p, lcs3.params)
    geo = M.at(p)
    xi = np.array([0.0, 0.0, 1.0])
    rng = np.random.default_rng(11)
    for _ in range(5):
        X, Y, Z = rng.normal(size=(3, 3))
        direct = r_dot_s_value(geo, xi, X, Y, Z)
        assert res.tensor.evaluate(X, Y, Z) == pytest.approx(direct, rel=1e-10, abs=1e-10)
        a, b = rng.normal(size=2)
        X2 = rng.normal(size=3)
        combo = r_dot_s_value(geo, xi, a * X + b * X2, Y, Z)
        assert combo == pytest.approx(a * direct + b * r_dot_s_value(geo, xi, X2, Y, Z), rel=1e-10, abs=1e-10)


def test_constant_curvature_with_vanishing_kappa(all_fixtures):
    loaded, points, s = structure_of(all_fixtures, "milne3")
    for p in points[:5]:
        r = condition_R_dot_S(loaded.manifold, s, p, loaded.params)
        assert np.max(np.abs(r.tensor.frame_data)) < TOL
        assert r.verdict == VERIFIED
        assert condition_S_dot_R(loaded.manifold, s, p, loaded.params).verdict == VERIFIED


def test_de_sitter_first_branch(all_fixtures):
    loaded, points, s = structure_of(all_fixtures, "desitter3")
    r = condition_R_dot_S(loaded.manifold, s, points[0], loaded.params)
    assert r.verdict == VERIFIED
    assert float(loaded.manifold.at(points[0]).scal.value) == pytest.approx(6.0, abs=1e-12)


def test_wrong_params_flag_failure(all_fixtures):
    loaded, points, s = structure_of(all_fixtures, "desitter3")
    r = condition_R_dot_S(loaded.manifold, s, points[0], SolitonParams(parse("-2"), parse("-1")))
    assert r.verdict == FAILED


def test_S_dot_R_vanishes_on_flat(all_fixtures):
    loaded, points, s = structure_of(all_fixtures, "milne3")
    r = condition_S_dot_R(loaded.manifold, s, points[0], loaded.params)
    assert np.max(np.abs(r.tensor.data)) == pytest.approx(0.0, abs=1e-12)


# -- gradient case ----------------------------------------------------------


def test_gradient_residuals_lcs3(lcs3, lcs3_structure, lcs3_points):
    rep = gradient_residuals(lcs3.manifold, lcs3.params, lcs3_points, lcs3_structure, TOL)
    assert rep.passed
    assert rep["grad_f_is_xi"].residual < TOL


def test_gradient_residuals_gaussian(gaussian):
    pts = [(1.0, 0.0, 0.0), (0.4, -0.3, 0.2)]
    rep = gradient_residuals(gaussian.manifold, gaussian.params, pts, None, TOL)
    assert rep.passed


def test_gradient_needs_potential(lcs3):
    with pytest.raises(SolitonError):
        gradient_residuals(lcs3.manifold, P("0", "0"), [at_z(1)])


def test_bounds_lcs3(lcs3):
    b = ricci_norm_bounds(lcs3.manifold, lcs3.params, at_z(1))
    assert (b.lower, b.mid, b.upper) == pytest.approx((8 / 3, 344.0, 1096 / 3), rel=1e-12)
    assert b.holds
    assert b.upper_eta_einstein == pytest.approx(1096 / 3 - 4 * 32, rel=1e-12)
    assert b.constant_length == pytest.approx((8 / 3, 1096 / 3), rel=1e-12)


def test_bounds_gaussian_and_flat(gaussian, minkowski):
    b = ricci_norm_bounds(gaussian.manifold, gaussian.params, (0.5, 0.5, -0.5))
    assert (b.lower, b.mid, b.upper) == pytest.approx((0.0, 0.0, 3.0), abs=1e-12)
    assert b.holds
    b = ricci_norm_bounds(minkowski.manifold, minkowski.params, (0.0, 0.0, 0.0))
    assert (b.lower, b.mid, b.upper) == (0.0, 0.0, 0.0)


def test_trace_identity_values(lcs3, gaussian, minkowski):
    assert trace_identity(lcs3.manifold, lcs3.params, at_z(2)) == pytest.approx(0.0, abs=1e-12)
    assert trace_identity(gaussian.manifold, gaussian.params, (0.1, 0.2, 0.3)) == pytest.approx(0.0, abs=1e-12)
    assert trace_identity(minkowski.manifold, minkowski.params, (0.0, 0.0, 0.0)) == 0.0


def test_bochner_values(lcs3, gaussian, minkowski):
    for z in (1.0, 2.0, 3.0):
        lhs, rhs = bochner_terms(lcs3.manifold, lcs3.params, at_z(z))
        assert lhs == pytest.approx(0.0, abs=1e-12)
        assert rhs == pytest.approx(0.0, abs=1e-12)
    lhs, rhs = bochner_terms(gaussian.manifold, gaussian.params, (1.0, 0.0, 0.0))
    assert lhs == pytest.approx(2.0, abs=1e-12)
    assert rhs == pytest.approx(2.0, abs=1e-12)
    assert bochner_terms(minkowski.manifold, minkowski.params, (0.0, 0.0, 0.0)) == (0.0, 0.0)


def test_bochner_needs_expressions(lcs3):
    with pytest.raises(SolitonError):
        bochner_terms(lcs3.manifold, SolitonParams(-8.0, 4.0, parse("-z", coords=COORDS)), at_z(1))


def test_auxiliary_identities(lcs3, gaussian, lcs3_points):
    rep = auxiliary_identities(lcs3.manifold, lcs3.params, lcs3_points, TOL)
    assert rep.passed and rep["S_xi_xi"].residual < TOL
    rep = auxiliary_identities(gaussian.manifold, gaussian.params, [(0.3, 0.1, 0.2)], TOL)
    assert rep.passed
    rep = auxiliary_identities(lcs3.manifold, None, [at_z(2)], TOL)
    assert rep["div_S_bianchi"].residual < TOL
    assert rep["div_hessian"].status == "n/a"


def test_lcs_constraints(lcs3, lcs3_structure, lcs3_points, all_fixtures):
    rep = lcs_gradient_constraints(lcs3.manifold, lcs3_structure, lcs3.params, lcs3_points, TOL)
    assert rep["constraint"].residual < TOL
    assert rep["constant_case"].status == "n/a"
    loaded, points, s = structure_of(all_fixtures, "desitter3")
    rep = lcs_gradient_constraints(loaded.manifold, s, loaded.params, points, TOL)
    assert rep["constant_case"].status == "pass"


def test_ricci_soliton_probe(lcs3, lcs3_structure):
    zs = np.linspace(1.0, 4.0, 13)
    rep = ricci_soliton_probe(lcs3.manifold, lcs3_structure, [at_z(z) for z in zs], lam=-1.0)
    values = [row["residual"] for row in rep.rows]
    assert values == pytest.approx([10 / z**2 + 12 / z**3 for z in zs], rel=1e-12)
    assert min(values) > 0.1
    assert rep.passed
