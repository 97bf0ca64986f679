import dataclasses

import numpy as np
import pytest

from lcsgeo.expr import evaluate, parse
from lcsgeo.lcs import (
    AlphaMismatchError,
    NotConcircularError,
    NotUnitTimelikeError,
    VanishingAlphaError,
    derive_structure,
    verify_axioms,
    verify_structure_identities,
    verify_ricci_identities,
)

from conftest import TOL, at_z


def test_alpha_and_rho_extracted(lcs3, lcs3_points):
    s = derive_structure(lcs3.manifold, lcs3.xi, lcs3_points)
    for z in (1.0, 2.5, 4.0):
        env = {"x": 0.0, "y": 0.0, "z": z}
        assert evaluate(s.alpha, env) == pytest.approx(-2 / z, rel=1e-12)
        assert evaluate(s.rho, env) == pytest.approx(-2 / z**2, rel=1e-12)


def test_xi_of_alpha_is_minus_rho(lcs3, lcs3_structure):
    geo = lcs3.manifold.at(at_z(1))
    xi = geo.jet(list(lcs3_structure.xi))
    xa = float(geo.directional(xi, geo.jet(lcs3_structure.alpha)).value)
    assert xa == pytest.approx(2.0, abs=1e-13)
    rho = float(geo.jet(lcs3_structure.rho).value)
    assert xa + rho == pytest.approx(0.0, abs=1e-13)


def test_declared_alpha_is_preferred_and_checked(lcs3, lcs3_points):
    s = derive_structure(lcs3.manifold, lcs3.xi, lcs3_points, alpha="-2/z")
    assert s.alpha == parse("-2/z", coords=("x", "y", "z"))
    with pytest.raises(AlphaMismatchError):
        derive_structure(lcs3.manifold, lcs3.xi, lcs3_points, alpha="-3/z")


def test_parallel_field_has_vanishing_alpha(minkowski):
    M = minkowski.manifold
    with pytest.raises(VanishingAlphaError):
        derive_structure(M, ["0", "0", "1"], [(0.0, 0.0, 0.0), (0.5, 0.1, 0.2)])


def test_spacelike_field_rejected(gaussian):
    with pytest.raises(NotUnitTimelikeError):
        derive_structure(gaussian.manifold, ["0", "0", "1"], [(0.0, 0.0, 0.0)])


def test_non_concircular_field_rejected():
    from lcsgeo.geometry import ChartManifold

    # Unit timelike but with shear: dt/dx-type tilt in a warped metric.
    M = ChartManifold("warp", ["x", "y", "t"], [["exp(2*t)", "0", "0"], ["0", "exp(4*t)", "0"], ["0", "0", "-1"]])
    with pytest.raises(NotConcircularError):
        derive_structure(M, ["0", "0", "1"], [(0.0, 0.0, 0.1)])


def test_axioms_hold_on_lcs3(lcs3, lcs3_structure, lcs3_points):
    for fn in (verify_axioms, verify_structure_identities, verify_ricci_identities):
        report = fn(lcs3.manifold, lcs3_structure, lcs3_points, TOL)
        bad = [(c.name, c.residual) for c in report.checks if not c.passed]
        assert not bad


@pytest.mark.parametrize("name", ["milne3", "desitter3"])
def test_axioms_hold_on_other_structures(all_fixtures, name):
    loaded, points = all_fixtures[name]
    s = derive_structure(loaded.manifold, loaded.xi, points, alpha=loaded.alpha)
    for fn in (verify_axioms, verify_structure_identities, verify_ricci_identities):
        assert fn(loaded.manifold, s, points, TOL).passed


def test_corrupted_phi_is_reported(lcs3, lcs3_structure, lcs3_points):
    one, zero = parse("1"), parse("0")
    identity = tuple(tuple(one if i == j else zero for j in range(3)) for i in range(3))
    broken = dataclasses.replace(lcs3_structure, phi=identity)
    report = verify_axioms(lcs3.manifold, broken, lcs3_points, TOL)
    assert report["phi_xi"].residual == pytest.approx(1.0, abs=1e-12)
    assert not report.passed


def test_lie_g_matches_twice_nabla_eta_at_z2(lcs3, lcs3_structure):
    report = verify_structure_identities(lcs3.manifold, lcs3_structure, [at_z(2)], TOL)
    assert report["lie_xi_g"].residual < TOL
    assert report["eta_R_XY_xi"].residual < TOL


def test_curvature_along_xi_constant(lcs3, lcs3_structure):
    from lcsgeo.geometry import riemann

    R_up, _ = riemann(lcs3.manifold, at_z(2), "frame")
    k = 6 / 4  # alpha^2 - rho at z = 2
    assert np.allclose(R_up.data[:, 2, 0, 2], [-k, 0, 0], atol=1e-12)
