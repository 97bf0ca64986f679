"""One test per acceptance criterion; each records a PASS/FAIL line for the summary."""

import random
import time

import numpy as np

from lcsgeo.expr import differentiate, evaluate
from lcsgeo.geometry import frame_connection, ricci, riemann, scalar_curvature
from lcsgeo.lcs import derive_structure, verify_axioms, verify_structure_identities
from lcsgeo.manifold_file import fixture_names, load_manifold, sample_points
from lcsgeo.soliton import (
    VACUOUS,
    bochner_residual,
    check_identities,
    condition_R_dot_S,
    condition_S_dot_R,
    fit_params,
    gradient_residuals,
    lcs_gradient_constraints,
    ricci_norm_bounds,
    SolitonParams,
    trace_identity,
)
from lcsgeo.expr import parse
from lcsgeo.verify import curvature_report, run

from conftest import TOL, at_z, record
from exprgen import COORDS, random_expr


def z_of(p):
    return p[2]


def test_criterion_01_connection_golden(lcs3, lcs3_points):
    assert len(lcs3_points) == 35
    worst = 0.0
    for p in lcs3_points:
        z = z_of(p)
        expected = np.zeros((3, 3, 3))
        expected[0, 0, 2] = expected[0, 2, 0] = -2 / z
        expected[1, 1, 2] = expected[1, 2, 1] = -2 / z
        worst = max(worst, float(np.max(np.abs(frame_connection(lcs3.manifold, p) - expected))))
    ok = worst < TOL
    record("criterion 1", ok, f"nine frame connection values at 35 points, max abs error {worst:.2e}")
    assert ok


def test_criterion_02_curvature_golden(lcs3, lcs3_points):
    worst = 0.0
    for p in lcs3_points:
        z = z_of(p)
        R = riemann(lcs3.manifold, p, "frame")[0].data
        k = 1 / z**2
        golden = {  # (output slot, Z, X, Y) for R(X, Y)Z
            (0, 1, 0, 1): 4 * k,
            (0, 2, 0, 2): -6 * k,
            (1, 0, 1, 0): 4 * k,
            (1, 2, 1, 2): -6 * k,
            (2, 0, 2, 0): 6 * k,
            (2, 1, 2, 1): 6 * k,
        }
        for (a, b, c, d), v in golden.items():
            vec = R[:, b, c, d]
            target = np.zeros(3)
            target[a] = v
            worst = max(worst, float(np.max(np.abs(vec - target))))
        S = ricci(lcs3.manifold, p, "frame").data
        worst = max(worst, float(np.max(np.abs(S - np.diag([10 * k, 10 * k, -12 * k])))))
    ok = worst < TOL
    record("criterion 2", ok, f"six Riemann and three Ricci frame values, max abs error {worst:.2e}")
    assert ok


def test_criterion_03_structure(lcs3, lcs3_points):
    s = derive_structure(lcs3.manifold, lcs3.xi, lcs3_points)  # alpha derived, not declared
    rel = 0.0
    for p in lcs3_points:
        env = dict(zip(COORDS, p))
        z = z_of(p)
        rel = max(rel, abs(evaluate(s.alpha, env) + 2 / z) / (2 / z), abs(evaluate(s.rho, env) + 2 / z**2) / (2 / z**2))
    axioms = verify_axioms(lcs3.manifold, s, lcs3_points, TOL)
    prop = verify_structure_identities(lcs3.manifold, s, lcs3_points, TOL)
    resid = max(axioms.residual_max, prop.residual_max)
    ok = rel < TOL and axioms.passed and prop.passed
    record("criterion 3", ok, f"alpha, rho relative error {rel:.2e}; structure residual max {resid:.2e}")
    assert ok


def test_criterion_04_soliton_fit(lcs3, lcs3_structure, lcs3_points):
    rel = lsq = diff = 0.0
    for p in lcs3_points:
        z = z_of(p)
        fit = fit_params(lcs3.manifold, lcs3_structure, p)
        lam, mu = 2 * (z - 5) / z**2, 2 * (z + 1) / z**2
        rel = max(rel, abs(fit.lam - lam) / abs(lam), abs(fit.mu - mu) / abs(mu))
        lsq = max(lsq, fit.lsq_residual)
        diff = max(diff, abs(fit.mu - fit.lam - 12 / z**2))
    ok = rel < TOL and lsq < TOL and diff < TOL
    record("criterion 4", ok, f"fit relative error {rel:.2e}, lsq residual {lsq:.2e}, mu-lambda error {diff:.2e}")
    assert ok


def test_criterion_05_scalar_curvature(lcs3, lcs3_structure, lcs3_points):
    direct = max(abs(scalar_curvature(lcs3.manifold, p) - 32 / z_of(p) ** 2) for p in lcs3_points)
    rep = check_identities(lcs3.manifold, lcs3_structure, lcs3.params, lcs3_points, TOL)
    formula = rep["scal_formula"].residual
    ok = direct < TOL and formula < TOL
    record("criterion 5", ok, f"scal vs 32/z^2 {direct:.2e}; scal vs closed formula {formula:.2e}")
    assert ok


def test_criterion_06_theorem_machinery(lcs3, lcs3_structure, lcs3_points, all_fixtures):
    rs_err = sr_err = 0.0
    verdicts = set()
    for p in lcs3_points:
        z = z_of(p)
        a, lam, mu = -2 / z, 2 * (z - 5) / z**2, 2 * (z + 1) / z**2
        rs = condition_R_dot_S(lcs3.manifold, lcs3_structure, p, lcs3.params)
        sr = condition_S_dot_R(lcs3.manifold, lcs3_structure, p, lcs3.params)
        rs_err = max(rs_err, abs(rs.factor_tensor - 12 / z**4), abs(rs.factor_formula - 12 / z**4))
        expected = (6 / z**2) * (a + 2 * lam - mu)
        sr_err = max(sr_err, abs(sr.factor_tensor - expected), abs(sr.factor_formula - expected))
        verdicts |= {rs.verdict, sr.verdict}
    loaded, points = all_fixtures["milne3"]
    s = derive_structure(loaded.manifold, loaded.xi, points, alpha=loaded.alpha)
    flat = max(
        float(np.max(np.abs(condition_R_dot_S(loaded.manifold, s, p, loaded.params).tensor.frame_data)))
        for p in points
    )
    ok = rs_err < TOL and sr_err < TOL and verdicts == {VACUOUS} and flat < TOL
    record(
        "criterion 6",
        ok,
        f"R.S factor error {rs_err:.2e}, S.R factor error {sr_err:.2e}, verdicts {sorted(verdicts)}, "
        f"R.S tensor on constant-curvature fixture {flat:.2e}",
    )
    assert ok


def test_criterion_07_gradient_suite(lcs3, lcs3_structure, lcs3_points):
    rep = gradient_residuals(lcs3.manifold, lcs3.params, lcs3_points, lcs3_structure, TOL)
    trace = max(abs(trace_identity(lcs3.manifold, lcs3.params, p)) for p in lcs3_points)
    boch = max(abs(bochner_residual(lcs3.manifold, lcs3.params, p)) for p in lcs3_points)
    hess, oper = rep["hessian_form"].residual, rep["operator_form"].residual
    ok = max(hess, oper, trace, boch) < TOL
    record("criterion 7", ok, f"gradient {hess:.2e}, operator {oper:.2e}, trace {trace:.2e}, Bochner {boch:.2e}")
    assert ok


def test_criterion_08_bounds(lcs3, all_fixtures):
    b = ricci_norm_bounds(lcs3.manifold, lcs3.params, at_z(1))
    err = max(abs(b.lower - 8 / 3), abs(b.mid - 344.0), abs(b.upper - 1096 / 3))
    loaded, points = all_fixtures["euclidean3-gaussian"]
    gauss = max(
        max(abs(g.lower - g.mid), abs(g.mid))
        for g in (ricci_norm_bounds(loaded.manifold, loaded.params, p) for p in points)
    )
    ok = err < TOL and b.holds and gauss < TOL
    record(
        "criterion 8",
        ok,
        f"lcs3 z=1 triple ({b.lower:.6f}, {b.mid:.6f}, {b.upper:.6f}) error {err:.2e}; "
        f"Gaussian |lower - |S|^2| {gauss:.2e}",
    )
    assert ok


def test_criterion_09_universal_identities(all_fixtures):
    worst = 0.0
    for name, (loaded, points) in sorted(all_fixtures.items()):
        f = loaded.params.f if loaded.params else None
        rep = curvature_report(loaded.manifold, points, f, TOL)
        keys = ("riemann_antisym_12", "riemann_antisym_34", "riemann_pair_symmetry", "first_bianchi",
                "metricity", "hessian_symmetry", "div_S_bianchi")
        worst = max([worst] + [rep[k].residual for k in keys if k in rep])
    rng = random.Random(2024)
    fd_worst = 0.0
    for _ in range(100):
        e = random_expr(rng)
        var = rng.choice(COORDS)
        d = differentiate(e, var)
        for _ in range(10):
            env = {c: rng.uniform(0.5, 2.0) for c in COORDS}
            h = 1e-5
            num = (evaluate(e, dict(env, **{var: env[var] + h})) - evaluate(e, dict(env, **{var: env[var] - h}))) / (2 * h)
            exact = evaluate(d, env)
            fd_worst = max(fd_worst, abs(exact - num) / max(1.0, abs(exact)))
    ok = worst < TOL and fd_worst < 1e-6
    record("criterion 9", ok, f"identity residual max {worst:.2e} over {len(all_fixtures)} fixtures; "
           f"finite-difference relative error {fd_worst:.2e} on 100 expressions")
    assert ok


def test_criterion_10_nonexistence_probe(lcs3, lcs3_structure):
    pts = [at_z(z) for z in np.linspace(1.0, 4.0, 31)]
    probe = SolitonParams(parse("-1"), parse("0"))
    rep = lcs_gradient_constraints(lcs3.manifold, lcs3_structure, probe, pts, TOL)
    values = [abs(r["residual"]) for r in rep.rows]
    ok = max(values) > 0.1
    record("criterion 10", ok, f"mu=0 constraint residual on z in [1,4]: min {min(values):.3f}, max {max(values):.3f}")
    assert ok


def test_runtime_budget():
    start = time.perf_counter()
    passed = True
    for name in fixture_names():
        loaded = load_manifold(f"fixtures/{name}")
        report = run("all", loaded, sample_points(loaded.manifold, loaded.sampling))
        passed = passed and report["pass"]
    elapsed = time.perf_counter() - start
    ok = elapsed < 60 and passed
    record("runtime", ok, f"run all over {len(fixture_names())} fixtures in {elapsed:.1f} s, all suites pass: {passed}")
    assert ok
