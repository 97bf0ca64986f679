"""Suite orchestration: which checks each command runs, and report assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from . import lcs, soliton
from .checks import FAIL, NOT_APPLICABLE, Check, SuiteReport, Tally
from .geometry import CONVENTIONS, ChartManifold, Point, frame_connection, frame_connection_from_christoffel
from .geometry import signature as metric_signature
from .geometry import signature_label
from .manifold_file import LoadedManifold

COMMANDS = (
    "check-structure",
    "curvature",
    "soliton-fit",
    "soliton-verify",
    "theorems",
    "gradient",
    "bounds",
    "bochner",
    "all",
)


def _frame(geo, data, variance):
    return soliton._frame(geo, data, variance)


def curvature_report(M: ChartManifold, points: Sequence[Point], f=None, tol: float = 1e-9) -> SuiteReport:
    """Identities every Levi-Civita connection satisfies, plus frame consistency."""
    t = Tally(tol)
    rows = []
    n = M.n
    for p in points:
        geo = M.at(p)
        g = geo.g.value
        t.add("metric_inverse", g @ geo.ginv.value - np.eye(n))
        G = geo.gamma.value
        t.add("christoffel_symmetry", G - np.transpose(G, (0, 2, 1)))
        t.add("metricity", _frame(geo, geo.nabla(geo.g, "dd").value, "ddd"))
        R = geo.riemann.value
        Rd = _frame(geo, np.einsum("ae,ebcd->abcd", g, R), "dddd")
        t.add("riemann_antisym_12", Rd + np.transpose(Rd, (1, 0, 2, 3)))
        t.add("riemann_antisym_34", Rd + np.transpose(Rd, (0, 1, 3, 2)))
        t.add("riemann_pair_symmetry", Rd - np.transpose(Rd, (2, 3, 0, 1)))
        t.add(
            "first_bianchi",
            Rd + np.transpose(Rd, (0, 2, 3, 1)) + np.transpose(Rd, (0, 3, 1, 2)),
        )
        S = geo.ricci.value
        t.add("ricci_symmetry", _frame(geo, S - S.T, "dd"))
        nS = geo.nabla(geo.ricci, "dd").value
        divS = np.einsum("ik,ikj->j", geo.ginv.value, nS)
        t.add("div_S_bianchi", _frame(geo, divS - 0.5 * geo.scal.grad().value, "d"))
        if geo.has_frame:
            gram = geo.gram.value
            if M.signature is not None:
                t.add("frame_gram", gram - np.diag(M.signature))
            om = frame_connection(M, p)
            t.add("frame_vs_christoffel", om - frame_connection_from_christoffel(M, p))
            low = np.einsum("abc,cd->abd", om, gram)
            t.add("frame_metric_compat", low + np.transpose(low, (0, 2, 1)))
        if f is not None:
            H = geo.nabla(geo.jet(f).grad(), "d").value
            t.add("hessian_symmetry", _frame(geo, H - H.T, "dd"))
        rows.append(
            {
                "point": list(p),
                "max_abs_R": float(np.max(np.abs(_frame(geo, R, "uddd")))) if R.size else 0.0,
                "scal": float(geo.scal.value),
            }
        )
    report = SuiteReport("curvature", t.checks(), rows)
    report.notes.append(f"max |R| over samples: {max((r['max_abs_R'] for r in rows), default=0.0):.6g}")
    return report


@dataclass
class Context:
    loaded: LoadedManifold
    points: list
    tol: float
    structure: lcs.LcsStructure | None = None
    structure_error: str | None = None
    _done: bool = field(default=False, repr=False)

    @property
    def M(self) -> ChartManifold:
        return self.loaded.manifold

    @property
    def params(self):
        return self.loaded.params

    def ensure_structure(self):
        if self._done:
            return self.structure
        self._done = True
        if self.loaded.xi is not None:
            try:
                self.structure = lcs.derive_structure(
                    self.M, self.loaded.xi, self.points, alpha=self.loaded.alpha, tol=self.tol
                )
            except lcs.StructureError as exc:
                self.structure_error = f"{type(exc).__name__}: {exc}"
        return self.structure


def _failed(name: str, tol: float, message: str) -> SuiteReport:
    return SuiteReport(name, [Check("precondition", None, tol, FAIL, message)])


def _na(name: str, tol: float, why: str) -> SuiteReport:
    return SuiteReport(name, [Check("skipped", None, tol, NOT_APPLICABLE, why)])


def _structure_suites(ctx: Context) -> list[SuiteReport]:
    names = ("structure-axioms", "structure-identities", "structure-ricci")
    s = ctx.ensure_structure()
    if ctx.loaded.xi is None:
        return [_na(n, ctx.tol, "fixture declares no structure") for n in names]
    if s is None:
        return [_failed(n, ctx.tol, ctx.structure_error) for n in names]
    return [
        lcs.verify_axioms(ctx.M, s, ctx.points, ctx.tol),
        lcs.verify_structure_identities(ctx.M, s, ctx.points, ctx.tol),
        lcs.verify_ricci_identities(ctx.M, s, ctx.points, ctx.tol),
    ]


def _curvature(ctx: Context) -> list[SuiteReport]:
    f = ctx.params.f if ctx.params is not None else None
    return [curvature_report(ctx.M, ctx.points, f, ctx.tol)]


def _structure_or_skip(ctx: Context, name: str):
    s = ctx.ensure_structure()
    if ctx.loaded.xi is None:
        return None, _na(name, ctx.tol, "fixture declares no structure")
    if s is None:
        return None, _failed(name, ctx.tol, ctx.structure_error)
    return s, None


def _soliton_fit(ctx: Context) -> list[SuiteReport]:
    s, skip = _structure_or_skip(ctx, "soliton-fit")
    if skip:
        return [skip]
    return [soliton.soliton_fit_report(ctx.M, s, ctx.points, ctx.params, ctx.tol)]


def _soliton_verify(ctx: Context) -> list[SuiteReport]:
    p = ctx.params
    if p is None or p.lam is None or p.mu is None:
        return [_na("soliton-verify", ctx.tol, "fixture declares no soliton parameters")]
    s = ctx.ensure_structure()
    if s is None and ctx.loaded.xi is not None:
        return [_failed("soliton-verify", ctx.tol, ctx.structure_error)]
    source = s if s is not None else None
    out = [soliton.soliton_verify_report(ctx.M, source, p, ctx.points, ctx.tol)]
    out.append(soliton.check_identities(ctx.M, s, p, ctx.points, ctx.tol))
    return out


def _theorems(ctx: Context) -> list[SuiteReport]:
    s = ctx.ensure_structure()
    if s is None and ctx.loaded.xi is not None:
        return [_failed("curvature-conditions", ctx.tol, ctx.structure_error)]
    return [
        soliton.nabla_S_conditions(ctx.M, s, ctx.params, ctx.points, ctx.tol),
        soliton.theorems_report(ctx.M, s, ctx.params, ctx.points, ctx.tol),
    ]


def _needs_potential(ctx: Context, name: str):
    p = ctx.params
    if p is None or p.f is None or p.lam is None or p.mu is None:
        return _na(name, ctx.tol, "fixture declares no gradient potential")
    return None


def _gradient(ctx: Context) -> list[SuiteReport]:
    skip = _needs_potential(ctx, "gradient")
    if skip:
        return [skip]
    s = ctx.ensure_structure()
    return [
        soliton.gradient_residuals(ctx.M, ctx.params, ctx.points, s, ctx.tol),
        soliton.lcs_gradient_constraints(ctx.M, s, ctx.params, ctx.points, ctx.tol),
        soliton.ricci_soliton_probe(ctx.M, s, ctx.points, tol=ctx.tol),
    ]


def _bounds(ctx: Context) -> list[SuiteReport]:
    skip = _needs_potential(ctx, "bounds")
    return [skip] if skip else [soliton.bounds_report(ctx.M, ctx.params, ctx.points, ctx.tol)]


def _bochner(ctx: Context) -> list[SuiteReport]:
    skip = _needs_potential(ctx, "bochner")
    if skip:
        return [skip, soliton.auxiliary_identities(ctx.M, None, ctx.points, ctx.tol)]
    return [
        soliton.gradient_formulas_report(ctx.M, ctx.params, ctx.points, ctx.tol),
        soliton.auxiliary_identities(ctx.M, ctx.params, ctx.points, ctx.tol),
    ]


_RUNNERS: dict[str, Callable[[Context], list[SuiteReport]]] = {
    "check-structure": _structure_suites,
    "curvature": _curvature,
    "soliton-fit": _soliton_fit,
    "soliton-verify": _soliton_verify,
    "theorems": _theorems,
    "gradient": _gradient,
    "bounds": _bounds,
    "bochner": _bochner,
}


def run(command: str, loaded: LoadedManifold, points: Sequence[Point], tol: float = 1e-9) -> dict:
    """Run ``command`` and return the report as a JSON-ready dict."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    ctx = Context(loaded, list(points), tol)
    names = [c for c in COMMANDS if c != "all"] if command == "all" else [command]
    suites: list[SuiteReport] = []
    for name in names:
        try:
            suites.extend(_RUNNERS[name](ctx))
        except (ArithmeticError, ValueError) as exc:
            suites.append(_failed(name, tol, f"{type(exc).__name__}: {exc}"))
    M = ctx.M
    sig = M.signature if M.signature is not None else metric_signature(M, points[0])
    return {
        "fixture": M.name,
        "command": command,
        "version": __version__,
        "conventions": {
            "riemann_sign": CONVENTIONS["riemann_sign"],
            "laplacian_sign": CONVENTIONS["laplacian_sign"],
            "ricci": CONVENTIONS["ricci"],
            "signature": signature_label(sorted(sig, reverse=True)),
        },
        "points": len(points),
        "suites": [_suite_dict(s) for s in suites],
        "pass": all(s.passed for s in suites),
    }


def _suite_dict(s: SuiteReport) -> dict:
    return {
        "name": s.name,
        "residual_max": s.residual_max,
        "tolerance": s.checks[0].tolerance if s.checks else None,
        "pass": s.passed,
        "checks": [c.as_dict() for c in s.checks],
        "notes": list(s.notes),
        "rows": s.rows,
    }
