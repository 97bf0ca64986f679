"""Lorentzian concircular structures: derivation of (η, φ, α, ρ) and axiom residuals.

A unit timelike ξ is concircular when ∇ξ = α(I + η⊗ξ) with dα = ρη. Since
tr(I + η⊗ξ) = n - 1, the function α is recovered as div(ξ)/(n - 1), and
ρ = -ξ(α) because η(ξ) = -1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import jets
from .checks import SuiteReport, Tally
from .expr import ONE, ZERO, Add, Const, Div, Expr, Mul, Neg, determinant, differentiate, simplify
from .geometry import ChartManifold, GeometryError, Point, PointGeometry, _contract_slots


class StructureError(GeometryError):
    pass


class NotUnitTimelikeError(StructureError):
    pass


class VanishingAlphaError(StructureError):
    pass


class NotConcircularError(StructureError):
    pass


class AlphaMismatchError(StructureError):
    pass


@dataclass(frozen=True)
class LcsStructure:
    xi: tuple[Expr, ...]
    eta: tuple[Expr, ...]
    phi: tuple[tuple[Expr, ...], ...]  # phi[i][j] = φ^i_j
    alpha: Expr
    rho: Expr
    alpha_derived: Expr

    @property
    def n(self) -> int:
        return len(self.xi)


def _sum(terms) -> Expr:
    out: Expr = ZERO
    for t in terms:
        out = Add(out, t)
    return simplify(out)


def derive_structure(
    M: ChartManifold,
    xi: Sequence[Expr | str],
    points: Sequence[Point],
    alpha: Expr | str | None = None,
    tol: float = 1e-9,
) -> LcsStructure:
    """Build the structure generated by ``xi`` and validate it on ``points``.

    Raises if ξ is not unit timelike, if the extracted α vanishes somewhere,
    if ∇ξ differs from α(I + η⊗ξ), or if a declared α disagrees.
    """
    n = M.n
    xi_e = tuple(M.expr(c) for c in xi)
    if len(xi_e) != n:
        raise StructureError(f"xi needs {n} components")
    g = M.metric
    eta = tuple(_sum(Mul(g[j][i], xi_e[i]) for i in range(n)) for j in range(n))
    phi = tuple(
        tuple(simplify(Add(ONE if i == j else ZERO, Mul(xi_e[i], eta[j]))) for j in range(n)) for i in range(n)
    )
    det = determinant(g)
    div_xi = _sum(
        [differentiate(xi_e[i], M.coords[i]) for i in range(n)]
        + [
            Mul(Const(Fraction(1, 2)), Div(Mul(xi_e[k], differentiate(det, M.coords[k])), det))
            for k in range(n)
        ]
    )
    alpha_derived = simplify(Div(div_xi, Const(n - 1)))
    alpha_e = alpha_derived if alpha is None else M.expr(alpha)
    rho = simplify(Neg(_sum(Mul(xi_e[k], differentiate(alpha_e, M.coords[k])) for k in range(n))))
    s = LcsStructure(xi_e, eta, phi, alpha_e, rho, alpha_derived)

    for p in points:
        at = LcsAtPoint(M.at(p), s)
        unit = float(np.einsum("i,ij,j->", at.xi, at.geo.g.value, at.xi))
        if abs(unit + 1.0) >= tol:
            raise NotUnitTimelikeError(f"g(xi, xi) = {unit:.12g} at {tuple(p)}, expected -1")
        a_derived = float(at.geo.jet(alpha_derived).value)
        if not abs(a_derived) > 1e-8:
            raise VanishingAlphaError(f"extracted alpha vanishes at {tuple(p)}; alpha must be nowhere zero")
        if alpha is not None and abs(at.alpha - a_derived) >= tol * max(1.0, abs(a_derived)):
            raise AlphaMismatchError(f"declared alpha {at.alpha:.12g} != derived {a_derived:.12g} at {tuple(p)}")
        resid = at.frame(at.nabla_xi - at.alpha * (np.eye(n) + np.outer(at.eta, at.xi)), "du")
        if np.max(np.abs(resid)) >= tol:
            raise NotConcircularError(
                f"nabla xi - alpha(I + eta(x)xi) = {np.max(np.abs(resid)):.3g} at {tuple(p)}"
            )
    return s


class LcsAtPoint:
    """Values and jets of the structure fields at one point (coordinate basis)."""

    def __init__(self, geo: PointGeometry, s: LcsStructure):
        self.geo = geo
        self.s = s
        self.n = geo.n
        self.xi_j = geo.jet(list(s.xi))
        self.eta_j = geo.jet(list(s.eta))
        self.phi_j = geo.jet([list(r) for r in s.phi])
        self.alpha_j = geo.jet(s.alpha)
        self.rho_j = geo.jet(s.rho)
        self.xi = self.xi_j.value
        self.eta = self.eta_j.value
        self.phi = self.phi_j.value
        self.alpha = float(self.alpha_j.value)
        self.rho = float(self.rho_j.value)
        self._nabla_xi = None

    @property
    def k(self) -> float:
        """α² - ρ, the constant of R(X,Y)ξ."""
        return self.alpha**2 - self.rho

    @property
    def nabla_xi_jet(self):
        if self._nabla_xi is None:
            self._nabla_xi = self.geo.nabla(self.xi_j, "u")
        return self._nabla_xi

    @property
    def nabla_xi(self) -> np.ndarray:
        """[k, i] = ∇_k ξ^i."""
        return self.nabla_xi_jet.value

    def xi_of(self, f: jets.Jet) -> jets.Jet:
        """ξ(f) as a jet (one order lower)."""
        return self.geo.directional(self.xi_j, f)

    def frame(self, data: np.ndarray, variance: str) -> np.ndarray:
        if not self.geo.has_frame:
            return np.asarray(data)
        return _contract_slots(np.asarray(data), variance, self.geo.E.value, self.geo.theta.value)


def verify_axioms(M: ChartManifold, s: LcsStructure, points: Sequence[Point], tol: float = 1e-9) -> SuiteReport:
    """Residuals of the defining properties of the structure, max over points."""
    t = Tally(tol)
    n = M.n
    eye = np.eye(n)
    for p in points:
        at = LcsAtPoint(M.at(p), s)
        g = at.geo.g.value
        xi, eta, phi, a, r = at.xi, at.eta, at.phi, at.alpha, at.rho
        F = at.frame
        t.add("unit_timelike", np.einsum("i,ij,j->", xi, g, xi) + 1.0)
        t.add("phi_xi", F(phi @ xi, "u"))
        t.add("eta_phi", F(eta @ phi, "d"))
        t.add("eta_xi", eta @ xi + 1.0)
        t.add("phi_squared", F(phi @ phi - (eye + np.outer(xi, eta)), "ud"))
        t.add("phi_symmetric", F(np.einsum("ik,ij->jk", g, phi) - np.einsum("ji,ik->jk", g, phi), "dd"))
        t.add(
            "phi_metric",
            F(np.einsum("ij,lk,il->jk", phi, phi, g) - g - np.outer(eta, eta), "dd"),
        )
        nphi = at.geo.nabla(at.phi_j, "ud").value  # [k, i, j] = (∇_k φ)^i_j
        rhs = a * (
            np.einsum("kj,i->kij", g, xi)
            + 2.0 * np.einsum("k,j,i->kij", eta, eta, xi)
            + np.einsum("j,ik->kij", eta, eye)
        )
        t.add("nabla_phi", F(nphi - rhs, "dud"))
        t.add("concircular", F(at.nabla_xi - a * (eye + np.outer(eta, xi)), "du"))
        t.add("d_alpha", F(at.alpha_j.grad().value - r * eta, "d"))
        deta = at.eta_j.grad().value  # [j, i] = ∂_i η_j
        t.add("eta_closed", F(deta.T - deta, "dd"))
        t.add("nijenhuis", F(nijenhuis(phi, at.phi_j.grad().value), "ddu"))
    return SuiteReport("structure-axioms", t.checks())


def nijenhuis(phi: np.ndarray, dphi: np.ndarray) -> np.ndarray:
    """N_φ(∂_i, ∂_j)^k as ``[i, j, k]``; coordinate brackets vanish.

    ``dphi[k, i, l] = ∂_l φ^k_i``.
    """
    # [φ∂_i, φ∂_j]^k = φ^l_i ∂_l φ^k_j - φ^l_j ∂_l φ^k_i
    b_pp = np.einsum("li,kjl->ijk", phi, dphi) - np.einsum("lj,kil->ijk", phi, dphi)
    # [φ∂_i, ∂_j]^k = -∂_j φ^k_i ;  [∂_i, φ∂_j]^k = ∂_i φ^k_j
    b_p1 = -np.einsum("kij->ijk", dphi)
    b_1p = np.einsum("kji->ijk", dphi)
    return b_pp - np.einsum("kl,ijl->ijk", phi, b_p1) - np.einsum("kl,ijl->ijk", phi, b_1p)


def verify_structure_identities(M: ChartManifold, s: LcsStructure, points: Sequence[Point], tol: float = 1e-9) -> SuiteReport:
    """Residuals of the connection and curvature identities implied by the structure."""
    t = Tally(tol)
    n = M.n
    eye = np.eye(n)
    for p in points:
        geo = M.at(p)
        at = LcsAtPoint(geo, s)
        g = geo.g.value
        R = geo.riemann.value  # R^a_{bcd}
        xi, eta, a, k = at.xi, at.eta, at.alpha, at.k
        F = at.frame
        nxi = at.nabla_xi
        t.add("eta_nabla_xi", F(nxi @ eta, "d"))
        t.add("nabla_xi_xi", F(xi @ nxi, "u"))
        R_xi = np.einsum("abcd,b->cda", R, xi)  # R(∂_c, ∂_d)ξ
        t.add(
            "R_XY_xi",
            F(R_xi - k * (np.einsum("d,ac->cda", eta, eye) - np.einsum("c,ad->cda", eta, eye)), "ddu"),
        )
        eta_R = np.einsum("a,azxy->xyz", eta, R)  # η(R(∂_x, ∂_y)∂_z)
        t.add(
            "eta_R_XYZ",
            F(eta_R - k * (np.einsum("x,yz->xyz", eta, g) - np.einsum("y,xz->xyz", eta, g)), "ddd"),
        )
        t.add("eta_R_XY_xi", F(np.einsum("cda,a->cd", R_xi, eta), "dd"))
        neta = geo.nabla(at.eta_j, "d").value
        t.add("nabla_eta", F(neta - a * (g + np.outer(eta, eta)), "dd"))
        t.add("nabla_xi_eta", F(xi @ neta, "d"))
        dxi = at.xi_j.grad().value  # [i, l] = ∂_l ξ^i
        dphi = at.phi_j.grad().value  # [i, j, l] = ∂_l φ^i_j
        phi = at.phi
        lie_phi = np.einsum("k,ijk->ij", xi, dphi) - np.einsum("kj,ik->ij", phi, dxi) + np.einsum("ik,kj->ij", phi, dxi)
        t.add("lie_xi_phi", F(lie_phi, "ud"))
        deta = at.eta_j.grad().value  # [j, l] = ∂_l η_j
        t.add("lie_xi_eta", F(deta @ xi + eta @ dxi, "d"))
        dg = geo.g.grad().value  # [i, j, l] = ∂_l g_ij
        lie_g = np.einsum("k,ijk->ij", xi, dg) + np.einsum("kj,ki->ij", g, dxi) + np.einsum("ik,kj->ij", g, dxi)
        t.add("lie_xi_g", F(lie_g - 2.0 * neta, "dd"))
    return SuiteReport("structure-identities", t.checks())


def verify_ricci_identities(
    M: ChartManifold, s: LcsStructure, points: Sequence[Point], tol: float = 1e-9
) -> SuiteReport:
    """Ricci-tensor consequences of the structure (ξ-direction, φ-invariance, eigenvector)."""
    t = Tally(tol)
    n = M.n
    for p in points:
        geo = M.at(p)
        at = LcsAtPoint(geo, s)
        S = geo.ricci.value
        Q = geo.ricci_operator.value
        xi, eta, phi, k = at.xi, at.eta, at.phi, at.k
        F = at.frame
        xi_alpha = float(at.xi_of(at.alpha_j).value)
        t.add("S_X_xi", F(S @ xi - (n - 1) * k * eta, "d"))
        t.add(
            "S_phiX_phiY",
            F(np.einsum("ij,ik,jl->kl", S, phi, phi) - S - (n - 1) * k * np.outer(eta, eta), "dd"),
        )
        t.add("xi_alpha_plus_rho", xi_alpha + at.rho)
        t.add("Q_phi_commute", F(Q @ phi - phi @ Q, "ud"))
        t.add("Q_xi_eigen", F(Q @ xi - (n - 1) * (at.alpha**2 + xi_alpha) * xi, "u"))
    return SuiteReport("structure-ricci", t.checks())
