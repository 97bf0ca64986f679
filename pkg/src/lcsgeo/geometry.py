"""Charts, metrics, frames and the Levi-Civita curvature pipeline.

Sign conventions::

    R(X,Y)Z = ∇_X ∇_Y Z - ∇_Y ∇_X Z - ∇_[X,Y] Z,   R(∂_c, ∂_d)∂_b = R^a_{bcd} ∂_a
    S(X,Y)  = tr(Z -> R(Z,X)Y)                      S_bd = R^a_{bad}
    Δf      = tr_g Hess f

Covariant derivatives put the differentiating slot first:
``(∇T)[k, ...] = (∇_{∂_k} T)[...]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import jets
from .expr import Expr, as_expr, compile_expr, coordinates, differentiate
from .jets import Jet

CONVENTIONS = {
    "riemann_sign": "R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z",
    "ricci": "S(X,Y) = trace(Z -> R(Z,X)Y)",
    "laplacian_sign": "Delta f = trace_g Hess(f)",
}

DOMAIN_MARGIN = 1e-8


class GeometryError(ValueError):
    pass


class PointError(GeometryError):
    """Point outside the chart domain."""


class SingularMetricError(GeometryError):
    pass


class FrameError(GeometryError):
    pass


class VarianceError(GeometryError):
    pass


Point = tuple  # one real per coordinate


# ---------------------------------------------------------------------------
# Tensor values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TensorValue:
    """Dense tensor at a point. ``variance`` has one 'u' or 'd' per slot."""

    data: np.ndarray
    variance: str
    basis: str = "coordinate"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        if data.ndim != len(self.variance) or set(self.variance) - {"u", "d"}:
            raise VarianceError(f"shape {data.shape} does not match variance {self.variance!r}")

    @property
    def order(self) -> tuple[int, int]:
        return self.variance.count("u"), self.variance.count("d")

    def lower(self, slot: int, metric: np.ndarray) -> "TensorValue":
        if self.variance[slot] != "u":
            raise VarianceError(f"slot {slot} is already covariant")
        return self._apply(slot, metric, "d")

    def raise_(self, slot: int, metric_inv: np.ndarray) -> "TensorValue":
        if self.variance[slot] != "d":
            raise VarianceError(f"slot {slot} is already contravariant")
        return self._apply(slot, metric_inv, "u")

    def _apply(self, slot: int, m: np.ndarray, new: str) -> "TensorValue":
        data = np.moveaxis(np.tensordot(m, self.data, axes=([1], [slot])), 0, slot)
        var = self.variance[:slot] + new + self.variance[slot + 1 :]
        return TensorValue(data, var, self.basis)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


def _contract_slots(data: np.ndarray, variance: str, down: np.ndarray, up: np.ndarray) -> np.ndarray:
    """Apply ``down`` to covariant slots and ``up`` to contravariant slots.

    ``down[i, a]`` maps coordinate slot i to new slot a (covariant rule),
    ``up[a, i]`` maps contravariant coordinate slot i to a.
    """
    out = data
    for s, v in enumerate(variance):
        m = down.T if v == "d" else up
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [s])), 0, s)
    return out


# ---------------------------------------------------------------------------
# Manifold
# ---------------------------------------------------------------------------


class ChartManifold:
    """A single chart with a metric given in closed form.

    ``frame`` (optional) is a list of frame vectors, each a list of its
    coordinate components. ``signature`` is the declared constant Gram matrix
    diagonal of the frame.
    """

    def __init__(
        self,
        name: str,
        coords: Sequence[str],
        metric: Sequence[Sequence[Expr | str]],
        domain: Iterable[Expr | str] = (),
        frame: Sequence[Sequence[Expr | str]] | None = None,
        signature: Sequence[int] | None = None,
        scalars: Mapping[str, Expr | str] | None = None,
        jet_order: int = 3,
    ):
        self.name = name
        self.coords = tuple(coords)
        self.n = len(self.coords)
        if self.n < 2:
            raise GeometryError("dimension must be at least 2")
        conv = lambda e: _to_expr(e, self.coords)  # noqa: E731
        g = [[conv(metric[i][j]) for j in range(self.n)] for i in range(self.n)]
        if len(metric) != self.n or any(len(row) != self.n for row in metric):
            raise GeometryError("metric must be n x n")
        for i in range(self.n):
            for j in range(i):
                if g[i][j] != g[j][i]:
                    raise GeometryError(f"metric is not symmetric at ({i + 1},{j + 1})")
        self.metric = tuple(tuple(row) for row in g)
        self.domain = tuple(conv(d) for d in domain)
        if frame is not None:
            if len(frame) != self.n or any(len(v) != self.n for v in frame):
                raise FrameError("frame must hold n vectors of n components")
            self.frame = tuple(tuple(conv(c) for c in v) for v in frame)
        else:
            self.frame = None
        self.signature = None if signature is None else tuple(int(s) for s in signature)
        self.scalars = {k: conv(v) for k, v in (scalars or {}).items()}
        self.jet_order = jet_order
        self.space = jets.jet_space(self.n, jet_order)
        self._domain_fns = [compile_expr(d) for d in self.domain]
        self._deriv_cache: dict[Expr, list] = {}
        self._geom_cache: dict[tuple, "PointGeometry"] = {}

    def __repr__(self):
        return f"ChartManifold({self.name!r}, coords={self.coords})"

    def expr(self, source: Expr | str) -> Expr:
        return _to_expr(source, self.coords)

    def env(self, p: Point) -> dict[str, float]:
        if len(p) != self.n:
            raise PointError(f"point has {len(p)} values, chart has {self.n} coordinates")
        return dict(zip(self.coords, (float(v) for v in p)))

    def check_point(self, p: Point) -> None:
        env = self.env(p)
        for d, fn in zip(self.domain, self._domain_fns):
            v = fn(env)
            if not abs(v) > DOMAIN_MARGIN:
                raise PointError(f"point {tuple(p)} violates domain constraint {d} != 0 (value {v:.3g})")

    # -- jets -------------------------------------------------------------

    def _derivatives(self, e: Expr) -> list:
        """Compiled ``d^alpha e / alpha!`` for every monomial of the jet space."""
        cached = self._deriv_cache.get(e)
        if cached is not None:
            return cached
        space = self.space
        exprs: dict[tuple, Expr] = {}
        fns = []
        for alpha in space.monomials:
            if sum(alpha) == 0:
                d = e
            else:
                l = next(i for i, a in enumerate(alpha) if a)
                parent = list(alpha)
                parent[l] -= 1
                d = differentiate(exprs[tuple(parent)], self.coords[l])
            exprs[alpha] = d
            fact = math.prod(math.factorial(a) for a in alpha)
            fns.append((compile_expr(d), 1.0 / fact, d))
        self._deriv_cache[e] = fns
        return fns

    def derivative_exprs(self, e: Expr | str) -> dict[tuple, Expr]:
        """Symbolic partial derivatives of ``e`` up to the jet order, by multi-index."""
        e = self.expr(e)
        return {a: d for a, (_, _, d) in zip(self.space.monomials, self._derivatives(e))}

    def jet(self, exprs, p: Point) -> Jet:
        """Jet at ``p`` of an Expr or a nested array of Exprs."""
        env = self.env(p)
        arr = np.empty(_nested_shape(exprs), dtype=object)
        _fill(arr, exprs)
        c = np.zeros(arr.shape + (self.space.size,))
        for idx in np.ndindex(arr.shape):
            e = self.expr(arr[idx])
            for k, (fn, scale, _) in enumerate(self._derivatives(e)):
                c[idx + (k,)] = fn(env) * scale
        return Jet(c, self.jet_order, self.space)

    def at(self, p: Point) -> "PointGeometry":
        key = tuple(float(v) for v in p)
        geo = self._geom_cache.get(key)
        if geo is None:
            geo = PointGeometry(self, key)
            self._geom_cache[key] = geo
        return geo


def _to_expr(e, coords) -> Expr:
    if isinstance(e, str):
        from .expr import parse

        return parse(e, coords=coords)
    e = as_expr(e)
    unknown = coordinates(e) - set(coords)
    if unknown:
        raise GeometryError(f"expression uses undeclared coordinates {sorted(unknown)}")
    return e


def _nested_shape(x) -> tuple[int, ...]:
    if isinstance(x, np.ndarray) and x.dtype == object:
        return x.shape
    if isinstance(x, (list, tuple)):
        return (len(x),) + (_nested_shape(x[0]) if len(x) else ())
    return ()


def _fill(arr: np.ndarray, x) -> None:
    for idx in np.ndindex(arr.shape):
        item = x
        for i in idx:
            item = item[i]
        arr[idx] = item


# ---------------------------------------------------------------------------
# Point geometry
# ---------------------------------------------------------------------------


class PointGeometry:
    """All jets of the Levi-Civita pipeline at one point, computed lazily."""

    def __init__(self, M: ChartManifold, p: Point):
        M.check_point(p)
        self.M = M
        self.p = p
        self.n = M.n
        self.space = M.space
        self._cache: dict[str, object] = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def jet(self, exprs) -> Jet:
        return self.M.jet(exprs, self.p)

    @property
    def g(self) -> Jet:
        def build():
            g = self.jet(self.M.metric)
            det = np.linalg.det(g.value)
            scale = max(np.max(np.abs(g.value)), 1e-300) ** self.n
            if not abs(det) > 1e-13 * scale:
                raise SingularMetricError(f"metric is singular at {self.p}")
            return g

        return self._memo("g", build)

    @property
    def ginv(self) -> Jet:
        return self._memo("ginv", lambda: jets.inverse(self.g))

    @property
    def gamma(self) -> Jet:
        """Christoffel symbols ``Gamma[k, i, j] = Γ^k_{ij}``."""

        def build():
            dg = self.g.grad()  # dg[a, b, l] = ∂_l g_ab
            first = (
                jets.product("kji->kij", dg) + jets.product("kij->kij", dg) - jets.product("ijk->kij", dg)
            ).scale(0.5)
            return jets.product("km,mij->kij", self.ginv, first)

        return self._memo("gamma", build)

    @property
    def riemann(self) -> Jet:
        """``R[a, b, c, d] = R^a_{bcd}``."""

        def build():
            G = self.gamma
            dG = G.grad()  # dG[a, i, j, l] = ∂_l Γ^a_{ij}
            return (
                jets.product("adbc->abcd", dG)
                - jets.product("acbd->abcd", dG)
                + jets.product("ace,edb->abcd", G, G)
                - jets.product("ade,ecb->abcd", G, G)
            )

        return self._memo("riemann", build)

    @property
    def ricci(self) -> Jet:
        return self._memo("ricci", lambda: jets.product("abad->bd", self.riemann))

    @property
    def scal(self) -> Jet:
        return self._memo("scal", lambda: jets.product("bd,bd->", self.ginv, self.ricci))

    @property
    def ricci_operator(self) -> Jet:
        """``Q[i, j] = Q^i_j`` with g(QX, Y) = S(X, Y)."""
        return self._memo("Q", lambda: jets.product("ik,kj->ij", self.ginv, self.ricci))

    def nabla(self, T: Jet, variance: str) -> Jet:
        """Covariant derivative; the new covariant slot comes first."""
        r = len(variance)
        if T.c.ndim - 1 != r:
            raise VarianceError(f"jet of rank {T.c.ndim - 1} given variance {variance!r}")
        letters = "abcdefgh"[:r]
        dT = jets.product(f"{letters}z->z{letters}", T.grad())
        G = self.gamma
        result = dT
        for s, v in enumerate(variance):
            replaced = letters[:s] + "y" + letters[s + 1 :]
            if v == "u":
                term = jets.product(f"{letters[s]}zy,{replaced}->z{letters}", G, T)
                result = result + term
            else:
                term = jets.product(f"yz{letters[s]},{replaced}->z{letters}", G, T)
                result = result - term
        return result

    def directional(self, X: Jet, f: Jet) -> Jet:
        """X(f) for a vector jet X and a jet f of any shape (last index differentiated)."""
        df = f.grad()
        letters = "abcdefgh"[: f.c.ndim - 1]
        return jets.product(f"l,{letters}l->{letters}", X, df)

    # -- frame ------------------------------------------------------------

    @property
    def has_frame(self) -> bool:
        return self.M.frame is not None

    @property
    def E(self) -> Jet:
        """Frame matrix ``E[i, a]`` = i-th coordinate component of E_a."""
        if self.M.frame is None:
            raise FrameError("manifold has no frame")

        def build():
            vecs = self.jet(self.M.frame)  # [a, i]
            E = jets.product("ai->ia", vecs)
            if abs(np.linalg.det(E.value)) < 1e-12:
                raise FrameError(f"frame is degenerate at {self.p}")
            return E

        return self._memo("E", build)

    @property
    def theta(self) -> Jet:
        """Dual coframe ``theta[a, i]``."""
        return self._memo("theta", lambda: jets.inverse(self.E))

    @property
    def gram(self) -> Jet:
        return self._memo("gram", lambda: jets.product("ia,jb,ij->ab", self.E, self.E, self.g))

    def to_frame(self, t: TensorValue) -> TensorValue:
        if t.basis == "frame":
            return t
        data = _contract_slots(t.data, t.variance, self.E.value, self.theta.value)
        return TensorValue(data, t.variance, "frame")

    def in_basis(self, t: TensorValue, basis: str) -> TensorValue:
        if basis == "coordinate":
            if t.basis != "coordinate":
                raise VarianceError("cannot convert frame tensors back to coordinates")
            return t
        if basis == "frame":
            return self.to_frame(t)
        if basis == "auto":
            return self.to_frame(t) if self.has_frame else t
        raise ValueError(f"unknown basis {basis!r}")

    def metric_in(self, basis: str) -> tuple[np.ndarray, np.ndarray]:
        if basis == "frame":
            G = self.gram.value
            return G, np.linalg.inv(G)
        return self.g.value, self.ginv.value


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _pick_basis(geo: PointGeometry, basis: str) -> str:
    if basis == "auto":
        return "frame" if geo.has_frame else "coordinate"
    return basis


def metric_at(M: ChartManifold, p: Point, basis: str = "coordinate") -> tuple[TensorValue, TensorValue]:
    geo = M.at(p)
    basis = _pick_basis(geo, basis)
    g, ginv = geo.metric_in(basis)
    return TensorValue(g, "dd", basis), TensorValue(ginv, "uu", basis)


def christoffel(M: ChartManifold, p: Point) -> TensorValue:
    """Γ^k_{ij} as a (1,2) tensor array ``[k, i, j]`` in the coordinate basis."""
    return TensorValue(M.at(p).gamma.value, "udd")


def frame_connection(M: ChartManifold, p: Point) -> np.ndarray:
    """Connection coefficients of the frame from the Koszul formula.

    ``omega[a, b, c]`` with ∇_{E_a} E_b = omega[a, b, c] E_c. Uses only the
    metric values, the frame and its brackets, never the Christoffel symbols.
    """
    geo = M.at(p)
    E = geo.E
    theta = geo.theta.value
    G = geo.gram
    Ev = E.value
    dE = E.grad()  # dE[i, a, l] = ∂_l E^i_a
    # [E_a, E_b]^i = E_a^l ∂_l E_b^i - E_b^l ∂_l E_a^i
    bracket = np.einsum("la,ibl->abi", Ev, dE.value) - np.einsum("lb,ial->abi", Ev, dE.value)
    c = np.einsum("ci,abi->abc", theta, bracket)  # [E_a, E_b] = c[a,b,e] E_e
    Gv = G.value
    dG = np.einsum("abl,lc->abc", G.grad().value, Ev)  # dG[b, d, a] = E_a(G_bd)
    koszul = 0.5 * (
        np.einsum("bda->abd", dG)
        + np.einsum("adb->abd", dG)
        - np.einsum("abd->abd", dG)
        + np.einsum("abe,ed->abd", c, Gv)
        - np.einsum("ade,eb->abd", c, Gv)
        - np.einsum("bde,ea->abd", c, Gv)
    )
    return np.einsum("abd,dc->abc", koszul, np.linalg.inv(Gv))


def frame_connection_from_christoffel(M: ChartManifold, p: Point) -> np.ndarray:
    """Same coefficients obtained by changing basis from Γ (cross-check path)."""
    geo = M.at(p)
    E = geo.E.value
    dE = geo.E.grad().value
    theta = geo.theta.value
    Gam = geo.gamma.value
    v = np.einsum("ia,kbi->abk", E, dE) + np.einsum("ia,jb,kij->abk", E, E, Gam)
    return np.einsum("ck,abk->abc", theta, v)


def riemann(M: ChartManifold, p: Point, basis: str = "coordinate") -> tuple[TensorValue, TensorValue]:
    geo = M.at(p)
    R = geo.riemann.value
    up = TensorValue(R, "uddd")
    down = TensorValue(np.einsum("ae,ebcd->abcd", geo.g.value, R), "dddd")
    return geo.in_basis(up, basis), geo.in_basis(down, basis)


def ricci(M: ChartManifold, p: Point, basis: str = "coordinate") -> TensorValue:
    geo = M.at(p)
    return geo.in_basis(TensorValue(geo.ricci.value, "dd"), basis)


def scalar_curvature(M: ChartManifold, p: Point) -> float:
    return float(M.at(p).scal.value)


def covariant_derivative(
    M: ChartManifold, T: Sequence, variance: str, p: Point, basis: str = "coordinate"
) -> TensorValue:
    """∇T for a tensor field given by coordinate component Exprs."""
    geo = M.at(p)
    shape = _nested_shape(T)
    if len(shape) != len(variance) or any(s != M.n for s in shape):
        raise VarianceError(f"components of shape {shape} do not match variance {variance!r}")
    jet = geo.jet(T)
    out = geo.nabla(jet, variance)
    return geo.in_basis(TensorValue(out.value, "d" + variance), basis)


def lie_derivative_metric(M: ChartManifold, X: Sequence, p: Point, basis: str = "coordinate") -> TensorValue:
    """(L_X g)(Y, Z) = g(∇_Y X, Z) + g(Y, ∇_Z X)."""
    geo = M.at(p)
    nX = geo.nabla(geo.jet(X), "u").value  # [k, i] = ∇_k X^i
    A = np.einsum("ki,ij->kj", nX, geo.g.value)
    return geo.in_basis(TensorValue(A + A.T, "dd"), basis)


@dataclass(frozen=True)
class HessianPackage:
    grad: TensorValue
    hess: TensorValue
    laplacian: float


def hessian_package(M: ChartManifold, f: Expr | str, p: Point, basis: str = "coordinate") -> HessianPackage:
    geo = M.at(p)
    fj = geo.jet(M.expr(f))
    df = fj.grad()
    grad = jets.product("ij,j->i", geo.ginv, df).value
    H = geo.nabla(df, "d").value
    lap = float(np.einsum("ij,ij->", geo.ginv.value, H))
    return HessianPackage(
        geo.in_basis(TensorValue(grad, "u"), basis), geo.in_basis(TensorValue(H, "dd"), basis), lap
    )


def divergence_sym2(M: ChartManifold, T: Sequence, p: Point, basis: str = "coordinate") -> TensorValue:
    """(div T)_j = g^{ik} (∇_i T)_{kj} for a symmetric 2-tensor field."""
    geo = M.at(p)
    Tj = geo.jet(T)
    if Tj.shape != (M.n, M.n):
        raise VarianceError("expected an n x n symmetric tensor field")
    if np.max(np.abs(Tj.value - Tj.value.T)) > 1e-12 * max(1.0, np.max(np.abs(Tj.value))):
        raise VarianceError("tensor field is not symmetric")
    nT = geo.nabla(Tj, "dd").value
    div = np.einsum("ik,ikj->j", geo.ginv.value, nT)
    return geo.in_basis(TensorValue(div, "d"), basis)


def tensor_norm_sq(M: ChartManifold, T: TensorValue, p: Point) -> float:
    """Full metric self-contraction |T|^2; indefinite in Lorentzian signature."""
    g, ginv = M.at(p).metric_in(T.basis)
    dual = T.data
    for s, v in enumerate(T.variance):
        m = ginv if v == "d" else g
        dual = np.moveaxis(np.tensordot(m, dual, axes=([1], [s])), 0, s)
    return float(np.sum(T.data * dual))


def signature(M: ChartManifold, p: Point) -> tuple[int, ...]:
    """Signs of the metric eigenvalues, positives first."""
    ev = np.linalg.eigvalsh(M.at(p).g.value)
    return tuple(sorted((1 if e > 0 else -1 for e in ev), reverse=True))


def signature_label(sig: Sequence[int]) -> str:
    return "(" + ",".join("+" if s > 0 else "-" for s in sig) + ")"
