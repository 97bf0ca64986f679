"""Truncated Taylor jets of tensor fields at a point.

A jet stores, for every tensor component, the Taylor coefficients
``d^a f(p) / a!`` for all multi-indices ``|a| <= order``. Products are
truncated polynomial products, so Leibniz and chain rules are exact; the
only inputs are symbolic derivatives evaluated at the point.

Arrays have shape ``tensor_shape + (C,)`` where ``C`` counts monomials.
"""

from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def _monomials(n: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return out


class JetSpace:
    """Monomial bookkeeping for ``n`` variables truncated at ``order``."""

    def __init__(self, n: int, order: int):
        self.n = n
        self.order = order
        self.monomials = _monomials(n, order)
        self.size = len(self.monomials)
        self.index = {a: k for k, a in enumerate(self.monomials)}
        self.degree = np.array([sum(a) for a in self.monomials])
        size = self.size
        self.mul = np.zeros((size, size, size))
        for p, a in enumerate(self.monomials):
            for q, b in enumerate(self.monomials):
                s = tuple(x + y for x, y in zip(a, b))
                r = self.index.get(s)
                if r is not None:
                    self.mul[p, q, r] = 1.0
        # deriv[l, p, r]: coefficient of monomial r in d/dx_l of monomial p
        self.deriv = np.zeros((n, size, size))
        for p, a in enumerate(self.monomials):
            for l in range(n):
                if a[l]:
                    b = list(a)
                    b[l] -= 1
                    self.deriv[l, p, self.index[tuple(b)]] = a[l]
        self.unit = [self.index[tuple(int(i == l) for i in range(n))] for l in range(n)] if order else []

    def mask(self, order: int) -> np.ndarray:
        return (self.degree <= order).astype(float)


@lru_cache(maxsize=None)
def jet_space(n: int, order: int) -> JetSpace:
    return JetSpace(n, order)


@dataclass(frozen=True)
class Jet:
    c: np.ndarray
    order: int
    space: JetSpace

    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def truncate(self, order: int) -> "Jet":
        order = min(order, self.order)
        return Jet(self.c * self.space.mask(order), order, self.space)

    def grad(self) -> "Jet":
        """Partial derivatives, appended as the last tensor index."""
        if self.order < 1:
            raise ValueError("jet has no derivative information left")
        c = np.einsum("...p,lpr->...lr", self.c, self.space.deriv)
        return Jet(c, self.order - 1, self.space)

    def __add__(self, other):
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            return Jet(self.c + other.c, order, self.space).truncate(order)
        return Jet(self.c + _const_coeffs(other, self), self.order, self.space)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Jet(-self.c, self.order, self.space)

    def scale(self, k: float) -> "Jet":
        return Jet(self.c * k, self.order, self.space)

    def transpose(self, *axes: int) -> "Jet":
        return Jet(np.transpose(self.c, tuple(axes) + (self.c.ndim - 1,)), self.order, self.space)

    def __getitem__(self, idx) -> "Jet":
        return Jet(self.c[idx], self.order, self.space)


def _const_coeffs(x, like: Jet) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    out = np.zeros(np.broadcast_shapes(arr.shape, like.shape) + (like.space.size,))
    out[..., 0] = arr
    return out


def constant(value, space: JetSpace, order: int | None = None) -> Jet:
    arr = np.asarray(value, dtype=float)
    c = np.zeros(arr.shape + (space.size,))
    c[..., 0] = arr
    return Jet(c, space.order if order is None else order, space)


_JET_LETTERS = string.ascii_uppercase


def product(spec: str, *jets: Jet) -> Jet:
    """Einstein-summed product of jets, e.g. ``product("ij,jk->ik", a, b)``.

    Tensor indices use lowercase letters; the jet axes are multiplied as
    truncated polynomials.
    """
    ins, out = spec.replace(" ", "").split("->")
    terms = ins.split(",")
    if len(terms) != len(jets):
        raise ValueError("operand count does not match subscripts")
    space = jets[0].space
    order = min(j.order for j in jets)
    if len(jets) == 1:
        c = np.einsum(f"{terms[0]}A->{out}A", jets[0].c)
        return Jet(c, order, space)
    operands: list = []
    subs: list[str] = []
    letters = iter(_JET_LETTERS)
    prev = next(letters)
    operands.append(jets[0].c)
    subs.append(terms[0] + prev)
    for term, jet in zip(terms[1:], jets[1:]):
        cur = next(letters)
        res = next(letters)
        operands.append(jet.c)
        subs.append(term + cur)
        operands.append(space.mul)
        subs.append(prev + cur + res)
        prev = res
    c = np.einsum(",".join(subs) + "->" + out + prev, *operands, optimize="greedy")
    return Jet(c, order, space).truncate(order)


def scalar_mul(a: Jet, t: Jet) -> Jet:
    """Multiply a scalar jet ``a`` into every component of ``t``."""
    letters = string.ascii_lowercase[: t.c.ndim - 1]
    return product(f",{letters}->{letters}", a, t)


def inverse(m: Jet) -> Jet:
    """Inverse of a square matrix jet via the nilpotent Neumann series."""
    space = m.space
    m0 = m.value
    inv0 = np.linalg.inv(m0)
    inv0_jet = constant(inv0, space, m.order)
    nil = Jet(m.c.copy(), m.order, space)
    nil.c[..., 0] = 0.0
    step = -product("ij,jk->ik", inv0_jet, nil)
    result = inv0_jet
    power = constant(np.eye(m0.shape[0]), space, m.order)
    for _ in range(m.order):
        power = product("ij,jk->ik", power, step)
        result = result + product("ij,jk->ik", power, inv0_jet)
    return result


def derivative_coefficient(jet: Jet, alpha: tuple[int, ...]) -> np.ndarray:
    """The partial derivative ``d^alpha`` (not divided by alpha!) at the point."""
    k = jet.space.index[alpha]
    return jet.c[..., k] * float(math.prod(math.factorial(a) for a in alpha))
