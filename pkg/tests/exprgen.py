"""Deterministic random expressions that stay smooth on [0.5, 2]^3."""

import random

from lcsgeo.expr import Add, Const, Coord, Div, Func, Mul, Neg, Pow, Sub

COORDS = ("x", "y", "z")


def random_expr(rng: random.Random, depth: int = 4):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return Coord(rng.choice(COORDS))
        return Const(rng.randint(-3, 3))
    a = random_expr(rng, depth - 1)
    b = random_expr(rng, depth - 1)
    pick = rng.randrange(10)
    if pick == 0:
        return Add(a, b)
    if pick == 1:
        return Sub(a, b)
    if pick == 2:
        return Mul(a, b)
    if pick == 3:
        return Neg(a)
    if pick == 4:
        return Pow(a, rng.choice([2, 3]))
    if pick == 5:
        return Func(rng.choice(["sin", "cos"]), a)
    if pick == 6:
        return Div(a, Add(Const(2), Func("sin", b)))
    if pick == 7:
        return Func("log", Add(Const(2), Func("cos", a)))
    if pick == 8:
        return Func("sqrt", Add(Const(3), Func("sin", a)))
    return Pow(Add(Const(3), Func("cos", a)), -1)
