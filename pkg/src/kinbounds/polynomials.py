"""Sparse multivariate polynomials with exact rational coefficients.

A monomial is a tuple of non-negative integer exponents, one per variable;
a polynomial is a dict mapping monomials to ``Fraction`` coefficients with
zero coefficients never stored.  Everything stays in exact rationals so the
invariant substitutions and moment-equation expansions downstream introduce
no rounding of their own.
"""

from fractions import Fraction
from math import factorial

Monomial = tuple[int, ...]
Poly = dict[Monomial, Fraction]


def zero() -> Poly:
    return {}


def constant(value, nvars: int) -> Poly:
    c = Fraction(value)
    if c == 0:
        return {}
    return {(0,) * nvars: c}


def variable(index: int, nvars: int) -> Poly:
    mono = tuple(1 if k == index else 0 for k in range(nvars))
    return {mono: Fraction(1)}


def affine(const, coeffs) -> Poly:
    """Build const + sum_j coeffs[j] * x_j."""
    nvars = len(coeffs)
    p = constant(const, nvars)
    for j, c in enumerate(coeffs):
        c = Fraction(c)
        if c != 0:
            mono = tuple(1 if k == j else 0 for k in range(nvars))
            p[mono] = c
    return p


def add_scaled(acc: Poly, p: Poly, scale=1) -> None:
    """In-place acc += scale * p, dropping exact zeros."""
    scale = Fraction(scale)
    if scale == 0:
        return
    for mono, c in p.items():
        new = acc.get(mono, Fraction(0)) + scale * c
        if new == 0:
            acc.pop(mono, None)
        else:
            acc[mono] = new


def mul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for mp, cp in p.items():
        for mq, cq in q.items():
            mono = tuple(a + b for a, b in zip(mp, mq))
            new = out.get(mono, Fraction(0)) + cp * cq
            if new == 0:
                out.pop(mono, None)
            else:
                out[mono] = new
    return out


def scale(p: Poly, factor) -> Poly:
    factor = Fraction(factor)
    if factor == 0:
        return {}
    return {mono: c * factor for mono, c in p.items()}


def falling_product(expr: Poly, count: int, nvars: int) -> Poly:
    """expr * (expr - 1) * ... * (expr - count + 1) / count!

    With expr a species count this is the number of distinct reactant
    combinations, i.e. the binomial coefficient C(expr, count).
    """
    out = constant(1, nvars)
    for u in range(count):
        term = dict(expr)
        add_scaled(term, constant(1, nvars), -u)
        out = mul(out, term)
    return scale(out, Fraction(1, factorial(count)))


def evaluate(p: Poly, point):
    """Evaluate at a point; exact when the point is ints/Fractions."""
    total = Fraction(0)
    for mono, c in p.items():
        term = c
        for x, e in zip(point, mono):
            if e:
                term *= Fraction(x) ** e
        total += term
    return total


def evaluate_float(p, point) -> float:
    """Float evaluation for hot loops; p maps monomials to floats."""
    total = 0.0
    for mono, c in p.items():
        term = float(c)
        for x, e in zip(point, mono):
            if e == 1:
                term *= x
            elif e:
                term *= x ** e
        total += term
    return total


def degree(p: Poly) -> int:
    if not p:
        return 0
    return max(sum(mono) for mono in p)


def to_float(p: Poly) -> dict:
    return {mono: float(c) for mono, c in p.items()}
