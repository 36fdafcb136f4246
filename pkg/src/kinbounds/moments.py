"""Graded moment basis and the linear moment system d/dt mu = A mu.

For a reduced model with reactions of order up to q_max, the derivative of
any moment of order <= m involves moments of order up to M = m + q_max - 1.
The rows for orders <= m are split column-wise into A_L (columns of order
<= m) and A_H (columns of order m+1..M, the closure block).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from . import polynomials as poly
from .errors import OrderOverflow


def _grade(nvars: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples of the given total order, first variable highest first."""
    if nvars == 1:
        return [(order,)]
    out = []
    for lead in range(order, -1, -1):
        for rest in _grade(nvars - 1, order - lead):
            out.append((lead,) + rest)
    return out


def moment_basis(nvars: int, up_to_order: int) -> tuple[tuple[int, ...], ...]:
    """Graded ordering of all multi-indices with |j| <= up_to_order."""
    if nvars < 1:
        raise ValueError("need at least one independent species")
    indices = []
    for order in range(up_to_order + 1):
        indices.extend(_grade(nvars, order))
    assert len(indices) == comb(nvars + up_to_order, up_to_order)
    return tuple(indices)


def shifted_monomial_delta(j: tuple[int, ...], shift) -> dict:
    """(x + s)^j - x^j as an exact polynomial; zero when s = 0."""
    nvars = len(j)
    shifted = poly.constant(1, nvars)
    for var, (exponent, s) in enumerate(zip(j, shift)):
        if exponent == 0:
            continue
        # (x_var + s)^exponent by the binomial theorem
        factor: dict = {}
        for k in range(exponent + 1):
            mono = tuple(k if v == var else 0 for v in range(nvars))
            coeff = Fraction(comb(exponent, k)) * Fraction(s) ** (exponent - k)
            if coeff != 0:
                factor[mono] = coeff
        shifted = poly.mul(shifted, factor)
    poly.add_scaled(shifted, {tuple(j): Fraction(1)}, -1)
    return shifted


@dataclass(frozen=True)
class MomentDynamics:
    """Matrices of the truncated moment system for one reduced model."""

    m: int
    M: int
    q_max: int
    basis: tuple[tuple[int, ...], ...]
    n_low: int
    A_L: np.ndarray = field(repr=False)
    A_H: np.ndarray = field(repr=False)

    @property
    def basis_low(self) -> tuple[tuple[int, ...], ...]:
        return self.basis[: self.n_low]

    @property
    def basis_high(self) -> tuple[tuple[int, ...], ...]:
        return self.basis[self.n_low :]

    def to_csv(self) -> str:
        """Dump A_L | A_H with multi-index headers, for external diffing."""

        def name(mono) -> str:
            return "mu(" + ";".join(str(e) for e in mono) + ")"

        buf = io.StringIO()
        buf.write(",".join(["d/dt"] + [name(mono) for mono in self.basis]) + "\n")
        for row, mono in enumerate(self.basis_low):
            cells = [name(mono)]
            cells += [repr(float(v)) for v in self.A_L[row]]
            cells += [repr(float(v)) for v in self.A_H[row]]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def build_moment_odes(reduced, m: int) -> MomentDynamics:
    """Expand sum_r a_r(x) [(x+s_r)^j - x^j] for every |j| <= m.

    The row for j = 0 vanishes identically (probability conservation).
    """
    if m < 1:
        raise ValueError("moment truncation order m must be >= 1")
    nvars = reduced.n_independent
    q_max = reduced.q_max
    M = max(m, m + q_max - 1)
    basis = moment_basis(nvars, M)
    position = {mono: k for k, mono in enumerate(basis)}
    n_low = comb(nvars + m, m)

    A_L = np.zeros((n_low, n_low))
    A_H = np.zeros((n_low, len(basis) - n_low))
    for row, j in enumerate(basis[:n_low]):
        accum: dict = {}
        for prop, shift in zip(reduced.propensities, reduced.reduced_stoichiometry):
            delta = shifted_monomial_delta(j, shift)
            if delta:
                poly.add_scaled(accum, poly.mul(prop, delta))
        for mono, coeff in accum.items():
            col = position.get(mono)
            if col is None:
                raise OrderOverflow(f"term {mono} of row {j} exceeds order {M}")
            if col < n_low:
                A_L[row, col] += float(coeff)
            else:
                A_H[row, col - n_low] += float(coeff)
    return MomentDynamics(m=m, M=M, q_max=q_max, basis=basis, n_low=n_low, A_L=A_L, A_H=A_H)


def default_relaxation_order(dynamics: MomentDynamics) -> int:
    """Half-order n so the cone covers every moment the dynamics touch."""
    return (max(dynamics.M, dynamics.m) + 1) // 2
