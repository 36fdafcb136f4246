"""Moment basis ordering and the truncated moment ODE matrices."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from kinbounds import (
    build_generator,
    build_moment_odes,
    default_relaxation_order,
    enumerate_states,
    initial_probability_vector,
    moment_basis,
    shifted_monomial_delta,
    solve_cme,
)


def test_moment_basis_one_variable():
    assert moment_basis(1, 3) == ((0,), (1,), (2,), (3,))


def test_moment_basis_two_variables():
    assert moment_basis(2, 2) == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert len(moment_basis(2, 4)) == 15


def test_moment_basis_is_graded():
    basis = moment_basis(3, 4)
    orders = [sum(mono) for mono in basis]
    assert orders == sorted(orders)
    assert len(set(basis)) == len(basis)


def test_shifted_monomial_delta_simple():
    assert shifted_monomial_delta((1,), (-1,)) == {(0,): -1}
    assert shifted_monomial_delta((2,), (-1,)) == {(1,): -2, (0,): 1}
    assert shifted_monomial_delta((2,), (0,)) == {}


def test_shifted_monomial_delta_cross():
    delta = shifted_monomial_delta((1, 1), (-1, 1))
    assert delta == {(1, 0): 1, (0, 1): -1, (0, 0): -1}
    # (x1 - 1)(x2 + 1) - x1 x2 evaluated on a small grid
    for x1, x2 in itertools.product(range(4), repeat=2):
        direct = (x1 - 1) * (x2 + 1) - x1 * x2
        via_poly = sum(c * x1**e1 * x2**e2 for (e1, e2), c in delta.items())
        assert via_poly == direct


def test_toy_matrices(toy):
    dyn = build_moment_odes(toy, m=3)
    assert (dyn.m, dyn.M, dyn.q_max, dyn.n_low) == (3, 4, 2, 4)
    assert dyn.basis_low == ((0,), (1,), (2,), (3,))
    assert dyn.basis_high == ((4,),)
    expected_L = np.array(
        [
            [0, 0, 0, 0],
            [0, -1, -1, 0],
            [0, 1, -1, -2],
            [0, -1, 2, 0],
        ],
        dtype=float,
    )
    assert np.array_equal(dyn.A_L, expected_L)
    assert np.array_equal(dyn.A_H, np.array([[0.0], [0.0], [0.0], [-3.0]]))


def test_zero_row_and_order_growth(reversible):
    dyn = build_moment_odes(reversible, m=3)
    assert not dyn.A_L[0].any()
    assert not dyn.A_H[0].any()
    # a row for |j| can only touch moments of order <= |j| + q_max - 1
    for row, j in enumerate(dyn.basis_low):
        limit = sum(j) + dyn.q_max - 1
        for col in np.nonzero(dyn.A_L[row])[0]:
            assert sum(dyn.basis_low[col]) <= limit
        for col in np.nonzero(dyn.A_H[row])[0]:
            assert sum(dyn.basis_high[col]) <= limit


def test_chain_has_no_closure_block(chain):
    dyn = build_moment_odes(chain, m=2)
    assert dyn.A_H.shape == (6, 0)
    mean_block = dyn.A_L[1:3, 1:3]
    eigs = sorted(np.linalg.eigvals(mean_block).real)
    assert eigs == pytest.approx([-3.0, -1.0])


def test_default_relaxation_order(toy, chain):
    assert default_relaxation_order(build_moment_odes(toy, m=3)) == 2
    assert default_relaxation_order(build_moment_odes(chain, m=2)) == 1
    assert default_relaxation_order(build_moment_odes(chain, m=3)) == 2


def test_m_must_be_positive(toy):
    with pytest.raises(ValueError):
        build_moment_odes(toy, m=0)


def test_csv_dump_round_trips(toy):
    dyn = build_moment_odes(toy, m=3)
    lines = dyn.to_csv().strip().splitlines()
    assert lines[0] == "d/dt,mu(0),mu(1),mu(2),mu(3),mu(4)"
    assert len(lines) == 1 + dyn.n_low
    row1 = lines[2].split(",")
    assert row1[0] == "mu(1)"
    assert [float(v) for v in row1[1:]] == [0.0, -1.0, -1.0, 0.0, 0.0]


def test_ode_residual_against_oracle(reversible):
    """Finite-differenced oracle moments must satisfy the linear system."""
    dyn = build_moment_odes(reversible, m=3)
    space = enumerate_states(reversible)
    G = build_generator(reversible, space)
    p0 = initial_probability_vector(reversible, space)
    h = 1e-3
    for t in (0.3, 1.0):
        stencil = [t + k * h for k in (-2, -1, 1, 2)]
        sol = solve_cme(reversible, space, G, p0, stencil + [t])
        mu = sol.moments(dyn.basis)
        deriv = (mu[0] - 8 * mu[1] + 8 * mu[2] - mu[3]) / (12 * h)
        rhs = dyn.A_L @ mu[4][: dyn.n_low] + dyn.A_H @ mu[4][dyn.n_low :]
        scale = 1.0 + np.abs(mu[4][: dyn.n_low]).max()
        assert np.abs(deriv[: dyn.n_low] - rhs).max() <= 1e-6 * scale
