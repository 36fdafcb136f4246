"""Conic solver contract: statuses, determinism, published bound side."""

import pytest

from kinbounds import (
    AffineSymmetricBlock,
    BoundQuery,
    ConicProblem,
    Tolerances,
    ValidationError,
    assemble_mean_bound,
    build_moment_odes,
    solve,
)
from kinbounds.solver import INFEASIBLE, ITER_LIMIT, OPTIMAL, UNBOUNDED


class FlatLayout:
    """Bare layout stand-in for hand-built problems."""

    def __init__(self, size: int):
        self.size = size


def flat_problem(size, sense, objective, equalities=(), blocks=(), constant=0.0):
    return ConicProblem(
        layout=FlatLayout(size),
        sense=sense,
        objective=objective,
        objective_constant=constant,
        equalities=tuple(equalities),
        blocks=tuple(blocks),
    )


def scalar_block(idx, coeff=1.0, const=0.0):
    return AffineSymmetricBlock(size=1, cells={(0, 0): (const, ((idx, coeff),))})


def test_minimize_over_nonnegative_scalar():
    problem = flat_problem(1, "min", {0: 1.0}, blocks=[scalar_block(0)])
    result = solve(problem)
    assert result.status == OPTIMAL
    assert abs(result.objective) <= 1e-7
    assert result.x[0] == pytest.approx(0.0, abs=1e-6)
    assert result.gap is not None and result.gap <= 1e-6


def test_maximize_schur_complement():
    # max s subject to [[2 - s, 1], [1, 1]] >= 0, so s <= 2 - 1
    block = AffineSymmetricBlock(
        size=2,
        cells={
            (0, 0): (2.0, ((0, -1.0),)),
            (1, 0): (1.0, ()),
            (1, 1): (1.0, ()),
        },
    )
    result = solve(flat_problem(1, "max", {0: 1.0}, blocks=[block]))
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(1.0, abs=1e-6)


def test_contradictory_equalities_infeasible():
    problem = flat_problem(
        1,
        "min",
        {0: 1.0},
        equalities=[(((0, 1.0),), 1.0), (((0, 1.0),), 2.0)],
        blocks=[scalar_block(0)],
    )
    result = solve(problem)
    assert result.status == INFEASIBLE
    assert result.objective is None
    assert result.backend == "presolve"


def test_duplicate_equalities_are_dropped():
    problem = flat_problem(
        1,
        "min",
        {0: 1.0},
        equalities=[(((0, 1.0),), 1.0), (((0, 2.0),), 2.0)],
        blocks=[scalar_block(0)],
    )
    result = solve(problem)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(1.0, abs=1e-7)


def test_dependent_consistent_rows():
    # x + y = 1 (twice, scaled) and x - y = 0 pins x = y = 1/2
    rows = [
        (((0, 1.0), (1, 1.0)), 1.0),
        (((0, 2.0), (1, 2.0)), 2.0),
        (((0, 1.0), (1, -1.0)), 0.0),
    ]
    problem = flat_problem(
        2,
        "min",
        {0: 1.0},
        equalities=rows,
        blocks=[scalar_block(0), scalar_block(1)],
    )
    result = solve(problem)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(0.5, abs=1e-7)


def test_unbounded_detection():
    problem = flat_problem(1, "max", {0: 1.0}, blocks=[scalar_block(0)])
    result = solve(problem)
    assert result.status == UNBOUNDED
    assert result.objective is None


def test_iteration_cap(toy):
    dynamics = build_moment_odes(toy, m=3)
    query = BoundQuery(
        species="A", statistic="mean", T=1.0, rho_values=(0.0, -2.0), sense="upper"
    )
    result = solve(assemble_mean_bound(toy, dynamics, query), iter_cap=1)
    assert result.status == ITER_LIMIT
    assert result.objective is None
    assert result.iterations >= 1


def test_requires_blocks():
    with pytest.raises(ValidationError):
        solve(flat_problem(1, "min", {0: 1.0}))


def test_validate_rejects_bad_indices():
    problem = flat_problem(1, "min", {7: 1.0}, blocks=[scalar_block(0)])
    with pytest.raises(ValidationError):
        solve(problem)


def test_deterministic_repeat(toy):
    dynamics = build_moment_odes(toy, m=3)
    query = BoundQuery(
        species="A", statistic="mean", T=1.0, rho_values=(0.0, -2.0), sense="upper"
    )
    problem = assemble_mean_bound(toy, dynamics, query)
    first = solve(problem, tol=Tolerances(), iter_cap=100)
    second = solve(problem, tol=Tolerances(), iter_cap=100)
    assert first.status == second.status == OPTIMAL
    assert first.objective == second.objective
    assert first.iterations == second.iterations


def test_published_bound_is_safe_side(toy):
    """The dual objective can only be looser than the primal optimum."""
    dynamics = build_moment_odes(toy, m=3)
    for sense in ("upper", "lower"):
        query = BoundQuery(
            species="A", statistic="mean", T=0.7, rho_values=(0.0, -2.0), sense=sense
        )
        result = solve(assemble_mean_bound(toy, dynamics, query))
        assert result.status == OPTIMAL
        if sense == "upper":
            assert result.objective >= result.primal_objective - 1e-9
        else:
            assert result.objective <= result.primal_objective + 1e-9
