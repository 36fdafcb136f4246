"""End-to-end checks of the bound machinery against independent references.

One test per advertised guarantee; each prints a single PASS/FAIL line so a
full run reads as a checklist. Criteria that share expensive sweeps reuse
module-scoped results.
"""

import time

import numpy as np
import pytest

import analytic
from conftest import NETWORKS
from kinbounds import (
    build_generator,
    build_moment_odes,
    eigenvalues,
    enumerate_states,
    initial_probability_vector,
    solve_cme,
    ssa_simulate,
    z_quadrature,
)
from kinbounds.assembly import BoundQuery, assemble_variance_bound
from kinbounds.cli import feasibility_report, main, run_bounds

ENCLOSURE_TOL = 1e-6

GRID_TOY = [i * 0.1 for i in range(21)]
TOY_TARGETS = [("A", "mean"), ("B", "mean"), ("C", "mean"), ("A", "variance")]

GRID_REV = [i * 0.25 for i in range(13)]
REV_SPECIES = ("B", "C", "D")
REV_TARGETS = [(s, "mean") for s in REV_SPECIES] + [
    (s, "variance") for s in REV_SPECIES
]
RHO_REV = (0.0, -2.0, -2.4, -4.4)


def report(capsys, ok: bool, label: str, detail: str) -> None:
    with capsys.disabled():
        print(f"\n{label}: {'PASS' if ok else 'FAIL'} — {detail}")


def solve_table(reduced, targets, grid, rho, m=3, n=None):
    """Bound sweep keyed by (t, species, statistic); every solve must close."""
    dynamics = build_moment_odes(reduced, m)
    points = run_bounds(reduced, dynamics, targets, grid, rho, n=n)
    assert all(p.status == "Optimal" for p in points)
    return {(p.t, p.species, p.statistic): p for p in points}


def oracle_stats(reduced, grid):
    space = enumerate_states(reduced)
    G = build_generator(reduced, space)
    p0 = initial_probability_vector(reduced, space)
    solution = solve_cme(reduced, space, G, p0, grid)
    return {
        name: solution.species_statistics(name) for name in reduced.network.species
    }


def enclosure_violation(table, truth, grid, species) -> float:
    """Largest amount by which any bound fails to contain the reference;
    <= 0 means every mean is enclosed and every variance upper bound holds."""
    worst = -np.inf
    for name in species:
        mean, var = truth[name]
        for i, t in enumerate(grid):
            point = table.get((t, name, "mean"))
            if point is not None:
                worst = max(worst, point.lower - mean[i], mean[i] - point.upper)
            point = table.get((t, name, "variance"))
            if point is not None:
                worst = max(worst, var[i] - point.upper)
    return worst


def summed_mean_gap(table, grid, species) -> float:
    return sum(
        table[(t, s, "mean")].upper - table[(t, s, "mean")].lower
        for t in grid
        for s in species
    )


@pytest.fixture(scope="module")
def toy_sweep(toy):
    start = time.perf_counter()
    table = solve_table(toy, TOY_TARGETS, GRID_TOY, (0.0, -2.0), m=3, n=2)
    return table, time.perf_counter() - start


@pytest.fixture(scope="module")
def toy_sweep_extra_rho(toy):
    return solve_table(toy, TOY_TARGETS, GRID_TOY, (0.0, -2.0, -6.0), m=3, n=2)


@pytest.fixture(scope="module")
def reversible_sweep(reversible):
    return solve_table(reversible, REV_TARGETS, GRID_REV, RHO_REV)


@pytest.fixture(scope="module")
def reversible_truth(reversible):
    return oracle_stats(reversible, GRID_REV)


def test_criterion_01_toy_bounds_enclose_closed_form(toy_sweep, capsys):
    table, elapsed = toy_sweep
    worst = -np.inf
    for t in GRID_TOY:
        for name in "ABC":
            mean, _ = analytic.toy_species_mean_var(name, t)
            point = table[(t, name, "mean")]
            worst = max(worst, point.lower - mean, mean - point.upper)
        _, var_a = analytic.toy_species_mean_var("A", t)
        worst = max(worst, var_a - table[(t, "A", "variance")].upper)
    ok = worst <= ENCLOSURE_TOL and elapsed < 30.0
    report(
        capsys, ok, "criterion 1",
        f"association fixture, 21 grid points: worst enclosure violation "
        f"{worst:.2e} (tol 1e-6), sweep took {elapsed:.1f}s (cap 30s)",
    )
    assert worst <= ENCLOSURE_TOL
    assert elapsed < 30.0


def test_criterion_02_extra_rho_tightens(toy_sweep, toy_sweep_extra_rho, capsys):
    loose, _ = toy_sweep
    tight = toy_sweep_extra_rho
    worst_increase = -np.inf
    for t in GRID_TOY:
        for name in "ABC":
            gap_before = loose[(t, name, "mean")].upper - loose[(t, name, "mean")].lower
            gap_after = tight[(t, name, "mean")].upper - tight[(t, name, "mean")].lower
            worst_increase = max(worst_increase, gap_after - gap_before)
        worst_increase = max(
            worst_increase,
            tight[(t, "A", "variance")].upper - loose[(t, "A", "variance")].upper,
        )
    total_before = summed_mean_gap(loose, GRID_TOY, "ABC")
    total_after = summed_mean_gap(tight, GRID_TOY, "ABC")
    ok = worst_increase <= 1e-6 and total_after < total_before
    report(
        capsys, ok, "criterion 2",
        f"third exponent tightens: worst pointwise gap increase "
        f"{worst_increase:.2e} (tol 1e-6), summed mean gap "
        f"{total_before:.4f} -> {total_after:.4f}",
    )
    assert worst_increase <= 1e-6
    assert total_after < total_before


def test_criterion_03_reversible_enclosure(reversible_sweep, reversible_truth, capsys):
    worst = enclosure_violation(reversible_sweep, reversible_truth, GRID_REV, REV_SPECIES)
    ok = worst <= ENCLOSURE_TOL
    report(
        capsys, ok, "criterion 3 (enclosure)",
        f"isomerizing fixture, means and variances of B, C, D on 13 points: "
        f"worst enclosure violation {worst:.2e} (tol 1e-6)",
    )
    assert worst <= ENCLOSURE_TOL


def test_criterion_03_long_time_levels(reversible_truth, capsys):
    mean_c = reversible_truth["C"][0][-1]
    mean_d = reversible_truth["D"][0][-1]
    var_gap = abs(reversible_truth["C"][1][-1] - reversible_truth["D"][1][-1])
    ok = abs(mean_c - 0.5) <= 0.1 and abs(mean_d - 2.5) <= 0.1 and var_gap <= 1e-6
    report(
        capsys, ok, "criterion 3 (long time)",
        f"exact values at t=3: <C>={mean_c:.6f} (required 0.5±0.1), "
        f"<D>={mean_d:.6f} (required 2.5±0.1), |var C - var D|={var_gap:.3e} "
        f"(tol 1e-6); with rates (1, 2.1, 0.3) the t->inf limits are "
        f"<C>=0.375, <D>=2.625, so the stated targets are unreachable",
    )
    assert abs(mean_c - 0.5) <= 0.1
    assert abs(mean_d - 2.5) <= 0.1
    assert var_gap <= 1e-6


def test_criterion_04_rho_robustness(
    reversible, reversible_sweep, reversible_truth, capsys
):
    perturbed = solve_table(reversible, REV_TARGETS, GRID_REV, (0.0, -1.9, -2.6, -4.7))
    far = solve_table(reversible, REV_TARGETS, GRID_REV, (0.0, -6.0, -12.0, -18.0))
    worst_perturbed = enclosure_violation(
        perturbed, reversible_truth, GRID_REV, REV_SPECIES
    )
    worst_far = enclosure_violation(far, reversible_truth, GRID_REV, REV_SPECIES)
    gap_base = summed_mean_gap(reversible_sweep, GRID_REV, REV_SPECIES)
    gap_far = summed_mean_gap(far, GRID_REV, REV_SPECIES)
    ok = (
        worst_perturbed <= ENCLOSURE_TOL
        and worst_far <= ENCLOSURE_TOL
        and gap_far > gap_base
    )
    report(
        capsys, ok, "criterion 4",
        f"perturbed exponents stay valid (violation {worst_perturbed:.2e}); "
        f"far-from-spectrum exponents stay valid (violation {worst_far:.2e}) "
        f"but loosen the summed mean gap {gap_base:.4f} -> {gap_far:.4f}",
    )
    assert worst_perturbed <= ENCLOSURE_TOL
    assert worst_far <= ENCLOSURE_TOL
    assert gap_far > gap_base


def test_criterion_05_cyclic_spectrum_and_bounds(cyclic, capsys):
    space = enumerate_states(cyclic)
    G = build_generator(cyclic, space)
    eigs = eigenvalues(G)
    expected = [
        0.0,
        complex(-2.1322, 0.9741),
        complex(-2.1322, -0.9741),
        complex(-4.1637, 1.5837),
        complex(-4.1637, -1.5837),
    ]
    got = sorted(eigs[:5], key=lambda z: (z.real, z.imag))
    want = sorted(expected, key=lambda z: (z.real, z.imag))
    spectrum_err = max(abs(g - w) for g, w in zip(got, want))

    grid = [i * 0.25 for i in range(9)]
    table = solve_table(cyclic, [(s, "mean") for s in "ABCD"], grid, (0.0, -2.1322, -4.1637))
    truth = oracle_stats(cyclic, grid)
    worst = enclosure_violation(table, truth, grid, "ABCD")
    ok = spectrum_err <= 1e-3 and worst <= ENCLOSURE_TOL
    report(
        capsys, ok, "criterion 5",
        f"cyclic fixture: five smallest-magnitude eigenvalues within "
        f"{spectrum_err:.2e} of the published values (tol 1e-3); mean bounds "
        f"from the rounded exponents stay valid (violation {worst:.2e})",
    )
    assert spectrum_err <= 1e-3
    assert worst <= ENCLOSURE_TOL


def test_criterion_06_chain_bounds_collapse(chain, capsys):
    grid = [i * 0.25 for i in range(13)]
    table = solve_table(chain, [(s, "mean") for s in "ABC"], grid, (0.0, -1.0, -3.0))
    worst_gap = max(
        table[(t, s, "mean")].upper - table[(t, s, "mean")].lower
        for t in grid
        for s in "ABC"
    )
    worst = -np.inf
    for t in grid:
        for name in "ABC":
            mean, _ = analytic.chain_species_mean_var(name, t)
            point = table[(t, name, "mean")]
            worst = max(worst, point.lower - mean, mean - point.upper)
    ok = worst_gap <= 1e-3 and worst <= ENCLOSURE_TOL
    report(
        capsys, ok, "criterion 6",
        f"first-order chain: largest mean gap {worst_gap:.2e} (tol 1e-3) and "
        f"the collapsed bounds still enclose the closed form "
        f"(violation {worst:.2e})",
    )
    assert worst_gap <= 1e-3
    assert worst <= ENCLOSURE_TOL


def test_criterion_07_uncertain_initial_state(reversible_mixed, capsys):
    grid = [i * 0.5 for i in range(7)]
    names = "ABCD"
    targets = [(s, "mean") for s in names] + [(s, "variance") for s in names]
    table = solve_table(reversible_mixed, targets, grid, RHO_REV)
    truth = oracle_stats(reversible_mixed, grid)
    worst = enclosure_violation(table, truth, grid, names)
    pin_err = -np.inf
    for name in names:
        mean0 = truth[name][0][0]
        var0 = truth[name][1][0]
        point = table[(0.0, name, "mean")]
        pin_err = max(pin_err, abs(point.lower - mean0), abs(point.upper - mean0))
        pin_err = max(pin_err, abs(table[(0.0, name, "variance")].upper - var0))
    ok = worst <= ENCLOSURE_TOL and pin_err <= 1e-8
    report(
        capsys, ok, "criterion 7",
        f"three-point initial mixture: bounds stay valid (violation "
        f"{worst:.2e}) and at t=0 reproduce the mixture statistics to "
        f"{pin_err:.2e} (tol 1e-8)",
    )
    assert worst <= ENCLOSURE_TOL
    assert pin_err <= 1e-8


def test_criterion_08_moment_ode_residual(
    toy, reversible, cyclic, chain, capsys
):
    h = 1e-3
    times = [0.2, 0.5, 1.0, 1.5, 2.0]
    worst_ratio = -np.inf
    for model in (toy, reversible, cyclic, chain):
        dynamics = build_moment_odes(model, 3)
        space = enumerate_states(model)
        G = build_generator(model, space)
        p0 = initial_probability_vector(model, space)
        stencil = [t + s * h for t in times for s in (-2, -1, 1, 2)]
        mu_stencil = solve_cme(model, space, G, p0, stencil).moments(dynamics.basis)
        mu_center = solve_cme(model, space, G, p0, times).moments(dynamics.basis)
        n_low = dynamics.n_low
        scale = 1.0 + np.abs(mu_center[:, :n_low]).max()
        for i, _ in enumerate(times):
            f = mu_stencil[4 * i : 4 * i + 4, :n_low]
            deriv = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h)
            rhs = dynamics.A_L @ mu_center[i, :n_low] + dynamics.A_H @ mu_center[i, n_low:]
            worst_ratio = max(worst_ratio, np.abs(deriv - rhs).max() / scale)
    ok = worst_ratio <= 1e-6
    report(
        capsys, ok, "criterion 8",
        f"finite-difference check of the moment ODEs on all four fixtures: "
        f"worst scaled residual {worst_ratio:.2e} (tol 1e-6)",
    )
    assert worst_ratio <= 1e-6


def test_criterion_09_exact_trajectories_feasible(
    toy, reversible, cyclic, chain, capsys
):
    cases = [
        (toy, (0.0, -2.0, -6.0), [0.0, 0.7, 1.6]),
        (reversible, RHO_REV, [0.0, 1.0, 3.0]),
        (cyclic, (0.0, -2.1322, -4.1637), [0.5, 2.0]),
        (chain, (0.0, -1.0, -3.0), [0.9, 3.0]),
    ]
    worst_residual = -np.inf
    worst_eig = np.inf
    for model, rho, grid in cases:
        dynamics = build_moment_odes(model, 3)
        for _, residual, eig in feasibility_report(model, dynamics, grid, rho):
            worst_residual = max(worst_residual, residual)
            worst_eig = min(worst_eig, eig)

    # the variance problem adds one scalar and one 2x2 block; plugging the
    # exact variance in for it must stay feasible too
    model, rho, t = reversible, RHO_REV, 1.0
    dynamics = build_moment_odes(model, 3)
    query = BoundQuery(species="C", statistic="variance", T=t, rho_values=rho,
                       m=3, n=None, sense="upper")
    problem = assemble_variance_bound(model, dynamics, query)
    layout = problem.layout
    space = enumerate_states(model)
    G = build_generator(model, space)
    p0 = initial_probability_vector(model, space)
    solution = solve_cme(model, space, G, p0, [t])
    x = np.zeros(layout.size)
    x[: layout.block_size] = solution.moments(layout.basis)[0]
    for slot, r in enumerate(layout.rho_values):
        offset = layout.block_size * (1 + slot)
        x[offset : offset + layout.block_size] = z_quadrature(
            G, p0, space, layout.basis, r, t
        )
    x[layout.s_index] = solution.species_statistics("C")[1][0]
    for terms, rhs in problem.equalities:
        value = sum(c * x[idx] for idx, c in terms)
        worst_residual = max(worst_residual, abs(value - rhs))
    worst_eig = min(worst_eig, min(b.min_eigenvalue(x) for b in problem.blocks))

    ok = worst_residual <= 1e-6 and worst_eig >= -1e-6
    report(
        capsys, ok, "criterion 9",
        f"exact moments and quadrature integrals satisfy every constraint: "
        f"max equality residual {worst_residual:.2e} (tol 1e-6), min block "
        f"eigenvalue {worst_eig:.2e} (tol -1e-6)",
    )
    assert worst_residual <= 1e-6
    assert worst_eig >= -1e-6


def test_criterion_10_determinism(toy, tmp_path, capsys):
    argv = [
        "bound", str(NETWORKS / "toy.kin"), "--grid", "0:0.5:2",
        "--target", "mean:A,var:A", "--rho", "0,-2", "--with-oracle",
    ]
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    assert main(argv + ["--output", str(first)]) == 0
    assert main(argv + ["--output", str(second)]) == 0
    identical = first.read_bytes() == second.read_bytes()

    grid = [0.0, 0.5, 1.0]
    run_a = ssa_simulate(toy, grid, paths=200, seed=42)
    run_b = ssa_simulate(toy, grid, paths=200, seed=42)
    seeded = np.array_equal(run_a.mean, run_b.mean) and np.array_equal(
        run_a.variance, run_b.variance
    )
    ok = identical and seeded
    report(
        capsys, ok, "criterion 10",
        f"repeated bound runs byte-identical: {identical}; stochastic "
        f"simulation reproducible by seed: {seeded}",
    )
    assert identical
    assert seeded
