"""Command-line surface: bounding sweeps, oracle runs, eigenvalue reports,
stochastic simulation, and feasibility diagnostics.

Outputs are deterministic: the same configuration writes identical bytes.
Exit codes: 0 success, 2 configuration error, 3 solver failure at one or
more grid points, 4 state-space cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .assembly import (
    BoundQuery,
    assemble_mean_bound,
    assemble_variance_bound,
    canonical_rho,
    scale_problem,
)
from .errors import KinboundsError, StateCapExceeded, ValidationError
from .moments import build_moment_odes, default_relaxation_order
from .network import parse_network, reduce
from .oracle import (
    build_generator,
    eigenvalues,
    enumerate_states,
    initial_probability_vector,
    solve_cme,
    ssa_simulate,
    suggested_rho,
    z_quadrature,
)
from .solver import OPTIMAL, Tolerances, solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CAP = 4

STATISTIC_ALIASES = {"mean": "mean", "var": "variance", "variance": "variance"}


@dataclass
class BoundPoint:
    """One (time, target) result; lower is None for variance bounds."""

    t: float
    species: str
    statistic: str
    lower: float | None
    upper: float | None
    status: str
    oracle: float | None = None


def parse_grid(text: str) -> list[float]:
    """Accept start:step:end or an explicit comma-separated list."""
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError("grid must be start:step:end")
            start, step, end = (float(p) for p in parts)
            if step < 0:
                raise ValueError("grid step must be >= 0")
            if step == 0:
                if start != end:
                    raise ValueError("zero step needs start == end")
                grid = [start]
            else:
                count = int(np.floor((end - start) / step + 1e-9)) + 1
                if count < 1:
                    raise ValueError("empty grid")
                grid = [start + i * step for i in range(count)]
        else:
            grid = [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"bad grid {text!r}: {exc}") from None
    if not grid:
        raise ValidationError("empty time grid")
    if grid[0] < 0:
        raise ValidationError("grid times must be >= 0")
    for a, b in zip(grid, grid[1:]):
        if b <= a:
            raise ValidationError("grid must be strictly increasing")
    return grid


def parse_targets(text: str, network) -> list[tuple[str, str]]:
    targets = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        stat_name, sep, species = chunk.partition(":")
        if not sep or stat_name not in STATISTIC_ALIASES:
            raise ValidationError(
                f"bad target {chunk!r}; expected mean:<species> or var:<species>"
            )
        network.species_index(species)
        targets.append((species, STATISTIC_ALIASES[stat_name]))
    if not targets:
        raise ValidationError("no targets requested")
    return targets


def resolve_rho(text: str, reduced, state_cap: int) -> tuple[float, ...]:
    """Explicit comma list, or auto[:k] from generator eigenvalues."""
    text = text.strip()
    if text.startswith("auto"):
        _, sep, count = text.partition(":")
        k = 2
        if sep:
            try:
                k = int(count)
            except ValueError:
                raise ValidationError(f"bad rho request {text!r}") from None
        try:
            space = enumerate_states(reduced, cap=state_cap)
        except StateCapExceeded as exc:
            raise StateCapExceeded(
                f"{exc}; automatic rho selection needs an enumerable state space, "
                "pass --rho explicitly"
            ) from None
        eigs = eigenvalues(build_generator(reduced, space))
        return canonical_rho(suggested_rho(eigs, k=k))
    try:
        values = [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise ValidationError(f"bad rho list {text!r}") from None
    if not values:
        raise ValidationError("empty rho list")
    return canonical_rho(values)


def _initial_count_scale(reduced) -> float:
    top = 1.0
    for state, _ in reduced.network.initial_distribution:
        for count in state:
            top = max(top, float(count))
    return top


def _solve_target_point(reduced, dynamics, species, statistic, t, rho, n, tol,
                        iter_cap, s_char) -> BoundPoint:
    senses = ("lower", "upper") if statistic == "mean" else ("upper",)
    values: dict[str, float | None] = {"lower": None, "upper": None}
    statuses = []
    for sense in senses:
        query = BoundQuery(
            species=species, statistic=statistic, T=t, rho_values=rho,
            m=dynamics.m, n=n, sense=sense,
        )
        if statistic == "mean":
            problem = assemble_mean_bound(reduced, dynamics, query)
        else:
            problem = assemble_variance_bound(reduced, dynamics, query)
        if s_char is not None and s_char != 1.0:
            problem, _ = scale_problem(problem, s_char)
        result = solve(problem, tol=tol, iter_cap=iter_cap)
        values[sense] = result.objective
        statuses.append(result.status)
    status = next((s for s in statuses if s != OPTIMAL), OPTIMAL)
    return BoundPoint(
        t=t, species=species, statistic=statistic,
        lower=values["lower"], upper=values["upper"], status=status,
    )


def run_bounds(reduced, dynamics, targets, grid, rho, n=None, tol=None,
               iter_cap=100, scaling="none", s_char=None, workers=1) -> list[BoundPoint]:
    """Solve the bound SDPs over a time grid, in grid order.

    scaling: "none"; "fixed" (uses s_char, default the largest initial
    count); or "sweep", where each species' scale for the next time is its
    most recent mean upper bound (forcing sequential solves).
    """
    tol = tol or Tolerances()
    rho = canonical_rho(rho)
    base_scale = s_char if s_char is not None else _initial_count_scale(reduced)

    if scaling == "sweep":
        tracked: dict[str, float] = {}
        points = []
        for t in grid:
            for species, statistic in targets:
                scale = tracked.get(species, base_scale)
                point = _solve_target_point(
                    reduced, dynamics, species, statistic, t, rho, n, tol,
                    iter_cap, scale,
                )
                points.append(point)
                if statistic == "mean" and point.upper is not None:
                    tracked[species] = max(point.upper, 1.0)
        return points

    if scaling == "fixed":
        point_scale = base_scale
    elif scaling == "none":
        point_scale = None
    else:
        raise ValidationError(f"unknown scaling mode {scaling!r}")

    tasks = [(t, species, statistic) for t in grid for species, statistic in targets]

    def work(task):
        t, species, statistic = task
        return _solve_target_point(
            reduced, dynamics, species, statistic, t, rho, n, tol, iter_cap,
            point_scale,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, tasks))
    return [work(task) for task in tasks]


def attach_oracle(points, reduced, grid, state_cap: int) -> None:
    """Fill the oracle column from a master-equation solve on the grid."""
    space = enumerate_states(reduced, cap=state_cap)
    G = build_generator(reduced, space)
    p0 = initial_probability_vector(reduced, space)
    solution = solve_cme(reduced, space, G, p0, grid)
    position = {float(t): i for i, t in enumerate(grid)}
    stats: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for point in points:
        if point.species not in stats:
            stats[point.species] = solution.species_statistics(point.species)
        mean, variance = stats[point.species]
        series = mean if point.statistic == "mean" else variance
        point.oracle = float(series[position[point.t]])


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def bound_rows_csv(points, with_oracle: bool) -> str:
    header = "t,target,statistic,lower,upper,status"
    if with_oracle:
        header += ",oracle"
    lines = [header]
    for p in points:
        row = [_fmt(p.t), p.species, p.statistic, _fmt(p.lower), _fmt(p.upper), p.status]
        if with_oracle:
            row.append(_fmt(p.oracle))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _versions() -> dict:
    import cvxopt
    import scipy

    return {
        "kinbounds": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "cvxopt": cvxopt.__version__,
    }


def bound_rows_json(points, config: dict) -> str:
    payload = {
        "config": config,
        "versions": _versions(),
        "points": [
            {
                "t": p.t,
                "target": p.species,
                "statistic": p.statistic,
                "lower": p.lower,
                "upper": p.upper,
                "status": p.status,
                "oracle": p.oracle,
            }
            for p in points
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_output(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load_network(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network(fh.read())


def _resolve(args, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _common_arguments(sub):
    sub.add_argument("network", help="path to a network file")
    sub.add_argument("--config", help="JSON file with defaults for any option")
    sub.add_argument("--output", help="output path (default stdout)")
    sub.add_argument("--format", choices=("csv", "json"), dest="fmt")
    sub.add_argument("--state-cap", type=int, dest="state_cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinbounds",
        description="Guaranteed mean/variance bounds for stochastic reaction networks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    bound = commands.add_parser("bound", help="solve bound SDPs over a time grid")
    _common_arguments(bound)
    bound.add_argument("--grid", help="start:step:end or comma list")
    bound.add_argument("--target", help="comma list like mean:A,var:C")
    bound.add_argument("--rho", help="comma list of rho values, or auto[:k]")
    bound.add_argument("--m", type=int, dest="m")
    bound.add_argument("--n", type=int, dest="n")
    bound.add_argument("--gap-tol", type=float, dest="gap_tol")
    bound.add_argument("--feas-tol", type=float, dest="feas_tol")
    bound.add_argument("--iter-cap", type=int, dest="iter_cap")
    bound.add_argument("--scaling", help="none, fixed[:value], or sweep")
    bound.add_argument("--workers", type=int)
    bound.add_argument("--with-oracle", action="store_const", const=True, dest="with_oracle")

    oracle_cmd = commands.add_parser("oracle", help="exact means/variances from the master equation")
    _common_arguments(oracle_cmd)
    oracle_cmd.add_argument("--grid")
    oracle_cmd.add_argument("--species", help="comma list (default: all species)")

    eigs = commands.add_parser("eigs", help="generator eigenvalues and suggested rho values")
    _common_arguments(eigs)
    eigs.add_argument("--k", type=int, dest="k")

    ssa = commands.add_parser("ssa", help="stochastic simulation estimates")
    _common_arguments(ssa)
    ssa.add_argument("--grid")
    ssa.add_argument("--paths", type=int)
    ssa.add_argument("--seed", type=int)

    check = commands.add_parser("check", help="feasibility diagnostics of exact trajectories")
    _common_arguments(check)
    check.add_argument("--grid")
    check.add_argument("--rho")
    check.add_argument("--m", type=int, dest="m")
    check.add_argument("--n", type=int, dest="n")
    check.add_argument("--tol", type=float)
    return parser


def _load_config(args) -> dict:
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        return loaded
    return {}


def _cmd_bound(args) -> int:
    config = _load_config(args)
    net = _load_network(args.network)
    reduced = reduce(net)
    state_cap = int(_resolve(args, config, "state_cap", 100000))
    grid = parse_grid(str(_resolve(args, config, "grid", "0:0.1:1")))
    targets = parse_targets(str(_resolve(args, config, "target", "")), net)
    rho = resolve_rho(str(_resolve(args, config, "rho", "auto:2")), reduced, state_cap)
    m = int(_resolve(args, config, "m", 3))
    n = _resolve(args, config, "n", None)
    n = int(n) if n is not None else None
    tol = Tolerances(
        gap=float(_resolve(args, config, "gap_tol", 1e-8)),
        feas=float(_resolve(args, config, "feas_tol", 1e-7)),
    )
    iter_cap = int(_resolve(args, config, "iter_cap", 100))
    workers = int(_resolve(args, config, "workers", 1))
    with_oracle = bool(_resolve(args, config, "with_oracle", False))
    scaling_text = str(_resolve(args, config, "scaling", "none"))
    scaling, _, scale_value = scaling_text.partition(":")
    s_char = float(scale_value) if scale_value else None
    if scaling not in ("none", "fixed", "sweep"):
        raise ValidationError(f"unknown scaling mode {scaling_text!r}")

    dynamics = build_moment_odes(reduced, m)
    points = run_bounds(
        reduced, dynamics, targets, grid, rho, n=n, tol=tol, iter_cap=iter_cap,
        scaling=scaling, s_char=s_char, workers=workers,
    )
    if with_oracle:
        attach_oracle(points, reduced, grid, state_cap)

    fmt = _resolve(args, config, "fmt", "csv")
    if fmt == "csv":
        text = bound_rows_csv(points, with_oracle)
    else:
        meta = {
            "command": "bound",
            "network": args.network,
            "grid": grid,
            "targets": [list(t) for t in targets],
            "rho": list(rho),
            "m": m,
            "n": n if n is not None else default_relaxation_order(dynamics),
            "tolerances": {"gap": tol.gap, "feas": tol.feas},
            "iter_cap": iter_cap,
            "scaling": scaling_text,
            "with_oracle": with_oracle,
        }
        text = bound_rows_json(points, meta)
    _write_output(text, _resolve(args, config, "output", None))
    if any(p.status != OPTIMAL for p in points):
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_oracle(args) -> int:
    config = _load_config(args)
    net = _load_network(args.network)
    reduced = reduce(net)
    state_cap = int(_resolve(args, config, "state_cap", 100000))
    grid = parse_grid(str(_resolve(args, config, "grid", "0:0.1:1")))
    species_text = _resolve(args, config, "species", None)
    names = (
        [s.strip() for s in str(species_text).split(",") if s.strip()]
        if species_text
        else list(net.species)
    )
    for name in names:
        net.species_index(name)

    space = enumerate_states(reduced, cap=state_cap)
    G = build_generator(reduced, space)
    p0 = initial_probability_vector(reduced, space)
    solution = solve_cme(reduced, space, G, p0, grid)

    fmt = _resolve(args, config, "fmt", "csv")
    if fmt == "csv":
        lines = ["t,species,mean,variance"]
        for i, t in enumerate(grid):
            for name in names:
                mean, variance = solution.species_statistics(name)
                lines.append(f"{_fmt(t)},{name},{_fmt(mean[i])},{_fmt(variance[i])}")
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "config": {"command": "oracle", "network": args.network, "grid": grid,
                       "species": names},
            "versions": _versions(),
            "points": [
                {
                    "t": t,
                    "species": name,
                    "mean": float(solution.species_statistics(name)[0][i]),
                    "variance": float(solution.species_statistics(name)[1][i]),
                }
                for i, t in enumerate(grid)
                for name in names
            ],
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _write_output(text, _resolve(args, config, "output", None))
    return EXIT_OK


def _cmd_eigs(args) -> int:
    config = _load_config(args)
    net = _load_network(args.network)
    reduced = reduce(net)
    state_cap = int(_resolve(args, config, "state_cap", 100000))
    k = int(_resolve(args, config, "k", 2))
    space = enumerate_states(reduced, cap=state_cap)
    G = build_generator(reduced, space)
    eigs = eigenvalues(G)
    rho = suggested_rho(eigs, k=k)

    fmt = _resolve(args, config, "fmt", "csv")
    if fmt == "json":
        payload = {
            "config": {"command": "eigs", "network": args.network, "k": k},
            "eigenvalues": [[v.real, v.imag] for v in eigs],
            "suggested_rho": list(rho),
            "versions": _versions(),
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        lines = ["kind,real,imag"]
        for v in eigs:
            lines.append(f"eigenvalue,{_fmt(v.real)},{_fmt(v.imag)}")
        for r in rho:
            lines.append(f"suggested_rho,{_fmt(r)},")
        text = "\n".join(lines) + "\n"
    _write_output(text, _resolve(args, config, "output", None))
    return EXIT_OK


def _cmd_ssa(args) -> int:
    config = _load_config(args)
    net = _load_network(args.network)
    reduced = reduce(net)
    grid = parse_grid(str(_resolve(args, config, "grid", "0:0.1:1")))
    paths = int(_resolve(args, config, "paths", 1000))
    seed = int(_resolve(args, config, "seed", 0))
    if paths < 1:
        raise ValidationError("--paths must be >= 1")
    result = ssa_simulate(reduced, grid, paths, seed)

    fmt = _resolve(args, config, "fmt", "csv")
    if fmt == "csv":
        lines = ["t,species,mean,variance,stderr"]
        for i, t in enumerate(grid):
            for j, name in enumerate(result.species):
                lines.append(
                    f"{_fmt(t)},{name},{_fmt(result.mean[i, j])},"
                    f"{_fmt(result.variance[i, j])},{_fmt(result.stderr[i, j])}"
                )
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "config": {"command": "ssa", "network": args.network, "grid": grid,
                       "paths": paths, "seed": seed},
            "versions": _versions(),
            "points": [
                {
                    "t": t,
                    "species": name,
                    "mean": float(result.mean[i, j]),
                    "variance": float(result.variance[i, j]),
                    "stderr": float(result.stderr[i, j]),
                }
                for i, t in enumerate(grid)
                for j, name in enumerate(result.species)
            ],
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _write_output(text, _resolve(args, config, "output", None))
    return EXIT_OK


def feasibility_report(reduced, dynamics, grid, rho, n=None, quad_tol=1e-11,
                       state_cap=100000):
    """Max equality residual and min block eigenvalue of the exact trajectory.

    Plugs master-equation moments and quadrature z vectors into the mean-SDP
    constraint set for each grid time; returns one (t, residual, eigenvalue)
    triple per time.
    """
    rho = canonical_rho(rho)
    space = enumerate_states(reduced, cap=state_cap)
    G = build_generator(reduced, space)
    p0 = initial_probability_vector(reduced, space)
    solution = solve_cme(reduced, space, G, p0, grid)
    target = reduced.network.species[0]
    report = []
    for i, t in enumerate(grid):
        query = BoundQuery(species=target, statistic="mean", T=float(t),
                           rho_values=rho, m=dynamics.m, n=n, sense="upper")
        problem = assemble_mean_bound(reduced, dynamics, query)
        layout = problem.layout
        x = np.zeros(layout.size)
        x[: layout.block_size] = solution.moments(layout.basis)[i]
        for slot, r in enumerate(layout.rho_values):
            offset = layout.block_size * (1 + slot)
            x[offset : offset + layout.block_size] = z_quadrature(
                G, p0, space, layout.basis, r, float(t), tol=quad_tol
            )
        residual = 0.0
        for terms, rhs in problem.equalities:
            value = sum(c * x[idx] for idx, c in terms)
            residual = max(residual, abs(value - rhs))
        min_eig = min(block.min_eigenvalue(x) for block in problem.blocks)
        report.append((float(t), float(residual), float(min_eig)))
    return report


def _cmd_check(args) -> int:
    config = _load_config(args)
    net = _load_network(args.network)
    reduced = reduce(net)
    state_cap = int(_resolve(args, config, "state_cap", 100000))
    grid = parse_grid(str(_resolve(args, config, "grid", "0:0.5:2")))
    rho = resolve_rho(str(_resolve(args, config, "rho", "auto:2")), reduced, state_cap)
    m = int(_resolve(args, config, "m", 3))
    n = _resolve(args, config, "n", None)
    n = int(n) if n is not None else None
    tol = float(_resolve(args, config, "tol", 1e-6))

    dynamics = build_moment_odes(reduced, m)
    report = feasibility_report(reduced, dynamics, grid, rho, n=n, state_cap=state_cap)
    ok = all(residual <= tol and eig >= -tol for _, residual, eig in report)

    fmt = _resolve(args, config, "fmt", "csv")
    if fmt == "csv":
        lines = ["t,max_equality_residual,min_block_eigenvalue,ok"]
        for t, residual, eig in report:
            passed = "true" if (residual <= tol and eig >= -tol) else "false"
            lines.append(f"{_fmt(t)},{_fmt(residual)},{_fmt(eig)},{passed}")
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "config": {"command": "check", "network": args.network, "grid": grid,
                       "rho": list(rho), "m": m, "tol": tol},
            "versions": _versions(),
            "points": [
                {"t": t, "max_equality_residual": residual,
                 "min_block_eigenvalue": eig,
                 "ok": bool(residual <= tol and eig >= -tol)}
                for t, residual, eig in report
            ],
            "ok": ok,
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _write_output(text, _resolve(args, config, "output", None))
    return EXIT_OK if ok else EXIT_SOLVER


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "bound": _cmd_bound,
        "oracle": _cmd_oracle,
        "eigs": _cmd_eigs,
        "ssa": _cmd_ssa,
        "check": _cmd_check,
    }
    try:
        return handlers[args.command](args)
    except StateCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except KinboundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
