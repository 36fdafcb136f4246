"""Assembly of the dynamic bounding SDPs for means and variances.

The decision vector stacks proxy moments mu(T) for all orders <= 2n, one
exponentially weighted integral block z per rho value, and (for variance
bounds) a trailing scalar s.  For each rho the integral identity

    mu_L(T) - e^{rho T} mu_L(0) = (A_L - rho I) z_L + A_H z_H

is imposed row by row, and cone membership is imposed on mu(T) and on
every z block.  Optimizing a species functional over this feasible set
yields guaranteed bounds on the true statistic at time T.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cones import AffineSymmetricBlock, VectorHandle, cone
from .errors import MissingMoment, UnsupportedSense, ValidationError
from .moments import MomentDynamics, default_relaxation_order, moment_basis

RHO_TOL = 1e-12


def canonical_rho(values) -> tuple[float, ...]:
    """Deduplicate, force the always-present zero value, sort descending."""
    out: list[float] = []
    for v in list(values) + [0.0]:
        v = float(v)
        if not any(abs(v - u) <= RHO_TOL for u in out):
            out.append(v)
    return tuple(sorted(out, reverse=True))


@dataclass(frozen=True)
class BoundQuery:
    species: str
    statistic: str
    T: float
    rho_values: tuple[float, ...]
    m: int = 3
    n: int | None = None
    sense: str = "upper"

    def __post_init__(self):
        if self.statistic not in ("mean", "variance"):
            raise ValidationError(f"unknown statistic {self.statistic!r}")
        if self.sense not in ("upper", "lower"):
            raise ValidationError(f"unknown sense {self.sense!r}")
        if not self.T >= 0:
            raise ValidationError("time horizon must be >= 0")
        object.__setattr__(self, "rho_values", canonical_rho(self.rho_values))


class Layout:
    """Positions of the proxy-moment and z blocks in the decision vector."""

    def __init__(self, nvars: int, n: int, rho_values, with_s: bool = False):
        self.nvars = nvars
        self.n = n
        self.rho_values = tuple(float(r) for r in rho_values)
        self.with_s = with_s
        self.basis = moment_basis(nvars, 2 * n)
        block = len(self.basis)
        self.block_size = block
        self.size = block * (1 + len(self.rho_values)) + (1 if with_s else 0)
        self.s_index = self.size - 1 if with_s else None
        self._position = {mono: k for k, mono in enumerate(self.basis)}

    def mu_handle(self) -> VectorHandle:
        return VectorHandle(self.nvars, self.basis, 0)

    def z_handle(self, slot: int) -> VectorHandle:
        return VectorHandle(self.nvars, self.basis, self.block_size * (1 + slot))

    def mu_index(self, mono) -> int:
        try:
            return self._position[tuple(mono)]
        except KeyError:
            raise MissingMoment(f"moment {tuple(mono)} exceeds order {2 * self.n}") from None

    def z_index(self, slot: int, mono) -> int:
        return self.block_size * (1 + slot) + self.mu_index(mono)

    def describe(self) -> dict:
        return {
            "nvars": self.nvars,
            "n": self.n,
            "rho": list(self.rho_values),
            "with_s": self.with_s,
            "size": self.size,
        }


Row = tuple[tuple[tuple[int, float], ...], float]


def _pack_row(coeffs: dict, rhs: float) -> Row:
    return (tuple(sorted((i, c) for i, c in coeffs.items() if c != 0.0)), float(rhs))


@dataclass
class ConicProblem:
    """min/max of a linear functional over equality rows and PSD blocks."""

    layout: Layout
    sense: str
    objective: dict
    objective_constant: float
    equalities: tuple
    blocks: tuple
    time_horizon: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.layout.size

    def validate(self) -> None:
        if self.sense not in ("min", "max"):
            raise ValidationError(f"bad sense {self.sense!r}")
        n = self.n_vars
        for idx in self.objective:
            if not 0 <= idx < n:
                raise ValidationError(f"objective references index {idx} of {n}")
        for terms, _ in self.equalities:
            for idx, coeff in terms:
                if not 0 <= idx < n:
                    raise ValidationError(f"equality references index {idx} of {n}")
                if not math.isfinite(coeff):
                    raise ValidationError("non-finite equality coefficient")
        for block in self.blocks:
            for idx in block.referenced_indices():
                if not 0 <= idx < n:
                    raise ValidationError(f"block {block.label!r} references index {idx} of {n}")

    def to_json(self) -> str:
        payload = {
            "layout": self.layout.describe(),
            "sense": self.sense,
            "objective": {
                "constant": self.objective_constant,
                "terms": sorted([int(i), float(c)] for i, c in self.objective.items()),
            },
            "equalities": [
                {"terms": [[int(i), float(c)] for i, c in terms], "rhs": rhs}
                for terms, rhs in self.equalities
            ],
            "blocks": [
                {
                    "size": block.size,
                    "label": block.label,
                    "cells": [
                        [a, b, const, [[int(i), float(c)] for i, c in terms]]
                        for (a, b), (const, terms) in sorted(block.cells.items())
                    ],
                }
                for block in self.blocks
            ],
            "time_horizon": self.time_horizon,
            "meta": self.meta,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ConicProblem":
        payload = json.loads(text)
        desc = payload["layout"]
        layout = Layout(desc["nvars"], desc["n"], desc["rho"], desc["with_s"])
        if layout.size != desc["size"]:
            raise ValidationError("layout size mismatch in serialized problem")
        blocks = []
        for raw in payload["blocks"]:
            cells = {
                (a, b): (const, tuple((int(i), float(c)) for i, c in terms))
                for a, b, const, terms in raw["cells"]
            }
            blocks.append(
                AffineSymmetricBlock(size=raw["size"], cells=cells, label=raw["label"])
            )
        return ConicProblem(
            layout=layout,
            sense=payload["sense"],
            objective={int(i): float(c) for i, c in payload["objective"]["terms"]},
            objective_constant=payload["objective"]["constant"],
            equalities=tuple(
                (tuple((int(i), float(c)) for i, c in row["terms"]), float(row["rhs"]))
                for row in payload["equalities"]
            ),
            blocks=tuple(blocks),
            time_horizon=payload["time_horizon"],
            meta=payload["meta"],
        )


def dynamic_equality_rows(
    dynamics: MomentDynamics, mu0_low, rho: float, T: float, layout: Layout, slot: int
) -> list[Row]:
    """Integral-identity rows for one rho: one row per low-order index.

    The j = 0 row reads mu_0(T) + rho z_0 = e^{rho T}; for rho = 0 it
    duplicates the normalization row and is removed by the solver's
    redundant-row elimination.
    """
    z_offset = layout.block_size * (1 + slot)
    n_low = dynamics.n_low
    n_high = dynamics.A_H.shape[1]
    factor = math.exp(rho * T)
    rows = []
    for j in range(n_low):
        coeffs = {j: 1.0}
        for col in range(n_low):
            c = dynamics.A_L[j, col] - (rho if col == j else 0.0)
            if c != 0.0:
                coeffs[z_offset + col] = -c
        for col in range(n_high):
            c = dynamics.A_H[j, col]
            if c != 0.0:
                coeffs[z_offset + n_low + col] = -c
        rows.append(_pack_row(coeffs, factor * float(mu0_low[j])))
    return rows


def _base_layout_and_rows(reduced, dynamics, query, with_s):
    n = query.n if query.n is not None else default_relaxation_order(dynamics)
    layout = Layout(reduced.n_independent, n, query.rho_values, with_s=with_s)
    if 2 * n < dynamics.M:
        raise MissingMoment(
            f"relaxation order n={n} covers moments up to {2 * n}, dynamics need {dynamics.M}"
        )
    mu0 = [float(v) for v in reduced.initial_moments(dynamics.basis_low)]
    rows = [_pack_row({layout.mu_index((0,) * layout.nvars): 1.0}, 1.0)]
    for slot, rho in enumerate(layout.rho_values):
        rows.extend(dynamic_equality_rows(dynamics, mu0, rho, query.T, layout, slot))
    blocks = list(cone(reduced, n, layout.mu_handle(), tag="mu:").blocks)
    for slot in range(len(layout.rho_values)):
        blocks.extend(cone(reduced, n, layout.z_handle(slot), tag=f"z[{slot}]:").blocks)
    return layout, rows, blocks


def _first_moment_indices(layout: Layout):
    for j in range(layout.nvars):
        yield j, tuple(1 if v == j else 0 for v in range(layout.nvars))


def assemble_mean_bound(reduced, dynamics: MomentDynamics, query: BoundQuery) -> ConicProblem:
    """Bound the mean count of one species at time T from either side."""
    if query.statistic != "mean":
        raise ValidationError("assemble_mean_bound expects a mean query")
    c0, w = reduced.species_functional(query.species)
    layout, rows, blocks = _base_layout_and_rows(reduced, dynamics, query, with_s=False)
    objective = {}
    for j, mono in _first_moment_indices(layout):
        if w[j] != 0:
            objective[layout.mu_index(mono)] = float(w[j])
    return ConicProblem(
        layout=layout,
        sense="max" if query.sense == "upper" else "min",
        objective=objective,
        objective_constant=float(c0),
        equalities=tuple(rows),
        blocks=tuple(blocks),
        time_horizon=float(query.T),
        meta={
            "species": query.species,
            "statistic": "mean",
            "sense": query.sense,
            "T": float(query.T),
            "rho": list(layout.rho_values),
            "m": dynamics.m,
            "n": layout.n,
        },
    )


def assemble_variance_bound(reduced, dynamics: MomentDynamics, query: BoundQuery) -> ConicProblem:
    """Upper-bound the variance of one species count at time T.

    Adds a scalar s and the 2x2 condition [[<f^2> - s, <f>], [<f>, 1]] >= 0,
    whose Schur complement gives s <= <f^2> - <f>^2; maximizing s over the
    relaxation upper-bounds the true variance.  Lower bounds are not
    available for variances.
    """
    if query.statistic != "variance":
        raise ValidationError("assemble_variance_bound expects a variance query")
    if query.sense != "upper":
        raise UnsupportedSense("variance bounds are one-sided (upper only)")
    c0, w = reduced.species_functional(query.species)
    layout, rows, blocks = _base_layout_and_rows(reduced, dynamics, query, with_s=True)

    first = {j: layout.mu_index(mono) for j, mono in _first_moment_indices(layout)}
    square_terms: dict[int, float] = {}
    for j in range(layout.nvars):
        if w[j] == 0:
            continue
        square_terms[first[j]] = square_terms.get(first[j], 0.0) + 2.0 * float(c0 * w[j])
        for k in range(layout.nvars):
            if w[k] == 0:
                continue
            mono = tuple(
                (1 if v == j else 0) + (1 if v == k else 0) for v in range(layout.nvars)
            )
            idx = layout.mu_index(mono)
            square_terms[idx] = square_terms.get(idx, 0.0) + float(w[j] * w[k])
    square_terms[layout.s_index] = -1.0
    mean_terms = tuple(sorted((first[j], float(w[j])) for j in range(layout.nvars) if w[j] != 0))
    cells = {
        (0, 0): (
            float(c0 * c0),
            tuple(sorted((i, c) for i, c in square_terms.items() if c != 0.0)),
        ),
        (1, 0): (float(c0), mean_terms),
        (1, 1): (1.0, ()),
    }
    blocks.append(AffineSymmetricBlock(size=2, cells=cells, label="variance"))

    return ConicProblem(
        layout=layout,
        sense="max",
        objective={layout.s_index: 1.0},
        objective_constant=0.0,
        equalities=tuple(rows),
        blocks=tuple(blocks),
        time_horizon=float(query.T),
        meta={
            "species": query.species,
            "statistic": "variance",
            "sense": "upper",
            "T": float(query.T),
            "rho": list(layout.rho_values),
            "m": dynamics.m,
            "n": layout.n,
        },
    )


@dataclass(frozen=True)
class ScalingMap:
    """Diagonal substitution x = diag * y applied to a problem."""

    diag: np.ndarray

    def unscale_vector(self, y):
        if y is None:
            return None
        return self.diag * np.asarray(y, dtype=float)


def scale_problem(problem: ConicProblem, s_char: float) -> tuple[ConicProblem, ScalingMap]:
    """Rescale decision variables so well-spread moment magnitudes shrink.

    A moment of order o is divided by s_char^o; z variables additionally by
    max(T, 1) e^{max(rho, 0) T}.  The substituted problem has the same
    optimal value; the map recovers original-variable vectors.
    """
    if not s_char > 0:
        raise ValidationError("characteristic count must be positive")
    layout = problem.layout
    T = problem.time_horizon
    diag = np.ones(layout.size)
    for k, mono in enumerate(layout.basis):
        diag[k] = s_char ** sum(mono)
    for slot, rho in enumerate(layout.rho_values):
        time_factor = max(T, 1.0) * math.exp(max(rho, 0.0) * T)
        offset = layout.block_size * (1 + slot)
        for k, mono in enumerate(layout.basis):
            diag[offset + k] = (s_char ** sum(mono)) * time_factor
    if layout.with_s:
        diag[layout.s_index] = s_char ** 2

    def scale_terms(terms):
        return tuple((i, c * diag[i]) for i, c in terms)

    scaled = ConicProblem(
        layout=layout,
        sense=problem.sense,
        objective={i: c * diag[i] for i, c in problem.objective.items()},
        objective_constant=problem.objective_constant,
        equalities=tuple((scale_terms(terms), rhs) for terms, rhs in problem.equalities),
        blocks=tuple(
            AffineSymmetricBlock(
                size=block.size,
                cells={
                    cell: (const, scale_terms(terms))
                    for cell, (const, terms) in block.cells.items()
                },
                label=block.label,
            )
            for block in problem.blocks
        ),
        time_horizon=problem.time_horizon,
        meta={**problem.meta, "s_char": float(s_char)},
    )
    return scaled, ScalingMap(diag=diag)
