"""Reaction networks: parsing, stoichiometry, invariants, and reduction.

The reduction step eliminates conserved linear combinations of species so
the rest of the package works in the smaller space of independent counts.
All linear algebra here runs in exact rational arithmetic; floats appear
only when other modules convert the results into solver data.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

from . import polynomials as poly
from .errors import (
    BadProbability,
    InconsistentInvariants,
    NetworkSyntaxError,
    NonPositiveRate,
    NoValidChoice,
    SingularChoice,
    UnknownSpecies,
)

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Reaction:
    """One reaction: reactant/product multisets as (species index, count)."""

    reactants: tuple[tuple[int, int], ...]
    products: tuple[tuple[int, int], ...]
    rate: Fraction

    @property
    def order(self) -> int:
        return sum(count for _, count in self.reactants)


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    initial_distribution: tuple[tuple[tuple[int, ...], Fraction], ...]

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    def species_index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise UnknownSpecies(name) from None


def _parse_term(chunk: str, line_no: int) -> tuple[int, str]:
    tokens = chunk.split()
    if len(tokens) == 1:
        return 1, tokens[0]
    if len(tokens) == 2:
        try:
            count = int(tokens[0])
        except ValueError:
            raise NetworkSyntaxError(
                f"bad stoichiometric coefficient {tokens[0]!r}", line_no
            ) from None
        if count <= 0:
            raise NetworkSyntaxError("stoichiometric coefficients must be positive", line_no)
        return count, tokens[1]
    raise NetworkSyntaxError(f"cannot parse reaction term {chunk.strip()!r}", line_no)


def _parse_side(text: str, line_no: int) -> list[tuple[int, str]]:
    text = text.strip()
    if not text:
        raise NetworkSyntaxError("empty reaction side (write it as 0)", line_no)
    if text == "0":
        return []
    return [_parse_term(chunk, line_no) for chunk in text.split("+")]


def _parse_number(token: str, line_no: int, what: str) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise NetworkSyntaxError(f"bad {what} {token!r}", line_no) from None


def _parse_assignments(tokens, line_no: int) -> dict[str, int]:
    values: dict[str, int] = {}
    for token in tokens:
        name, sep, count_text = token.partition("=")
        if not sep or not name or not count_text:
            raise NetworkSyntaxError(f"expected name=count, got {token!r}", line_no)
        try:
            count = int(count_text)
        except ValueError:
            raise NetworkSyntaxError(f"bad count {count_text!r}", line_no) from None
        if count < 0:
            raise NetworkSyntaxError("molecular counts cannot be negative", line_no)
        if name in values:
            raise NetworkSyntaxError(f"duplicate assignment for {name!r}", line_no)
        values[name] = count
    if not values:
        raise NetworkSyntaxError("expected at least one name=count assignment", line_no)
    return values


def parse_network(text: str) -> ReactionNetwork:
    """Parse the line-oriented network format (see README for the grammar)."""
    species: list[str] = []
    raw_reactions: list[tuple[list, list, Fraction, int]] = []
    dirac: tuple[dict[str, int], int] | None = None
    weighted: list[tuple[Fraction, dict[str, int], int]] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        if keyword == "species":
            for name in rest.split():
                if name in species:
                    raise NetworkSyntaxError(f"species {name!r} declared twice", line_no)
                species.append(name)
        elif keyword == "rxn":
            body, sep, rate_text = rest.rpartition(":")
            if not sep:
                raise NetworkSyntaxError("missing ': rate' in reaction", line_no)
            if "->" not in body:
                raise NetworkSyntaxError("missing '->' in reaction", line_no)
            lhs_text, _, rhs_text = body.partition("->")
            lhs = _parse_side(lhs_text, line_no)
            rhs = _parse_side(rhs_text, line_no)
            rate = _parse_number(rate_text.strip(), line_no, "rate")
            raw_reactions.append((lhs, rhs, rate, line_no))
        elif keyword == "init":
            if dirac is not None or weighted:
                raise NetworkSyntaxError("initial state given more than once", line_no)
            dirac = (_parse_assignments(rest.split(), line_no), line_no)
        elif keyword == "initp":
            if dirac is not None:
                raise NetworkSyntaxError("cannot mix init and initp", line_no)
            prob_text, sep, assign_text = rest.partition(":")
            if not sep:
                raise NetworkSyntaxError("initp needs '<probability> : <assignments>'", line_no)
            prob = _parse_number(prob_text.strip(), line_no, "probability")
            weighted.append((prob, _parse_assignments(assign_text.split(), line_no), line_no))
        else:
            raise NetworkSyntaxError(f"unknown directive {keyword!r}", line_no)

    if not species:
        raise NetworkSyntaxError("no species declared")
    index = {name: i for i, name in enumerate(species)}

    reactions = []
    for lhs, rhs, rate, line_no in raw_reactions:
        if rate <= 0:
            raise NonPositiveRate(f"line {line_no}: rate must be positive, got {rate}")
        for _, name in lhs + rhs:
            if name not in index:
                raise UnknownSpecies(name)
        reactants: dict[int, int] = {}
        products: dict[int, int] = {}
        for count, name in lhs:
            reactants[index[name]] = reactants.get(index[name], 0) + count
        for count, name in rhs:
            products[index[name]] = products.get(index[name], 0) + count
        reactions.append(
            Reaction(
                reactants=tuple(sorted(reactants.items())),
                products=tuple(sorted(products.items())),
                rate=rate,
            )
        )
    if not reactions:
        raise NetworkSyntaxError("no reactions declared")

    def build_state(values: dict[str, int], line_no: int) -> tuple[int, ...]:
        for name in values:
            if name not in index:
                raise UnknownSpecies(name)
        return tuple(values.get(name, 0) for name in species)

    if dirac is not None:
        values, line_no = dirac
        distribution = [(build_state(values, line_no), Fraction(1))]
    elif weighted:
        distribution = []
        seen = set()
        for prob, values, line_no in weighted:
            if prob <= 0:
                raise BadProbability(f"line {line_no}: probability must be positive, got {prob}")
            state = build_state(values, line_no)
            if state in seen:
                raise NetworkSyntaxError("duplicate initial state", line_no)
            seen.add(state)
            distribution.append((state, prob))
        total = sum(p for _, p in distribution)
        if abs(float(total) - 1.0) > PROB_TOL:
            raise BadProbability(f"initial probabilities sum to {float(total)}, expected 1")
    else:
        raise NetworkSyntaxError("no initial state (need an init or initp line)")

    return ReactionNetwork(
        species=tuple(species),
        reactions=tuple(reactions),
        initial_distribution=tuple(distribution),
    )


def stoichiometry(network: ReactionNetwork) -> np.ndarray:
    """Integer matrix S of shape (n_species, n_reactions), products minus reactants."""
    S = np.zeros((network.n_species, network.n_reactions), dtype=np.int64)
    for r, reaction in enumerate(network.reactions):
        for i, count in reaction.reactants:
            S[i, r] -= count
        for i, count in reaction.products:
            S[i, r] += count
    return S


def _normalize_row(row: list[Fraction]) -> tuple[int, ...]:
    denom_lcm = 1
    for v in row:
        denom_lcm = denom_lcm * v.denominator // gcd(denom_lcm, v.denominator)
    ints = [int(v * denom_lcm) for v in row]
    content = 0
    for v in ints:
        content = gcd(content, abs(v))
    if content > 1:
        ints = [v // content for v in ints]
    for v in ints:
        if v != 0:
            if v < 0:
                ints = [-u for u in ints]
            break
    return tuple(ints)


def invariants(S: np.ndarray, initial_support) -> tuple[tuple[tuple[int, ...], ...], tuple[int, ...]]:
    """Integer basis B of the left null space of S and the conserved values f.

    Rows of B are content-free integers with positive leading entry; f = B x0
    must agree across every state in the initial support.
    """
    n_species, n_reactions = S.shape
    # Reduced row echelon form of S^T over the rationals.
    mat = [[Fraction(int(S[j, r])) for j in range(n_species)] for r in range(n_reactions)]
    pivots: list[int] = []
    row = 0
    for col in range(n_species):
        pivot = next((i for i in range(row, n_reactions) if mat[i][col] != 0), None)
        if pivot is None:
            continue
        mat[row], mat[pivot] = mat[pivot], mat[row]
        lead = mat[row][col]
        mat[row] = [v / lead for v in mat[row]]
        for i in range(n_reactions):
            if i != row and mat[i][col] != 0:
                factor = mat[i][col]
                mat[i] = [a - factor * b for a, b in zip(mat[i], mat[row])]
        pivots.append(col)
        row += 1
        if row == n_reactions:
            break

    free_cols = [c for c in range(n_species) if c not in pivots]
    basis = []
    for free in free_cols:
        vec = [Fraction(0)] * n_species
        vec[free] = Fraction(1)
        for pivot_row, pivot_col in enumerate(pivots):
            vec[pivot_col] = -mat[pivot_row][free]
        basis.append(_normalize_row(vec))
    B = tuple(basis)

    states = list(initial_support)
    if not states:
        raise InconsistentInvariants("empty initial support")
    f_values = []
    for state in states:
        f_values.append(tuple(sum(b * x for b, x in zip(brow, state)) for brow in B))
    f = f_values[0]
    for state, other in zip(states[1:], f_values[1:]):
        if other != f:
            raise InconsistentInvariants(
                f"state {tuple(state)} has invariant values {other}, expected {f}"
            )
    return B, f


def _solve_exact(matrix, rhs_columns):
    """Solve matrix @ X = rhs for each rhs column, all in Fractions.

    Returns None when the matrix is singular.
    """
    size = len(matrix)
    aug = [list(matrix[i]) + [col[i] for col in rhs_columns] for i in range(size)]
    width = size + len(rhs_columns)
    for col in range(size):
        pivot = next((i for i in range(col, size) if aug[i][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        lead = aug[col][col]
        aug[col] = [v / lead for v in aug[col]]
        for i in range(size):
            if i != col and aug[i][col] != 0:
                factor = aug[i][col]
                aug[i] = [a - factor * b for a, b in zip(aug[i], aug[col])]
    return [[aug[i][size + k] for i in range(size)] for k in range(len(rhs_columns))]


def _greedy_dependent(B) -> list[int]:
    """Pick dependent columns by rational full pivoting, maximizing |pivot|.

    Ties prefer the larger column index, which keeps early-declared species
    independent.
    """
    n_rows = len(B)
    n_cols = len(B[0]) if n_rows else 0
    work = [[Fraction(v) for v in row] for row in B]
    remaining_rows = list(range(n_rows))
    remaining_cols = list(range(n_cols))
    chosen: list[int] = []
    for _ in range(n_rows):
        best = None
        for i in remaining_rows:
            for c in remaining_cols:
                v = abs(work[i][c])
                if v == 0:
                    continue
                key = (v, c, -i)
                if best is None or key > best[0]:
                    best = (key, i, c)
        if best is None:
            raise NoValidChoice("invariant basis is rank deficient")
        _, pivot_row, pivot_col = best
        for i in remaining_rows:
            if i != pivot_row and work[i][pivot_col] != 0:
                factor = work[i][pivot_col] / work[pivot_row][pivot_col]
                work[i] = [a - factor * b for a, b in zip(work[i], work[pivot_row])]
        chosen.append(pivot_col)
        remaining_rows.remove(pivot_row)
        remaining_cols.remove(pivot_col)
    return sorted(chosen)


@dataclass(frozen=True)
class ReducedModel:
    """A network rewritten over its independent species.

    Dependent counts satisfy x_dep = alpha - beta @ x_hat; propensities are
    polynomials in the independent counts x_hat.
    """

    network: ReactionNetwork
    invariant_matrix: tuple[tuple[int, ...], ...]
    invariant_values: tuple[int, ...]
    independent: tuple[int, ...]
    dependent: tuple[int, ...]
    alpha: tuple[Fraction, ...]
    beta: tuple[tuple[Fraction, ...], ...]
    reduced_stoichiometry: tuple[tuple[int, ...], ...]
    propensities: tuple[dict, ...]

    @property
    def n_independent(self) -> int:
        return len(self.independent)

    @property
    def n_dependent(self) -> int:
        return len(self.dependent)

    @property
    def q_max(self) -> int:
        return max(reaction.order for reaction in self.network.reactions)

    @property
    def independent_names(self) -> tuple[str, ...]:
        return tuple(self.network.species[i] for i in self.independent)

    def species_expression(self, species: int) -> dict:
        """Count of a full-model species as an affine polynomial in x_hat."""
        if species in self.independent:
            return poly.variable(self.independent.index(species), self.n_independent)
        k = self.dependent.index(species)
        return poly.affine(self.alpha[k], [-b for b in self.beta[k]])

    def species_functional(self, species) -> tuple[Fraction, tuple[Fraction, ...]]:
        """Return (c0, w) with count = c0 + w . x_hat."""
        if isinstance(species, str):
            species = self.network.species_index(species)
        expr = self.species_expression(species)
        zero_mono = (0,) * self.n_independent
        c0 = expr.get(zero_mono, Fraction(0))
        w = []
        for j in range(self.n_independent):
            mono = tuple(1 if k == j else 0 for k in range(self.n_independent))
            w.append(expr.get(mono, Fraction(0)))
        return c0, tuple(w)

    def full_state(self, x_hat) -> tuple[int, ...]:
        """Rebuild the full count vector from independent counts."""
        state = [0] * self.network.n_species
        for pos, i in enumerate(self.independent):
            state[i] = int(x_hat[pos])
        for k, i in enumerate(self.dependent):
            value = self.alpha[k] - sum(b * x for b, x in zip(self.beta[k], x_hat))
            if value.denominator != 1:
                raise ValueError(f"state {tuple(x_hat)} maps to non-integer count {value}")
            state[i] = int(value)
        return tuple(state)

    def reduced_state(self, full_state) -> tuple[int, ...]:
        return tuple(int(full_state[i]) for i in self.independent)

    def initial_support(self) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
        return tuple(
            (self.reduced_state(state), prob)
            for state, prob in self.network.initial_distribution
        )

    def initial_moments(self, basis) -> list[Fraction]:
        """Exact moments of the initial distribution for each multi-index."""
        out = []
        for mono in basis:
            total = Fraction(0)
            for x_hat, prob in self.initial_support():
                term = prob
                for x, e in zip(x_hat, mono):
                    if e:
                        term *= Fraction(x) ** e
                total += term
            out.append(total)
        return out


def reduce(network: ReactionNetwork, independent_choice=None) -> ReducedModel:
    """Split species into independent/dependent sets and rewrite the model.

    independent_choice, when given, lists the species indices to keep
    independent; the complement must give an invertible dependent basis.
    """
    S = stoichiometry(network)
    support = [state for state, _ in network.initial_distribution]
    B, f = invariants(S, support)
    n_species = network.n_species
    n_dep = len(B)

    if independent_choice is not None:
        independent = sorted(set(int(i) for i in independent_choice))
        if len(independent) != n_species - n_dep or not all(
            0 <= i < n_species for i in independent
        ):
            raise SingularChoice(
                f"need {n_species - n_dep} distinct species indices in range, got {independent}"
            )
        dependent = [i for i in range(n_species) if i not in independent]
    else:
        dependent = _greedy_dependent(B) if n_dep else []
        independent = [i for i in range(n_species) if i not in dependent]

    if n_dep:
        b_tilde = [[Fraction(B[l][c]) for c in dependent] for l in range(n_dep)]
        rhs = [[Fraction(v) for v in f]]
        for c in independent:
            rhs.append([Fraction(B[l][c]) for l in range(n_dep)])
        solved = _solve_exact(b_tilde, rhs)
        if solved is None:
            raise SingularChoice(f"dependent columns {dependent} are linearly dependent")
        alpha = tuple(solved[0])
        beta = tuple(
            tuple(solved[1 + j][k] for j in range(len(independent)))
            for k in range(n_dep)
        )
    else:
        alpha = ()
        beta = ()

    n_hat = len(independent)

    def expression(species: int) -> dict:
        if species in independent:
            return poly.variable(independent.index(species), n_hat)
        k = dependent.index(species)
        return poly.affine(alpha[k], [-b for b in beta[k]])

    propensities = []
    for reaction in network.reactions:
        p = poly.constant(reaction.rate, n_hat)
        for i, count in reaction.reactants:
            p = poly.mul(p, poly.falling_product(expression(i), count, n_hat))
        propensities.append(p)

    return ReducedModel(
        network=network,
        invariant_matrix=B,
        invariant_values=f,
        independent=tuple(independent),
        dependent=tuple(dependent),
        alpha=alpha,
        beta=beta,
        reduced_stoichiometry=tuple(
            tuple(int(S[i, r]) for i in independent) for r in range(network.n_reactions)
        ),
        propensities=tuple(propensities),
    )
