"""Brute-force ground truth for desk-scale networks.

Enumerates the reachable reduced states, builds the jump-process generator,
solves the master equation transiently by uniformization, extracts moments
and eigenvalues, runs the stochastic simulation algorithm, and integrates
exponentially weighted moment trajectories by adaptive quadrature.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.integrate import quad_vec
from scipy.stats import poisson

from . import polynomials as poly
from .errors import StateCapExceeded, TooLargeForDense

DENSE_EIG_CAP = 3000
POISSON_TAIL = 1e-13


@dataclass(frozen=True)
class StateSpace:
    states: tuple[tuple[int, ...], ...]
    index: dict

    def __len__(self) -> int:
        return len(self.states)


def enumerate_states(reduced, cap: int = 100000) -> StateSpace:
    """BFS closure of the initial support under reactions with positive rate."""
    if cap < 1:
        raise ValueError("state cap must be >= 1")
    states: list[tuple[int, ...]] = []
    index: dict = {}
    queue: deque = deque()
    for state, _ in reduced.initial_support():
        if state not in index:
            index[state] = len(states)
            states.append(state)
            queue.append(state)
    if len(states) > cap:
        raise StateCapExceeded(f"initial support already exceeds cap {cap}")
    while queue:
        state = queue.popleft()
        for prop, shift in zip(reduced.propensities, reduced.reduced_stoichiometry):
            if poly.evaluate(prop, state) <= 0:
                continue
            target = tuple(x + s for x, s in zip(state, shift))
            if target not in index:
                if len(states) + 1 > cap:
                    raise StateCapExceeded(
                        f"more than {cap} reachable states; raise the cap or supply rho values"
                    )
                index[target] = len(states)
                states.append(target)
                queue.append(target)
    return StateSpace(states=tuple(states), index=index)


def build_generator(reduced, space: StateSpace) -> scipy.sparse.csr_matrix:
    """Generator G with dp/dt = G p; columns are source states."""
    rows, cols, data = [], [], []
    for col, state in enumerate(space.states):
        outflow = 0.0
        for prop, shift in zip(reduced.propensities, reduced.reduced_stoichiometry):
            rate = float(poly.evaluate(prop, state))
            if rate <= 0:
                continue
            target = tuple(x + s for x, s in zip(state, shift))
            rows.append(space.index[target])
            cols.append(col)
            data.append(rate)
            outflow += rate
        if outflow:
            rows.append(col)
            cols.append(col)
            data.append(-outflow)
    n = len(space)
    return scipy.sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def initial_probability_vector(reduced, space: StateSpace) -> np.ndarray:
    p0 = np.zeros(len(space))
    for state, prob in reduced.initial_support():
        p0[space.index[state]] = float(prob)
    return p0


def transient_distribution(G, p0: np.ndarray, t: float, tail: float = POISSON_TAIL) -> np.ndarray:
    """e^{G t} p0 by uniformization with certified Poisson tail truncation."""
    if t < 0:
        raise ValueError("time must be >= 0")
    diag = G.diagonal()
    lam = float(-diag.min()) if diag.size else 0.0
    if t == 0 or lam <= 0:
        return np.array(p0, dtype=float)
    rate = lam * t
    k_max = int(poisson.isf(tail, rate)) + 1
    weights = poisson.pmf(np.arange(k_max + 1), rate)
    P = scipy.sparse.identity(G.shape[0], format="csr") + G.tocsr() / lam
    v = np.array(p0, dtype=float)
    out = weights[0] * v
    for k in range(1, k_max + 1):
        v = P @ v
        out += weights[k] * v
    return out


def _monomial_values(space: StateSpace, basis) -> np.ndarray:
    """V[k, s] = state_s ** basis_k, for turning probabilities into moments."""
    states = np.array(space.states, dtype=float)
    V = np.ones((len(basis), len(space)))
    for k, mono in enumerate(basis):
        for var, e in enumerate(mono):
            if e:
                V[k] *= states[:, var] ** e
    return V


@dataclass
class CmeSolution:
    """Master-equation solution on a time grid, with statistic extraction."""

    reduced: object
    space: StateSpace
    t_grid: np.ndarray
    probabilities: np.ndarray

    def moments(self, basis) -> np.ndarray:
        """Moment trajectories, one row per grid time."""
        return self.probabilities @ _monomial_values(self.space, basis).T

    def species_statistics(self, species) -> tuple[np.ndarray, np.ndarray]:
        """Mean and variance trajectories for one species (name or index)."""
        c0, w = self.reduced.species_functional(species)
        states = np.array(self.space.states, dtype=float)
        counts = float(c0) + states @ np.array([float(v) for v in w])
        mean = self.probabilities @ counts
        second = self.probabilities @ counts**2
        return mean, second - mean**2


def solve_cme(reduced, space: StateSpace, G, p0: np.ndarray, t_grid) -> CmeSolution:
    """Transient solve at each grid time; probabilities stay a simplex."""
    t_grid = np.asarray(t_grid, dtype=float)
    probs = np.empty((len(t_grid), len(space)))
    for i, t in enumerate(t_grid):
        probs[i] = transient_distribution(G, p0, float(t))
    return CmeSolution(reduced=reduced, space=space, t_grid=t_grid, probabilities=probs)


def eigenvalues(G, k: int | None = None, dense_cap: int = DENSE_EIG_CAP) -> np.ndarray:
    """Distinct eigenvalues sorted by magnitude; tiny ones snap to zero."""
    n = G.shape[0]
    if n > dense_cap:
        raise TooLargeForDense(f"{n} states exceeds dense eigensolve cap {dense_cap}")
    values = np.linalg.eigvals(G.toarray())
    scale = max(1.0, float(np.max(np.abs(values), initial=0.0)))
    tol = 1e-9 * scale
    values[np.abs(values) <= tol] = 0.0
    order = np.lexsort((values.imag, values.real, np.abs(values)))
    distinct: list[complex] = []
    for v in values[order]:
        if not any(abs(v - u) <= tol for u in distinct):
            distinct.append(complex(v))
    if k is not None:
        distinct = distinct[:k]
    return np.array(distinct, dtype=complex)


def suggested_rho(eigs, k: int = 2, merge_tol: float = 1e-6) -> tuple[float, ...]:
    """Real parts of the k smallest-magnitude eigenvalues, zero included.

    Complex-conjugate pairs merge into a single real part (tolerance
    merge_tol), so a pair consumes two of the k slots but contributes one
    value. Zero is always in the result.
    """
    reals: list[float] = [0.0]
    for v in np.asarray(eigs, dtype=complex)[:k]:
        r = float(v.real)
        if not any(abs(r - u) <= merge_tol for u in reals):
            reals.append(r)
    return tuple(sorted(reals, reverse=True))


@dataclass
class SsaResult:
    t_grid: np.ndarray
    species: tuple[str, ...]
    mean: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray
    paths: int


def ssa_simulate(reduced, t_grid, paths: int, seed: int) -> SsaResult:
    """Direct-method stochastic simulation with one RNG stream per path."""
    if paths < 1:
        raise ValueError("need at least one path")
    t_grid = np.asarray(t_grid, dtype=float)
    n_times = len(t_grid)
    names = reduced.network.species
    n_species = len(names)

    support = reduced.initial_support()
    support_states = [state for state, _ in support]
    support_probs = np.array([float(p) for _, p in support])
    support_probs = support_probs / support_probs.sum()
    props = [poly.to_float(p) for p in reduced.propensities]
    shifts = reduced.reduced_stoichiometry
    full_of: dict = {}

    sums = np.zeros((n_times, n_species))
    squares = np.zeros((n_times, n_species))
    streams = np.random.SeedSequence(seed).spawn(paths)
    for stream in streams:
        rng = np.random.default_rng(stream)
        state = support_states[int(rng.choice(len(support_states), p=support_probs))]
        t = 0.0
        g = 0
        while g < n_times:
            rates = [poly.evaluate_float(p, state) for p in props]
            total = sum(rates)
            if total <= 0.0:
                break
            dt = rng.exponential(1.0 / total)
            while g < n_times and t_grid[g] < t + dt:
                full = full_of.get(state)
                if full is None:
                    full = full_of[state] = np.array(reduced.full_state(state), dtype=float)
                sums[g] += full
                squares[g] += full**2
                g += 1
            t += dt
            pick = rng.random() * total
            cumulative = 0.0
            chosen = len(rates) - 1
            for r, rate in enumerate(rates):
                cumulative += rate
                if pick < cumulative:
                    chosen = r
                    break
            state = tuple(x + s for x, s in zip(state, shifts[chosen]))
        while g < n_times:
            full = full_of.get(state)
            if full is None:
                full = full_of[state] = np.array(reduced.full_state(state), dtype=float)
            sums[g] += full
            squares[g] += full**2
            g += 1

    mean = sums / paths
    if paths > 1:
        variance = (squares - paths * mean**2) / (paths - 1)
        variance = np.maximum(variance, 0.0)
    else:
        variance = np.zeros_like(mean)
    stderr = np.sqrt(variance / paths)
    return SsaResult(
        t_grid=t_grid,
        species=names,
        mean=mean,
        variance=variance,
        stderr=stderr,
        paths=paths,
    )


def z_quadrature(G, p0: np.ndarray, space: StateSpace, basis, rho: float, T: float,
                 tol: float = 1e-11) -> np.ndarray:
    """z_j = integral_0^T e^{rho (T - t)} mu_j(t) dt by adaptive quadrature."""
    if T == 0:
        return np.zeros(len(basis))
    V = _monomial_values(space, basis)

    def integrand(t: float) -> np.ndarray:
        p = transient_distribution(G, p0, t)
        return np.exp(rho * (T - t)) * (V @ p)

    value, _ = quad_vec(integrand, 0.0, float(T), epsabs=tol, epsrel=tol)
    return value
