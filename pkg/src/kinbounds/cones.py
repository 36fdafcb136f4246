"""PSD blocks certifying that a vector looks like moments of a distribution
supported on the reduced polyhedron {x >= 0, alpha - beta x >= 0}.

Each block is affine in the decision vector: a constant part plus one
coefficient matrix per referenced decision variable.  Only the lower
triangle is stored; blocks are symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import MissingMoment, ValidationError
from .moments import moment_basis


class VectorHandle:
    """Maps moment multi-indices to positions in a flat decision vector."""

    def __init__(self, nvars: int, indices, offset: int):
        self.nvars = nvars
        self.offset = offset
        self._position = {mono: offset + k for k, mono in enumerate(indices)}
        self.max_order = max(sum(mono) for mono in indices)

    def index(self, mono) -> int:
        try:
            return self._position[mono]
        except KeyError:
            raise MissingMoment(
                f"moment {mono} is outside the decision vector (max order {self.max_order})"
            ) from None


@dataclass(frozen=True)
class AffineSymmetricBlock:
    """Symmetric matrix, affine in the decision vector.

    cells maps (a, b) with b <= a to (constant, ((decision index, coeff), ...)).
    Cells that are identically zero are omitted.
    """

    size: int
    cells: dict
    label: str = ""

    def evaluate(self, x) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for (a, b), (const, terms) in self.cells.items():
            value = const
            for idx, coeff in terms:
                value += coeff * x[idx]
            out[a, b] = value
            out[b, a] = value
        return out

    def min_eigenvalue(self, x) -> float:
        return float(np.linalg.eigvalsh(self.evaluate(x))[0])

    def referenced_indices(self):
        for _, terms in self.cells.values():
            for idx, _ in terms:
                yield idx


def _combine(mono_a, mono_b):
    return tuple(a + b for a, b in zip(mono_a, mono_b))


def moment_matrix(n: int, nvars: int, handle: VectorHandle, label: str = "moment") -> AffineSymmetricBlock:
    """Matrix with cell (a, b) = mu[i_a + i_b] over all |i| <= n."""
    rows = moment_basis(nvars, n)
    cells = {}
    for a, mono_a in enumerate(rows):
        for b, mono_b in enumerate(rows[: a + 1]):
            idx = handle.index(_combine(mono_a, mono_b))
            cells[(a, b)] = (0.0, ((idx, 1.0),))
    return AffineSymmetricBlock(size=len(rows), cells=cells, label=label)


def localizing_matrix(g: dict, n: int, nvars: int, handle: VectorHandle, label: str = "") -> AffineSymmetricBlock:
    """Matrix with cell (a, b) = sum_gamma g_gamma mu[i_a + i_b + gamma].

    g must be an affine polynomial (the polyhedron facets are degree one).
    """
    if any(sum(mono) > 1 for mono in g):
        raise ValidationError("localizing matrices here only support affine g")
    rows = moment_basis(nvars, n)
    cells = {}
    for a, mono_a in enumerate(rows):
        for b, mono_b in enumerate(rows[: a + 1]):
            base = _combine(mono_a, mono_b)
            terms = {}
            for gamma, coeff in g.items():
                idx = handle.index(_combine(base, gamma))
                terms[idx] = terms.get(idx, 0.0) + float(coeff)
            packed = tuple(sorted((idx, c) for idx, c in terms.items() if c != 0.0))
            if packed:
                cells[(a, b)] = (0.0, packed)
    return AffineSymmetricBlock(size=len(rows), cells=cells, label=label)


@dataclass(frozen=True)
class ConeDescription:
    n: int
    blocks: tuple[AffineSymmetricBlock, ...]


def cone(reduced, n: int, handle: VectorHandle, tag: str = "") -> ConeDescription:
    """Moment matrix plus one localizer per polyhedron facet.

    Facets are x_j >= 0 for each independent species and
    alpha_k - beta_k . x >= 0 for each dependent species.
    """
    if n < 1:
        raise ValidationError("relaxation half-order must be >= 1")
    nvars = reduced.n_independent
    blocks = [moment_matrix(n, nvars, handle, label=f"{tag}moment")]
    names = reduced.network.species
    for j, i in enumerate(reduced.independent):
        g = {tuple(1 if v == j else 0 for v in range(nvars)): Fraction(1)}
        blocks.append(
            localizing_matrix(g, n - 1, nvars, handle, label=f"{tag}{names[i]} >= 0")
        )
    for k, i in enumerate(reduced.dependent):
        g = {(0,) * nvars: Fraction(reduced.alpha[k])}
        for j in range(nvars):
            if reduced.beta[k][j] != 0:
                g[tuple(1 if v == j else 0 for v in range(nvars))] = -reduced.beta[k][j]
        blocks.append(
            localizing_matrix(g, n - 1, nvars, handle, label=f"{tag}{names[i]} >= 0")
        )
    return ConeDescription(n=n, blocks=tuple(blocks))
