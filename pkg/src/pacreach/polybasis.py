"""Multivariate monomial basis: construction and fast evaluation.

The basis underlying every polynomial inverse Christoffel computation is the
vector of all monomials ``x1**a1 * ... * xn**an`` with total degree
``a1 + ... + an <= degree``.  The basis is ordered by total degree, and within
each degree by descending lexicographic order of the exponent tuples, so for
``n_vars=2, degree=2`` the monomials read ``1, x1, x2, x1^2, x1*x2, x2^2``.
The constant monomial always comes first.
"""

from __future__ import annotations

import math

import numpy as np

# Largest integer count that is still exactly representable in a float64;
# beyond this, downstream size arithmetic silently loses precision.
_MAX_EXACT_COUNT = 2**53


def basis_dimension(n_vars: int, degree: int) -> int:
    """Number of monomials of total degree <= ``degree`` in ``n_vars`` variables.

    Equals the binomial coefficient C(n_vars + degree, n_vars).

    Raises
    ------
    ValueError
        If ``n_vars < 1`` or ``degree < 0``.
    OverflowError
        If the count is >= 2**53 and could no longer be carried exactly
        through floating-point size computations.
    """
    if n_vars < 1:
        raise ValueError(f"n_vars must be a positive integer, got {n_vars}")
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    dim = math.comb(n_vars + degree, n_vars)
    if dim >= _MAX_EXACT_COUNT:
        raise OverflowError(
            f"basis dimension C({n_vars + degree},{n_vars}) = {dim} "
            f"exceeds the exact float64 integer range (2**53)"
        )
    return dim


def _graded_exponents(n_vars: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples with component sum <= degree, in graded order.

    Total degree ascends; within one degree, tuples are listed in descending
    lexicographic order (so x1 powers lead, matching the module docstring).
    """
    out: list[tuple[int, ...]] = []

    def compositions(total: int, parts: int, prefix: tuple[int, ...]) -> None:
        if parts == 1:
            out.append(prefix + (total,))
            return
        for head in range(total, -1, -1):
            compositions(total - head, parts - 1, prefix + (head,))

    for deg in range(degree + 1):
        compositions(deg, n_vars, ())
    return out


class MultiIndexBasis:
    """Ordered monomial basis of total degree <= ``degree`` in ``n_vars`` variables.

    Evaluation builds each monomial from a previously computed one times a
    single coordinate, so a full basis vector costs one multiply per entry.
    Instances are immutable after construction and safe to share across
    threads.

    Parameters
    ----------
    n_vars : int
        Number of variables (positive).
    degree : int
        Maximum total degree (non-negative).

    Attributes
    ----------
    exponents : tuple of tuple of int
        Exponent tuples in graded order; the first entry is all zeros.
    size : int
        Number of basis monomials, C(n_vars + degree, n_vars).
    """

    def __init__(self, n_vars: int, degree: int):
        self.size = basis_dimension(n_vars, degree)
        self.n_vars = int(n_vars)
        self.degree = int(degree)
        self.exponents: tuple[tuple[int, ...], ...] = tuple(
            _graded_exponents(self.n_vars, self.degree)
        )

        # Multiplication chain: entry j equals entry _parent[j] times
        # coordinate _coord[j].  Parents always precede children because
        # removing one power lowers the total degree.
        position = {e: j for j, e in enumerate(self.exponents)}
        parent = np.zeros(self.size, dtype=np.intp)
        coord = np.zeros(self.size, dtype=np.intp)
        for j, expo in enumerate(self.exponents[1:], start=1):
            i = next(k for k, a in enumerate(expo) if a > 0)
            reduced = expo[:i] + (expo[i] - 1,) + expo[i + 1:]
            parent[j] = position[reduced]
            coord[j] = i
        self._parent = parent
        self._coord = coord

    def __repr__(self) -> str:
        return f"MultiIndexBasis(n_vars={self.n_vars}, degree={self.degree})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MultiIndexBasis)
            and self.n_vars == other.n_vars
            and self.degree == other.degree
        )

    def __hash__(self) -> int:
        return hash((self.n_vars, self.degree))

    @property
    def total_degrees(self) -> np.ndarray:
        """Total degree of each monomial, shape ``(size,)``."""
        return np.array([sum(e) for e in self.exponents], dtype=np.intp)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate every basis monomial at one point or a batch of points.

        Parameters
        ----------
        points : array-like, shape (n_vars,) or (n_points, n_vars)

        Returns
        -------
        ndarray, shape (size,) or (n_points, size)
            Entry ``j`` is the monomial ``prod_i x_i**exponents[j][i]``; the
            constant entry is exactly 1.
        """
        x = np.asarray(points, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n_vars:
            raise ValueError(
                f"points have dimension {x.shape[1]}, basis expects {self.n_vars}"
            )
        z = np.empty((x.shape[0], self.size), dtype=np.float64)
        z[:, 0] = 1.0
        for j in range(1, self.size):
            np.multiply(z[:, self._parent[j]], x[:, self._coord[j]], out=z[:, j])
        return z[0] if single else z
